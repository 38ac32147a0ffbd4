//! Marginal-likelihood hyperparameter search.
//!
//! Parameters are the log lengthscales and the log output variance of a
//! Gaussian ARD kernel. Each start is refined by cyclic coordinate-wise
//! golden-section search in a window that halves every sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, GpModel};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperSearchConfig {
    pub noise_variance: f64,
    /// Random log-uniform starts, in addition to `initial`.
    pub starts: usize,
    pub seed: u64,
    pub sweeps: usize,
    pub golden_iters: usize,
    pub lengthscale_bounds: (f64, f64),
    pub variance_bounds: (f64, f64),
    /// Explicit starting points, tried before the random starts.
    #[serde(skip)]
    pub initial: Vec<KernelSpec>,
}

impl Default for HyperSearchConfig {
    fn default() -> Self {
        HyperSearchConfig {
            noise_variance: 1e-8,
            starts: 16,
            seed: 0,
            sweeps: 3,
            golden_iters: 12,
            lengthscale_bounds: (1e-2, 1e1),
            variance_bounds: (1e-2, 1e2),
            initial: Vec::new(),
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

struct Objective<'a> {
    data: &'a Dataset,
    noise: f64,
}

impl Objective<'_> {
    fn lml(&self, theta: &[f64]) -> f64 {
        let d = theta.len() - 1;
        let spec = KernelSpec {
            family: crate::kernel::KernelFamily::GaussianArd,
            lengthscales: theta[..d].iter().map(|v| v.exp()).collect(),
            output_variance: theta[d].exp(),
            nu: None,
        };
        match GpModel::fit(&spec, self.noise, self.data.clone()) {
            Ok(m) => {
                let v = m.log_marginal_likelihood();
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

fn golden_max(mut lo: f64, mut hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Rows sorted lexicographically so that the search does not depend on the
/// order in which observations arrived.
fn canonical(data: &Dataset) -> Result<Dataset> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (data.inputs().row(a), data.inputs().row(b));
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(data.outputs()[a].total_cmp(&data.outputs()[b]))
    });
    let inputs = data.inputs().select(&order);
    let outputs = order.iter().map(|&i| data.outputs()[i]).collect();
    Dataset::from_points(inputs, outputs)
}

pub fn fit_hyperparameters(data: &Dataset, search: &HyperSearchConfig) -> Result<KernelSpec> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "hyperparameter fitting needs at least 2 observations, got {}",
            data.len()
        )));
    }
    let dim = data.dim();
    let data = canonical(data)?;
    let obj = Objective {
        data: &data,
        noise: search.noise_variance,
    };
    let (l_lo, l_hi) = (search.lengthscale_bounds.0.ln(), search.lengthscale_bounds.1.ln());
    let (v_lo, v_hi) = (search.variance_bounds.0.ln(), search.variance_bounds.1.ln());
    let bounds = |i: usize| if i < dim { (l_lo, l_hi) } else { (v_lo, v_hi) };

    let mut starts: Vec<Vec<f64>> = search
        .initial
        .iter()
        .filter(|s| s.dim() == dim)
        .map(|s| {
            let mut t: Vec<f64> = s.lengthscales.iter().map(|l| l.ln()).collect();
            t.push(s.output_variance.ln());
            t
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    for _ in 0..search.starts {
        starts.push(
            (0..=dim)
                .map(|i| {
                    let (lo, hi) = bounds(i);
                    rng.random_range(lo..hi)
                })
                .collect(),
        );
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mut theta in starts {
        let mut value = obj.lml(&theta);
        for sweep in 0..search.sweeps {
            for i in 0..=dim {
                let (lo, hi) = bounds(i);
                let half = 0.5 * (hi - lo) * 0.5f64.powi(sweep as i32);
                let a = (theta[i] - half).max(lo);
                let b = (theta[i] + half).min(hi);
                let mut probe = theta.clone();
                let (arg, val) = golden_max(a, b, search.golden_iters, |v| {
                    probe[i] = v;
                    obj.lml(&probe)
                });
                if val > value {
                    theta[i] = arg;
                    value = val;
                }
            }
        }
        if value.is_finite() && best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((theta, value));
        }
    }

    let (theta, _) = best.ok_or(Error::NotPositiveDefinite {
        what: "every hyperparameter start",
        jitter: crate::linalg::FIT_JITTER[crate::linalg::FIT_JITTER.len() - 1],
    })?;
    KernelSpec::gaussian(theta[..dim].iter().map(|v| v.exp()).collect(), theta[dim].exp())
}
