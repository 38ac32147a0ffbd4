//! Regret bookkeeping, information-gain identities, and the constants that
//! enter the cumulative regret bounds.

use serde::{Deserialize, Serialize};

use crate::acquisition::theoretical_beta;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::linalg::{cholesky_jittered, log_det_from_cholesky, FIT_JITTER};
use crate::normal;
use crate::points::Points;

/// One selection of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    /// Selection index, starting at 1; initial-design points are not counted.
    pub t: usize,
    pub batch: usize,
    pub x: Vec<f64>,
    /// Noisy observation returned by the worker.
    pub y: f64,
    /// Largest noise-free value among the initial design and selections `1..=t`.
    pub best_so_far: f64,
    pub simple_regret: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionMethod {
    Ucb,
    IrgpUcb,
    Pims,
    Eims,
    Ts,
}

/// Finite-domain `ζ_t`, `ξ_t` for the regret decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionConstants {
    pub method: ConditionMethod,
    pub domain_size: usize,
    pub noise_variance: f64,
}

impl ConditionConstants {
    pub fn new(method: ConditionMethod, domain_size: usize, noise_variance: f64) -> Result<Self> {
        if domain_size < 1 {
            return Err(Error::InvalidArgument("domain must be nonempty".into()));
        }
        if method == ConditionMethod::Eims && !(noise_variance > 0.0) {
            return Err(Error::InvalidArgument(
                "EIMS constants need positive noise variance".into(),
            ));
        }
        Ok(ConditionConstants {
            method,
            domain_size,
            noise_variance,
        })
    }

    fn c2(&self) -> f64 {
        2.0 + 2.0 * (self.domain_size as f64 / 2.0).ln()
    }

    fn ucb_beta(&self, t: usize) -> f64 {
        theoretical_beta(self.domain_size, t)
    }

    pub fn zeta(&self, t: usize) -> f64 {
        match self.method {
            ConditionMethod::Ucb => self.ucb_beta(t),
            ConditionMethod::IrgpUcb | ConditionMethod::Pims | ConditionMethod::Ts => self.c2(),
            ConditionMethod::Eims => {
                let s2 = self.noise_variance;
                let c2 = self.c2();
                ((s2 + t as f64 - 1.0) / s2).ln() + c2 + (2.0 * std::f64::consts::PI * c2).sqrt()
            }
        }
    }

    pub fn xi(&self, t: usize) -> f64 {
        match self.method {
            ConditionMethod::Ucb => self.domain_size as f64 * normal::INV_SQRT_2PI * (-self.ucb_beta(t) / 2.0).exp(),
            _ => 0.0,
        }
    }
}

/// `C_1 = 2 / log(1 + σ⁻²)`.
pub fn c1(noise_variance: f64) -> f64 {
    2.0 / (1.0 / noise_variance).ln_1p()
}

/// `C_Q = (Q + σ²)/σ²`.
pub fn c_q(q: usize, noise_variance: f64) -> f64 {
    (q as f64 + noise_variance) / noise_variance
}

/// `B_T = √(C_1 γ_T Σζ_t) + Σξ_t`.
pub fn bcr_bound(gamma_t: f64, constants: &ConditionConstants, t_max: usize, noise_variance: f64) -> Result<f64> {
    if t_max < 1 {
        return Err(Error::InvalidArgument("the horizon must be at least 1".into()));
    }
    let (zeta, xi) = (1..=t_max).fold((0.0, 0.0), |(z, x), t| (z + constants.zeta(t), x + constants.xi(t)));
    Ok((c1(noise_variance) * gamma_t * zeta).sqrt() + xi)
}

/// Finite-domain cumulative regret bound for the randomized believer with at
/// most `q` pending queries: `B_T + √(C_1 C_2 C_Q γ_T T)`.
pub fn rkb_bcr_bound(
    gamma_t: f64,
    constants: &ConditionConstants,
    t_max: usize,
    q: usize,
    noise_variance: f64,
) -> Result<f64> {
    let base = bcr_bound(gamma_t, constants, t_max, noise_variance)?;
    let c2 = 2.0 + 2.0 * (constants.domain_size as f64 / 2.0).ln();
    Ok(base + (c1(noise_variance) * c2 * c_q(q, noise_variance) * gamma_t * t_max as f64).sqrt())
}

/// `½ log det(I + σ⁻² K)`.
pub fn information_gain(k: &nalgebra::DMatrix<f64>, noise_variance: f64) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "information gain needs positive noise variance".into(),
        ));
    }
    if k.nrows() != k.ncols() {
        return Err(Error::InvalidArgument("kernel matrix must be square".into()));
    }
    let n = k.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let a = nalgebra::DMatrix::identity(n, n) + k / noise_variance;
    let (l, _) = cholesky_jittered(&a, &FIT_JITTER, "I + K/σ² for information gain")?;
    Ok(0.5 * log_det_from_cholesky(&l))
}

/// `½ Σ log(1 + σ⁻² σ²(x_t; x_1..x_{t−1}))` along the given order.
pub fn sequential_information_gain(spec: &KernelSpec, points: &Points, noise_variance: f64) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "information gain needs positive noise variance".into(),
        ));
    }
    let mut model = GpModel::fit(spec, noise_variance, Dataset::empty(points.dim()))?;
    let mut total = 0.0;
    for x in points.rows() {
        let v = model.posterior_var(x)?;
        total += 0.5 * (v / noise_variance).ln_1p();
        let single = Points::from_flat(points.dim(), x.to_vec())?;
        model = model.condition_fantasy(&single, &[0.0])?;
    }
    Ok(total)
}

/// Picks `t_max` candidates by repeatedly taking the largest conditioned
/// variance. Returns the chosen indices and their information gain, which is
/// a lower bound on the maximum information gain.
pub fn greedy_mig_path(
    spec: &KernelSpec,
    candidates: &Points,
    t_max: usize,
    noise_variance: f64,
) -> Result<(Vec<usize>, f64)> {
    if t_max > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "T = {t_max} exceeds the {} candidates",
            candidates.len()
        )));
    }
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "information gain needs positive noise variance".into(),
        ));
    }
    let mut model = GpModel::fit(spec, noise_variance, Dataset::empty(candidates.dim()))?;
    let mut chosen = Vec::with_capacity(t_max);
    let mut gain = 0.0;
    for _ in 0..t_max {
        let (_, var) = model.predict(candidates)?;
        let i = crate::acquisition::argmax_values(&var)?;
        gain += 0.5 * (var[i].max(0.0) / noise_variance).ln_1p();
        chosen.push(i);
        model = model.condition_fantasy(&candidates.select(&[i]), &[0.0])?;
    }
    Ok((chosen, gain))
}

pub fn greedy_mig(spec: &KernelSpec, candidates: &Points, t_max: usize, noise_variance: f64) -> Result<f64> {
    greedy_mig_path(spec, candidates, t_max, noise_variance).map(|(_, g)| g)
}

/// `σ²(x; obs) / σ²(x; full)`.
pub fn variance_ratio(obs_model: &GpModel, full_model: &GpModel, x: &[f64]) -> Result<f64> {
    let num = obs_model.posterior_var(x)?;
    let den = full_model.posterior_var(x)?;
    if !(den > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "conditioned variance at {x:?} is {den}; the ratio is undefined"
        )));
    }
    Ok(num / den)
}

/// Closed form for the variance after `i` noisy observations at `x` itself,
/// starting from variance `var_n`.
pub fn repeated_observation_variance(var_n: f64, noise_variance: f64, i: usize) -> f64 {
    var_n * noise_variance / (i as f64 * var_n + noise_variance)
}

/// `(1 − Φ(c), ½ exp(−c²/2))`.
pub fn normal_tail_check(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("c = {c} must be positive")));
    }
    Ok((normal::sf(c), 0.5 * (-c * c / 2.0).exp()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub batch: usize,
    pub method: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

/// Per-batch mean and standard error across trials. Each inner vector holds
/// one trial's value at each batch boundary.
pub fn aggregate_batches(method: &str, per_trial: &[Vec<f64>]) -> Result<Vec<SummaryRow>> {
    let first = per_trial
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces to aggregate".into()))?;
    if per_trial.iter().any(|v| v.len() != first.len()) {
        return Err(Error::InvalidArgument("traces have different lengths".into()));
    }
    let n = per_trial.len();
    Ok((0..first.len())
        .map(|b| {
            let mut vals: Vec<f64> = per_trial.iter().map(|v| v[b]).collect();
            // fixed summation order keeps the output independent of trial order
            vals.sort_by(f64::total_cmp);
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let ss = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
                (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                batch: b + 1,
                method: method.to_string(),
                mean,
                stderr,
                n_trials: n,
            }
        })
        .collect())
}

/// Simple regret (or best value when the optimum is unknown) at the end of
/// every batch, per trace.
pub fn aggregate_traces(method: &str, traces: &[&[RegretRecord]]) -> Result<Vec<SummaryRow>> {
    let per_trial: Vec<Vec<f64>> = traces
        .iter()
        .map(|records| {
            let mut out: Vec<f64> = Vec::new();
            for (i, r) in records.iter().enumerate() {
                let last_of_batch = records.get(i + 1).is_none_or(|n| n.batch != r.batch);
                if last_of_batch {
                    out.push(r.simple_regret.unwrap_or(r.best_so_far));
                }
            }
            out
        })
        .collect();
    aggregate_batches(method, &per_trial)
}

/// Outcome of one self-test check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick invariant suite used by the `selftest` command.
pub fn selftest() -> Vec<Check> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);

    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..10 {
        let spec = KernelSpec::gaussian_iso(2, rng.random_range(0.1..1.0), rng.random_range(0.5..2.0)).unwrap();
        let pts = Points::from_flat(2, (0..30).map(|_| rng.random()).collect()).unwrap();
        let s2 = rng.random_range(1e-3..1.0);
        let res = kernel_matrix(&spec, &pts)
            .and_then(|k| information_gain(&k, s2))
            .and_then(|a| sequential_information_gain(&spec, &pts, s2).map(|b| (a, b)));
        match res {
            Ok((a, b)) => worst = worst.max((a - b).abs() / a.abs().max(1.0)),
            Err(_) => ok = false,
        }
    }
    checks.push(Check {
        name: "information gain identity",
        passed: ok && worst < 1e-8,
        detail: format!("max relative gap {worst:.3e}"),
    });

    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = 2;
        let q = rng.random_range(1..=7usize);
        let s2 = 10f64.powf(rng.random_range(-3.0..0.0));
        let spec = KernelSpec::gaussian_iso(d, rng.random_range(0.05..1.0), 1.0).unwrap();
        let n = rng.random_range(0..10usize);
        let obs = Points::from_flat(d, (0..n * d).map(|_| rng.random()).collect()).unwrap();
        let pend = Points::from_flat(d, (0..q * d).map(|_| rng.random()).collect()).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let res = Dataset::from_points(obs, vec![0.0; n])
            .and_then(|data| GpModel::fit(&spec, s2, data))
            .and_then(|m| m.condition_fantasy(&pend, &vec![0.0; q]).map(|f| (m, f)))
            .and_then(|(m, f)| variance_ratio(&m, &f, &x));
        match res {
            Ok(r) => {
                worst = worst.max(r / c_q(q, s2));
                ok &= r <= c_q(q, s2) + 1e-6;
            }
            Err(_) => ok = false,
        }
    }
    checks.push(Check {
        name: "variance ratio below C_Q",
        passed: ok,
        detail: format!("largest ratio / C_Q = {worst:.4}"),
    });

    let mut ok = true;
    let mut c = 1e-3;
    while c <= 8.0 {
        let (exact, bound) = normal_tail_check(c).unwrap();
        ok &= exact <= bound;
        c *= 1.05;
    }
    checks.push(Check {
        name: "normal tail bound",
        passed: ok,
        detail: "c on a log grid over [1e-3, 8]".into(),
    });

    let mut worst = 0.0f64;
    for _ in 0..10 {
        let spec = KernelSpec::gaussian_iso(1, rng.random_range(0.1..1.0), 1.0).unwrap();
        let s2 = rng.random_range(0.01..1.0);
        let x = [rng.random::<f64>()];
        let other = Points::from_flat(1, vec![rng.random()]).unwrap();
        let mut model = GpModel::fit(&spec, s2, Dataset::from_points(other, vec![0.0]).unwrap()).unwrap();
        let var_n = model.posterior_var(&x).unwrap();
        for i in 1..=10 {
            model = model
                .condition_fantasy(&Points::from_flat(1, x.to_vec()).unwrap(), &[0.0])
                .unwrap();
            let want = repeated_observation_variance(var_n, s2, i);
            worst = worst.max((model.posterior_var(&x).unwrap() - want).abs());
        }
    }
    checks.push(Check {
        name: "repeated observation variance",
        passed: worst < 1e-10,
        detail: format!("max error {worst:.3e}"),
    });
    checks
}
