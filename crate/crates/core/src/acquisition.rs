//! Acquisition functions, confidence-width schedules, and their maximization
//! over finite candidate sets or the unit cube.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::normal;
use crate::points::Points;

/// Confidence-width parameter `β_t` for UCB-type rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaSchedule {
    /// `2 ln(|X| t² / √(2π))`.
    TheoreticalFinite {
        domain_size: usize,
    },
    /// `0.2 d ln(2t)`.
    Heuristic {
        dim: usize,
    },
    /// `2 ln(|X|/2) + E` with `E` exponential of mean 2.
    IrgpRandom {
        domain_size: usize,
    },
    Fixed {
        value: f64,
    },
}

impl BetaSchedule {
    pub fn value<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> f64 {
        let t = t as f64;
        match *self {
            BetaSchedule::TheoreticalFinite { domain_size } => theoretical_beta(domain_size, t as usize),
            BetaSchedule::Heuristic { dim } => 0.2 * dim as f64 * (2.0 * t).ln(),
            BetaSchedule::IrgpRandom { domain_size } => {
                let shift = 2.0 * (domain_size as f64 / 2.0).ln();
                let e = Exp::new(0.5).expect("positive rate");
                shift + e.sample(rng)
            }
            BetaSchedule::Fixed { value } => value,
        }
    }

    /// Whether drawing a value consumes randomness.
    pub fn is_random(&self) -> bool {
        matches!(self, BetaSchedule::IrgpRandom { .. })
    }
}

/// `2 ln(|X| t² / √(2π))`.
pub fn theoretical_beta(domain_size: usize, t: usize) -> f64 {
    let t = t as f64;
    2.0 * (domain_size as f64 * t * t * normal::INV_SQRT_2PI).ln()
}

pub fn beta_value<R: Rng + ?Sized>(schedule: &BetaSchedule, t: usize, rng: &mut R) -> f64 {
    schedule.value(t, rng)
}

pub fn ucb_from_moments(mean: f64, var: f64, beta: f64) -> f64 {
    mean + beta.max(0.0).sqrt() * var.max(0.0).sqrt()
}

/// Expected improvement over `tau`: `σ (s Φ(s) + φ(s))` with `s = (μ − τ)/σ`.
/// At zero variance the improvement is deterministic, `max(μ − τ, 0)`.
pub fn ei_from_moments(mean: f64, var: f64, tau: f64) -> f64 {
    let sigma = var.max(0.0).sqrt();
    if sigma == 0.0 {
        return (mean - tau).max(0.0);
    }
    let s = (mean - tau) / sigma;
    (sigma * (s * normal::cdf(s) + normal::pdf(s))).max(0.0)
}

/// `1 − Φ((g* − μ)/σ)`; at zero variance, 1 if `μ ≥ g*` else 0.
pub fn pims_from_moments(mean: f64, var: f64, gstar: f64) -> f64 {
    let sigma = var.max(0.0).sqrt();
    if sigma == 0.0 {
        return if mean >= gstar { 1.0 } else { 0.0 };
    }
    normal::sf((gstar - mean) / sigma)
}

pub fn ucb(model: &GpModel, x: &[f64], beta: f64) -> Result<f64> {
    if beta < 0.0 {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be nonnegative")));
    }
    Ok(ucb_from_moments(
        model.posterior_mean(x)?,
        model.posterior_var(x)?,
        beta,
    ))
}

pub fn ei_threshold(model: &GpModel, x: &[f64], tau: f64) -> Result<f64> {
    Ok(ei_from_moments(model.posterior_mean(x)?, model.posterior_var(x)?, tau))
}

pub fn pims(model: &GpModel, x: &[f64], gstar: f64) -> Result<f64> {
    Ok(pims_from_moments(
        model.posterior_mean(x)?,
        model.posterior_var(x)?,
        gstar,
    ))
}

/// Lowest-index maximizer; any NaN is reported as an error.
pub fn argmax_values(values: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::NonFiniteAcquisition { index: i, value: v });
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("argmax over an empty candidate set".into()))
}

pub fn argmax_over(candidates: &Points, mut af: impl FnMut(&[f64]) -> f64) -> Result<usize> {
    let values: Vec<f64> = candidates.rows().map(&mut af).collect();
    argmax_values(&values)
}

/// Continuous maximization: a uniform random pool followed by coordinate
/// pattern search from the best few pool points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CubeOptimizer {
    pub pool_size: usize,
    pub refine_top: usize,
    pub refine_steps: usize,
    pub initial_step: f64,
}

impl Default for CubeOptimizer {
    fn default() -> Self {
        CubeOptimizer {
            pool_size: 2000,
            refine_top: 5,
            refine_steps: 20,
            initial_step: 0.1,
        }
    }
}

impl CubeOptimizer {
    pub fn pool<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Points {
        let flat = (0..self.pool_size.max(1) * dim).map(|_| rng.random::<f64>()).collect();
        Points::from_flat(dim, flat).expect("flat length is a multiple of dim")
    }

    /// Maximizes a batch scorer starting from `pool`. Returns the best point
    /// and its score.
    pub fn maximize(
        &self,
        pool: &Points,
        score: &mut dyn FnMut(&Points) -> Result<Vec<f64>>,
    ) -> Result<(Vec<f64>, f64)> {
        let values = score(pool)?;
        let first = argmax_values(&values)?;
        let mut best = (pool.row(first).to_vec(), values[first]);

        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let dim = pool.dim();
        for &start in order.iter().take(self.refine_top) {
            let mut x = pool.row(start).to_vec();
            let mut fx = values[start];
            let mut step = self.initial_step;
            for _ in 0..self.refine_steps {
                let mut nbrs = Points::with_capacity(dim, 2 * dim);
                for i in 0..dim {
                    for sign in [-1.0, 1.0] {
                        let mut y = x.clone();
                        y[i] = (y[i] + sign * step).clamp(0.0, 1.0);
                        nbrs.push(&y)?;
                    }
                }
                let nv = score(&nbrs)?;
                let j = argmax_values(&nv)?;
                if nv[j] > fx {
                    x = nbrs.row(j).to_vec();
                    fx = nv[j];
                } else {
                    step *= 0.5;
                }
            }
            if fx > best.1 {
                best = (x, fx);
            }
        }
        Ok(best)
    }
}
