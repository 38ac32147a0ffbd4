//! Parallel selection strategies and the simulated worker loops.
//!
//! Every strategy picks one input at a time given the observed data and the
//! inputs still being evaluated (pending). The believer strategies condition
//! the model on imputed values at the pending inputs first:
//!
//! * `KB` imputes the posterior mean,
//! * `RKB` imputes one joint posterior sample plus fresh observation noise,
//!
//! and then apply the base acquisition function unchanged.

mod sim;

pub use sim::{run_asynchronous, run_synchronous, DurationModel, KernelPolicy, LoopConfig, Trace, TrialSeeds};

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    argmax_values, ei_from_moments, pims_from_moments, ucb_from_moments, BetaSchedule, CubeOptimizer,
};
use crate::diagnostics::c_q;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::objectives::SearchSpace;
use crate::points::{check_dim, Points};
use crate::sampling::{build_feature_map, joint_normal_draw, sample_path_discrete, sample_path_rff, PosteriorSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseAcquisition {
    Ucb(BetaSchedule),
    Ei,
    Pims,
}

impl BaseAcquisition {
    fn name(&self) -> &'static str {
        match self {
            BaseAcquisition::Ucb(_) => "UCB",
            BaseAcquisition::Ei => "EI",
            BaseAcquisition::Pims => "PIMS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Sequential rule that ignores pending inputs.
    Plain(BaseAcquisition),
    Rkb(BaseAcquisition),
    Kb(BaseAcquisition),
    Bucb(BetaSchedule),
    Pts,
    Us,
    Rs,
}

impl Strategy {
    /// Parses names such as `RKB-UCB`, `KB-PIMS`, `BUCB`, `PTS`, `US`, `RS`,
    /// or a bare base rule (`UCB`, `EI`, `PIMS`). `beta` is used wherever a
    /// UCB width is needed.
    pub fn parse(name: &str, beta: BetaSchedule) -> Result<Self> {
        let upper = name.trim().to_ascii_uppercase();
        let base = |s: &str| match s {
            "UCB" => Ok(BaseAcquisition::Ucb(beta)),
            "EI" => Ok(BaseAcquisition::Ei),
            "PIMS" => Ok(BaseAcquisition::Pims),
            _ => Err(Error::Config(format!("unknown acquisition {s:?} in method {name:?}"))),
        };
        match upper.as_str() {
            "BUCB" => Ok(Strategy::Bucb(beta)),
            "PTS" | "TS" => Ok(Strategy::Pts),
            "US" => Ok(Strategy::Us),
            "RS" => Ok(Strategy::Rs),
            _ => match upper.split_once('-') {
                Some(("RKB", b)) => Ok(Strategy::Rkb(base(b)?)),
                Some(("KB", b)) => Ok(Strategy::Kb(base(b)?)),
                Some(_) => Err(Error::Config(format!("unknown method {name:?}"))),
                None => Ok(Strategy::Plain(base(&upper)?)),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Strategy::Plain(b) => b.name().to_string(),
            Strategy::Rkb(b) => format!("RKB-{}", b.name()),
            Strategy::Kb(b) => format!("KB-{}", b.name()),
            Strategy::Bucb(_) => "BUCB".into(),
            Strategy::Pts => "PTS".into(),
            Strategy::Us => "US".into(),
            Strategy::Rs => "RS".into(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::parse(s, BetaSchedule::Fixed { value: 4.0 })
    }
}

/// How posterior sample paths are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    /// Exact joint draws on grids up to `exact_limit` points, random
    /// Fourier features otherwise.
    Auto,
    Exact,
    Rff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub sampler: SamplerChoice,
    pub exact_limit: usize,
    pub rff_features: usize,
    pub cube: CubeOptimizer,
    /// Check the pending-variance inflation bound at a few candidates on
    /// every selection with pending inputs.
    pub verify_variance_ratio: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            sampler: SamplerChoice::Auto,
            exact_limit: 2000,
            rff_features: 1024,
            cube: CubeOptimizer::default(),
            verify_variance_ratio: cfg!(debug_assertions),
        }
    }
}

/// Everything a strategy may look at when choosing the next input.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    /// Model fitted on the observed data only.
    pub model: GpModel,
    pub pending: Points,
    /// Global labels of the pending inputs, increasing.
    pub pending_labels: Vec<u64>,
    /// Index of the selection being made, starting at 1.
    pub t: usize,
    pub capacity_q: usize,
}

impl SchedulerState {
    pub fn new(model: GpModel, capacity_q: usize) -> Self {
        let pending = Points::empty(model.dim());
        SchedulerState {
            model,
            pending,
            pending_labels: Vec::new(),
            t: 1,
            capacity_q,
        }
    }

    pub fn observed(&self) -> &Dataset {
        self.model.data()
    }

    pub fn add_pending(&mut self, x: &[f64], label: u64) -> Result<()> {
        if self.pending_labels.last().is_some_and(|&l| l >= label) {
            return Err(Error::InvalidArgument("pending labels must increase".into()));
        }
        self.pending.push(x)?;
        self.pending_labels.push(label);
        Ok(())
    }

    /// Removes a pending input and returns it.
    pub fn take_pending(&mut self, label: u64) -> Result<Vec<f64>> {
        let i = self
            .pending_labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("label {label} is not pending")))?;
        let x = self.pending.row(i).to_vec();
        let keep: Vec<usize> = (0..self.pending.len()).filter(|&j| j != i).collect();
        self.pending = self.pending.select(&keep);
        self.pending_labels.remove(i);
        Ok(x)
    }

    fn check(&self) -> Result<()> {
        check_dim(self.model.dim(), self.pending.dim())?;
        if self.pending.len() > self.capacity_q {
            return Err(Error::Invariant(format!(
                "{} pending inputs exceed the capacity Q = {}",
                self.pending.len(),
                self.capacity_q
            )));
        }
        Ok(())
    }
}

/// Model conditioned on posterior-mean values at the pending inputs.
pub fn kb_model(state: &SchedulerState) -> Result<Cow<'_, GpModel>> {
    if state.pending.is_empty() {
        return Ok(Cow::Borrowed(&state.model));
    }
    let (mean, _) = state.model.predict(&state.pending)?;
    state.model.condition_fantasy(&state.pending, &mean).map(Cow::Owned)
}

/// Model conditioned on `g(x_i) + ε_i` at the pending inputs, with `g` one
/// joint posterior draw and `ε_i` fresh observation noise.
pub fn rkb_model<'a, R: Rng + ?Sized>(state: &'a SchedulerState, rng: &mut R) -> Result<Cow<'a, GpModel>> {
    if state.pending.is_empty() {
        return Ok(Cow::Borrowed(&state.model));
    }
    let values = rkb_fantasy_values(&state.model, &state.pending, rng)?;
    state.model.condition_fantasy(&state.pending, &values).map(Cow::Owned)
}

pub fn rkb_fantasy_values<R: Rng + ?Sized>(model: &GpModel, pending: &Points, rng: &mut R) -> Result<Vec<f64>> {
    let (mean, cov) = model.posterior_cov(pending)?;
    let mut values = joint_normal_draw(&mean, &cov, rng)?;
    let sd = model.noise_variance().sqrt();
    if sd > 0.0 {
        for v in &mut values {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(values)
}

/// BUCB width multiplier: the pending count over the noise variance, or 1
/// when nothing is pending. With `w` synchronous workers the pending count
/// at selection `t` is `(t − 1) mod w`.
pub fn bucb_multiplier(pending: usize, noise_variance: f64) -> Result<f64> {
    if pending == 0 {
        return Ok(1.0);
    }
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "the BUCB multiplier is undefined for zero noise variance".into(),
        ));
    }
    Ok(pending as f64 / noise_variance)
}

enum Scorer<'a> {
    Ucb {
        model: &'a GpModel,
        beta: f64,
    },
    Ei {
        model: &'a GpModel,
        tau: f64,
    },
    Pims {
        model: &'a GpModel,
        gstar: f64,
    },
    Bucb {
        mean_model: &'a GpModel,
        var_model: &'a GpModel,
        width: f64,
    },
    Variance {
        model: &'a GpModel,
    },
}

impl Scorer<'_> {
    fn score(&self, pts: &Points) -> Result<Vec<f64>> {
        Ok(match *self {
            Scorer::Ucb { model, beta } => {
                let (m, v) = model.predict(pts)?;
                m.iter().zip(&v).map(|(m, v)| ucb_from_moments(*m, *v, beta)).collect()
            }
            Scorer::Ei { model, tau } => {
                let (m, v) = model.predict(pts)?;
                m.iter().zip(&v).map(|(m, v)| ei_from_moments(*m, *v, tau)).collect()
            }
            Scorer::Pims { model, gstar } => {
                let (m, v) = model.predict(pts)?;
                m.iter()
                    .zip(&v)
                    .map(|(m, v)| pims_from_moments(*m, *v, gstar))
                    .collect()
            }
            Scorer::Bucb {
                mean_model,
                var_model,
                width,
            } => {
                let (m, _) = mean_model.predict(pts)?;
                let (_, v) = var_model.predict(pts)?;
                m.iter().zip(&v).map(|(m, v)| ucb_from_moments(*m, *v, width)).collect()
            }
            Scorer::Variance { model } => model.predict(pts)?.1,
        })
    }
}

fn maximize<R: Rng + ?Sized>(
    scorer: &Scorer<'_>,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match space {
        SearchSpace::Grid(grid) => {
            let i = argmax_values(&scorer.score(grid)?)?;
            Ok(grid.row(i).to_vec())
        }
        SearchSpace::UnitCube { dim } => {
            let pool = cfg.cube.pool(*dim, rng);
            Ok(cfg.cube.maximize(&pool, &mut |p| scorer.score(p))?.0)
        }
    }
}

/// Draws a posterior sample path and returns its maximizer and maximum over
/// the search space.
pub fn sample_path_max<R: Rng + ?Sized>(
    model: &GpModel,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    let exact = match (cfg.sampler, space) {
        (SamplerChoice::Exact, SearchSpace::Grid(_)) => true,
        (SamplerChoice::Auto, SearchSpace::Grid(g)) => g.len() <= cfg.exact_limit,
        (SamplerChoice::Exact, SearchSpace::UnitCube { .. }) => {
            return Err(Error::Unsupported(
                "exact sample paths need a finite candidate grid".into(),
            ))
        }
        _ => false,
    };
    let sample: PosteriorSample = match space {
        SearchSpace::Grid(grid) if exact => sample_path_discrete(model, grid, rng)?,
        _ => {
            let fmap = build_feature_map(model.spec(), cfg.rff_features, rng)?;
            sample_path_rff(model, &fmap, rng)?
        }
    };
    match space {
        SearchSpace::Grid(grid) => {
            let values = sample.evaluate(grid)?;
            let i = argmax_values(&values)?;
            Ok((grid.row(i).to_vec(), values[i]))
        }
        SearchSpace::UnitCube { dim } => {
            let pool = cfg.cube.pool(*dim, rng);
            cfg.cube.maximize(&pool, &mut |p| sample.evaluate(p))
        }
    }
}

fn select_base<R: Rng + ?Sized>(
    model: &GpModel,
    base: &BaseAcquisition,
    t: usize,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let scorer = match base {
        BaseAcquisition::Ucb(schedule) => Scorer::Ucb {
            model,
            beta: schedule.value(t, rng),
        },
        BaseAcquisition::Ei => {
            let ys = model.data().outputs();
            let tau = if ys.is_empty() {
                0.0
            } else {
                ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            Scorer::Ei { model, tau }
        }
        BaseAcquisition::Pims => Scorer::Pims {
            model,
            gstar: sample_path_max(model, space, cfg, rng)?.1,
        },
    };
    maximize(&scorer, space, cfg, rng)
}

fn verify_ratio(state: &SchedulerState, full: &GpModel, space: &SearchSpace, cfg: &SelectionConfig) -> Result<()> {
    let noise = state.model.noise_variance();
    if !cfg.verify_variance_ratio || state.pending.is_empty() || !(noise > 0.0) {
        return Ok(());
    }
    // a dedicated generator keeps the check from perturbing the selection stream
    let mut probe = ChaCha8Rng::seed_from_u64(state.t as u64);
    let pts = match space {
        SearchSpace::Grid(g) => {
            let idx: Vec<usize> = (0..8).map(|_| probe.random_range(0..g.len())).collect();
            g.select(&idx)
        }
        SearchSpace::UnitCube { dim } => {
            Points::from_flat(*dim, (0..8 * dim).map(|_| probe.random::<f64>()).collect())?
        }
    };
    let (_, v0) = state.model.predict(&pts)?;
    let (_, v1) = full.predict(&pts)?;
    for ((a, b), x) in v0.iter().zip(&v1).zip(pts.rows()) {
        // C_Q assumes k(x, x) ≤ 1; rescaling f gives (Q k(x, x) + σ²)/σ²
        let kxx = state.model.spec().diag(x).max(1.0);
        let bound = c_q(state.pending.len(), noise / kxx) + 1e-6;
        if *b > 0.0 && a / b > bound {
            return Err(Error::Invariant(format!(
                "variance ratio {} exceeds the bound {bound}",
                a / b
            )));
        }
    }
    Ok(())
}

/// Chooses the next input for `strategy`.
pub fn select<R: Rng + ?Sized>(
    strategy: &Strategy,
    state: &SchedulerState,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    state.check()?;
    check_dim(state.model.dim(), space.dim())?;
    match strategy {
        Strategy::Plain(base) => select_base(&state.model, base, state.t, space, cfg, rng),
        Strategy::Rkb(base) => select_rkb(state, base, space, cfg, rng),
        Strategy::Kb(base) => select_kb(state, base, space, cfg, rng),
        Strategy::Bucb(schedule) => select_bucb(state, schedule, space, cfg, rng),
        Strategy::Pts => select_pts(state, space, cfg, rng),
        Strategy::Us => select_us(state, space, cfg, rng),
        Strategy::Rs => select_rs(space, rng),
    }
}

pub fn select_rkb<R: Rng + ?Sized>(
    state: &SchedulerState,
    base: &BaseAcquisition,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let model = rkb_model(state, rng)?;
    verify_ratio(state, &model, space, cfg)?;
    select_base(&model, base, state.t, space, cfg, rng)
}

pub fn select_kb<R: Rng + ?Sized>(
    state: &SchedulerState,
    base: &BaseAcquisition,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let model = kb_model(state)?;
    verify_ratio(state, &model, space, cfg)?;
    select_base(&model, base, state.t, space, cfg, rng)
}

pub fn select_bucb<R: Rng + ?Sized>(
    state: &SchedulerState,
    schedule: &BetaSchedule,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let beta = schedule.value(state.t, rng);
    let mult = bucb_multiplier(state.pending.len(), state.model.noise_variance())?;
    let var_model = kb_model(state)?;
    let scorer = Scorer::Bucb {
        mean_model: &state.model,
        var_model: &var_model,
        width: beta * mult,
    };
    maximize(&scorer, space, cfg, rng)
}

/// Maximizer of an independent posterior sample; pending inputs are ignored.
pub fn select_pts<R: Rng + ?Sized>(
    state: &SchedulerState,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(sample_path_max(&state.model, space, cfg, rng)?.0)
}

/// Largest posterior variance after conditioning on the pending inputs.
pub fn select_us<R: Rng + ?Sized>(
    state: &SchedulerState,
    space: &SearchSpace,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let model = kb_model(state)?;
    maximize(&Scorer::Variance { model: &model }, space, cfg, rng)
}

pub fn select_rs<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Result<Vec<f64>> {
    match space {
        SearchSpace::Grid(grid) => {
            if grid.is_empty() {
                return Err(Error::InvalidArgument("no candidates".into()));
            }
            Ok(grid.row(rng.random_range(0..grid.len())).to_vec())
        }
        SearchSpace::UnitCube { dim } => Ok((0..*dim).map(|_| rng.random::<f64>()).collect()),
    }
}
