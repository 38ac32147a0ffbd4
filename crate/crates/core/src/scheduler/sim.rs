//! Simulated worker pools: synchronous batches and an event-driven
//! asynchronous loop.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{select, SchedulerState, SelectionConfig, Strategy};
use crate::diagnostics::RegretRecord;
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, Dataset, GpModel, HyperSearchConfig};
use crate::kernel::KernelSpec;
use crate::objectives::{Objective, SearchSpace};
use crate::points::Points;

const SELECT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const DURATION_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelPolicy {
    Fixed {
        spec: KernelSpec,
    },
    /// Marginal-likelihood refits every `refit_every` observed selections.
    /// `initial` is used until two observations exist and seeds each search.
    Fit {
        initial: KernelSpec,
        #[serde(default)]
        search: HyperSearchConfig,
        refit_every: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    /// Noise variance assumed by the model.
    pub model_noise: f64,
    /// Noise variance of the simulated observations.
    pub observation_noise: f64,
    pub kernel: KernelPolicy,
    /// Fit the model to outputs shifted and scaled to zero mean, unit
    /// variance. The model noise is then in standardized units.
    pub standardize: bool,
    pub selection: SelectionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationModel {
    Exponential { mean: f64 },
    Constant { value: f64 },
}

impl Default for DurationModel {
    fn default() -> Self {
        DurationModel::Exponential { mean: 1.0 }
    }
}

impl DurationModel {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            DurationModel::Exponential { mean } if mean > 0.0 => {
                let e = rand_distr::Exp::new(1.0 / mean).expect("positive rate");
                Ok(rng.sample(e))
            }
            DurationModel::Constant { value } if value > 0.0 => Ok(value),
            other => Err(Error::InvalidArgument(format!(
                "{other:?} does not give positive durations"
            ))),
        }
    }
}

/// Seeds of the independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    /// Selection randomness and job durations.
    pub algorithm: u64,
    /// Observation noise; sharing it across methods gives common random numbers.
    pub noise: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: String,
    pub dim: usize,
    pub n_init: usize,
    pub workers: usize,
    pub known_optimum: Option<f64>,
    pub records: Vec<RegretRecord>,
    /// Largest number of pending inputs seen by any selection.
    pub max_pending: usize,
}

impl Trace {
    pub fn selections(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.x.clone()).collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Engine<'a> {
    strategy: &'a Strategy,
    objective: &'a Objective,
    space: SearchSpace,
    cfg: &'a LoopConfig,
    raw: Dataset,
    spec: KernelSpec,
    refits: usize,
    /// Observed selections, in multiples of the refit cadence, at the last refit.
    refit_mark: usize,
    state: SchedulerState,
    select_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    algorithm_seed: u64,
    n_init: usize,
    xs: Vec<Vec<f64>>,
    ys: Vec<Option<f64>>,
    max_pending: usize,
}

impl<'a> Engine<'a> {
    fn new(
        strategy: &'a Strategy,
        objective: &'a Objective,
        init: &Points,
        workers: usize,
        cfg: &'a LoopConfig,
        seeds: TrialSeeds,
    ) -> Result<Self> {
        if workers < 1 {
            return Err(Error::InvalidArgument("at least one worker is needed".into()));
        }
        let dim = objective.dim();
        crate::points::check_dim(dim, init.dim())?;
        let mut noise_rng = stream(seeds.noise, NOISE_STREAM);
        let mut raw = Dataset::empty(dim);
        for (i, x) in init.rows().enumerate() {
            let y = objective.observe(x, cfg.observation_noise, &mut noise_rng)?;
            raw.push(x, y, i as u64 + 1)?;
        }
        let spec = match &cfg.kernel {
            KernelPolicy::Fixed { spec } | KernelPolicy::Fit { initial: spec, .. } => spec.clone(),
        };
        crate::points::check_dim(dim, spec.dim())?;
        let model = GpModel::fit(&spec, cfg.model_noise, Dataset::empty(dim))?;
        let mut engine = Engine {
            strategy,
            objective,
            space: objective.search_space(),
            cfg,
            raw,
            spec,
            refits: 0,
            refit_mark: 0,
            state: SchedulerState::new(model, workers - 1),
            select_rng: stream(seeds.algorithm, SELECT_STREAM),
            noise_rng,
            algorithm_seed: seeds.algorithm,
            n_init: init.len(),
            xs: Vec::new(),
            ys: Vec::new(),
            max_pending: 0,
        };
        if matches!(cfg.kernel, KernelPolicy::Fit { .. }) && engine.raw.len() >= 2 {
            engine.refit()?;
        }
        engine.rebuild_model()?;
        Ok(engine)
    }

    fn model_data(&self) -> Result<Dataset> {
        if !self.cfg.standardize || self.raw.is_empty() {
            return Ok(self.raw.clone());
        }
        let ys = self.raw.outputs();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 1e-12 { sd } else { 1.0 };
        self.raw.with_outputs(ys.iter().map(|y| (y - mean) / sd).collect())
    }

    fn refit(&mut self) -> Result<()> {
        let KernelPolicy::Fit { search, .. } = &self.cfg.kernel else {
            return Ok(());
        };
        let mut search = search.clone();
        search.noise_variance = self.cfg.model_noise;
        search.seed ^= self
            .algorithm_seed
            .wrapping_add((self.refits as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        search.initial.insert(0, self.spec.clone());
        self.spec = fit_hyperparameters(&self.model_data()?, &search)?;
        self.refits += 1;
        Ok(())
    }

    /// Refits if the cadence fires, then refactorizes on the observed data.
    fn rebuild(&mut self) -> Result<()> {
        if let KernelPolicy::Fit { refit_every, .. } = self.cfg.kernel {
            let observed = self.raw.len() - self.n_init;
            if refit_every > 0 && observed / refit_every > self.refit_mark && self.raw.len() >= 2 {
                self.refit_mark = observed / refit_every;
                self.refit()?;
            }
        }
        self.rebuild_model()
    }

    fn rebuild_model(&mut self) -> Result<()> {
        self.state.model = GpModel::fit(&self.spec, self.cfg.model_noise, self.model_data()?)?;
        Ok(())
    }

    fn select_next(&mut self) -> Result<u64> {
        let t = self.xs.len() + 1;
        self.state.t = t;
        self.max_pending = self.max_pending.max(self.state.pending.len());
        let x = select(
            self.strategy,
            &self.state,
            &self.space,
            &self.cfg.selection,
            &mut self.select_rng,
        )?;
        let label = (self.n_init + t) as u64;
        self.state.add_pending(&x, label)?;
        self.xs.push(x);
        self.ys.push(None);
        Ok(label)
    }

    fn observe(&mut self, label: u64) -> Result<()> {
        let x = self.state.take_pending(label)?;
        let y = self
            .objective
            .observe(&x, self.cfg.observation_noise, &mut self.noise_rng)?;
        self.raw.insert_sorted(&x, y, label)?;
        self.ys[label as usize - self.n_init - 1] = Some(y);
        Ok(())
    }

    fn finish(self, workers: usize) -> Result<Trace> {
        let mut best = f64::NEG_INFINITY;
        for x in self.raw.inputs().rows().take(self.n_init) {
            best = best.max(self.objective.value(x)?);
        }
        let f_star = self.objective.known_optimum;
        let mut records = Vec::with_capacity(self.xs.len());
        for (i, (x, y)) in self.xs.into_iter().zip(self.ys).enumerate() {
            let t = i + 1;
            best = best.max(self.objective.value(&x)?);
            records.push(RegretRecord {
                t,
                batch: (t - 1) / workers + 1,
                x,
                y: y.ok_or_else(|| Error::Invariant(format!("selection {t} was never observed")))?,
                best_so_far: best,
                simple_regret: f_star.map(|f| (f - best).max(0.0)),
            });
        }
        Ok(Trace {
            method: self.strategy.name(),
            dim: self.objective.dim(),
            n_init: self.n_init,
            workers,
            known_optimum: f_star,
            records,
            max_pending: self.max_pending,
        })
    }
}

/// `batches` rounds in which every worker receives one input and all of
/// them are observed together at the end of the round.
pub fn run_synchronous(
    strategy: &Strategy,
    objective: &Objective,
    workers: usize,
    batches: usize,
    init: &Points,
    cfg: &LoopConfig,
    seeds: TrialSeeds,
) -> Result<Trace> {
    if batches < 1 {
        return Err(Error::InvalidArgument("at least one batch is needed".into()));
    }
    let mut engine = Engine::new(strategy, objective, init, workers, cfg, seeds)?;
    for _ in 0..batches {
        let labels = (0..workers).map(|_| engine.select_next()).collect::<Result<Vec<_>>>()?;
        for label in labels {
            engine.observe(label)?;
        }
        engine.rebuild()?;
    }
    engine.finish(workers)
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    worker: usize,
    label: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.worker.cmp(&other.worker))
    }
}

/// Event-driven loop: whenever jobs finish, their workers are refilled in
/// worker-id order from the updated state. Jobs finishing at the same instant
/// are absorbed together. Stops after `horizon` selections have been
/// observed.
#[allow(clippy::too_many_arguments)]
pub fn run_asynchronous(
    strategy: &Strategy,
    objective: &Objective,
    workers: usize,
    horizon: usize,
    durations: DurationModel,
    init: &Points,
    cfg: &LoopConfig,
    seeds: TrialSeeds,
) -> Result<Trace> {
    if horizon < 1 {
        return Err(Error::InvalidArgument("the horizon must be at least 1".into()));
    }
    let mut engine = Engine::new(strategy, objective, init, workers, cfg, seeds)?;
    let mut duration_rng = stream(seeds.algorithm, DURATION_STREAM);
    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    let mut free: Vec<usize> = (0..workers).collect();
    let mut issued = 0;
    let mut now = 0.0;
    loop {
        for worker in free.drain(..) {
            if issued == horizon {
                break;
            }
            let label = engine.select_next()?;
            issued += 1;
            heap.push(Reverse(Event {
                time: now + durations.draw(&mut duration_rng)?,
                worker,
                label,
            }));
        }
        let Some(Reverse(first)) = heap.pop() else {
            break;
        };
        now = first.time;
        let mut done = vec![first];
        while heap.peek().is_some_and(|Reverse(e)| e.time == now) {
            done.push(heap.pop().expect("peeked").0);
        }
        for event in &done {
            engine.observe(event.label)?;
            free.push(event.worker);
        }
        free.sort_unstable();
        engine.rebuild()?;
    }
    engine.finish(workers)
}
