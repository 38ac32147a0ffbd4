//! Experiment configuration, initial designs, seeding, and orchestration.

mod output;

pub use output::{read_summary, summarize, write_summary, write_trace, SUMMARY_HEADER};

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::BetaSchedule;
use crate::error::{Error, Result};
use crate::gp::HyperSearchConfig;
use crate::kernel::KernelSpec;
use crate::objectives::{
    load_tabular, regular_grid, synthetic_gp_with, unit_levels, Benchmark, Objective, SyntheticMethod,
};
use crate::points::{fnv1a_bytes, Points, FNV_OFFSET};
use crate::scheduler::{
    run_asynchronous, run_synchronous, DurationModel, KernelPolicy, LoopConfig, SelectionConfig, Strategy, Trace,
    TrialSeeds,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    /// A fresh draw from the GP prior on `{1/levels, …, 1}^dim` per trial.
    Synthetic {
        kernel: KernelSpec,
        levels: usize,
        dim: usize,
        #[serde(default = "auto_method")]
        method: SyntheticMethod,
    },
    Benchmark {
        name: String,
    },
    Tabular {
        path: PathBuf,
    },
}

fn auto_method() -> SyntheticMethod {
    SyntheticMethod::Auto
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaConfig {
    /// `2 ln(|X| t²/√(2π))`; needs a grid.
    Theoretical,
    /// `0.2 d ln(2t)`.
    Heuristic,
    /// `2 ln(|X|/2)` plus an exponential with mean 2; needs a grid.
    Irgp,
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Synchronous,
    Asynchronous,
}

/// Model used by the optimizer. Defaults to the true kernel for synthetic
/// objectives and to marginal-likelihood fitting every 8 selections otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Fixed {
        kernel: KernelSpec,
    },
    Fit {
        #[serde(default)]
        initial_lengthscale: Option<f64>,
        #[serde(default = "default_refit")]
        refit_every: usize,
        #[serde(default)]
        search: HyperSearchConfig,
    },
}

fn default_refit() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    /// Noise variance assumed by the model.
    pub noise_variance: f64,
    /// Noise variance of simulated observations; defaults to `noise_variance`.
    #[serde(default)]
    pub observation_noise: Option<f64>,
    /// Defaults to true except for synthetic objectives.
    #[serde(default)]
    pub standardize: Option<bool>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub batches: usize,
    pub init_points: usize,
    pub methods: Vec<String>,
    #[serde(default)]
    pub beta: Option<BetaConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub durations: DurationModel,
    #[serde(default)]
    pub selection: SelectionConfig,
    /// Worker threads for running trials; `PARBO_THREADS` caps it.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_workers() -> usize {
    8
}

fn default_trials() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("parbo-out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.workers < 1 {
            return bad("workers must be at least 1");
        }
        if self.trials < 1 {
            return bad("trials must be at least 1");
        }
        if self.batches < 1 {
            return bad("batches must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty");
        }
        if !(self.noise_variance >= 0.0) || !(self.observation_noise.unwrap_or(0.0) >= 0.0) {
            return bad("noise variances must be nonnegative");
        }
        let mut names: Vec<String> = self.methods.iter().map(|m| m.to_ascii_uppercase()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("methods must be distinct");
        }
        let beta = BetaSchedule::Fixed { value: 1.0 };
        for m in &self.methods {
            Strategy::parse(m, beta)?;
        }
        if let ObjectiveConfig::Synthetic {
            kernel, levels, dim, ..
        } = &self.objective
        {
            kernel.validate()?;
            if *levels < 1 || *dim < 1 || kernel.dim() != *dim {
                return bad("synthetic objective needs levels ≥ 1 and a kernel of matching dimension");
            }
        }
        if let ObjectiveConfig::Benchmark { name } = &self.objective {
            Benchmark::from_name(name)?;
        }
        Ok(())
    }
}

/// Latin hypercube design: in every column each of the `n` equal strata of
/// `[0, 1)` holds exactly one point.
pub fn lhs<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Points {
    let mut data = vec![0.0; n * d];
    for j in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for (i, &stratum) in perm.iter().enumerate() {
            data[i * d + j] = (stratum as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    Points::from_flat(d, data).expect("n·d values")
}

/// Index of the nearest grid point (Euclidean, lowest index on ties) for
/// each point.
pub fn nearest_grid(points: &Points, grid: &Points) -> Result<Vec<usize>> {
    crate::points::check_dim(grid.dim(), points.dim())?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    Ok(points
        .rows()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (i, g) in grid.rows().enumerate() {
                let d2: f64 = p.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best.1 {
                    best = (i, d2);
                }
            }
            best.0
        })
        .collect())
}

/// Seed of the objective draw, initial design and observation noise. It
/// depends on the trial only, so all methods see the same problems.
pub fn problem_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}

/// Seed of a method's own randomness, stable under reordering or adding
/// methods.
pub fn method_seed(base_seed: u64, method: &str, trial: usize) -> u64 {
    let h = fnv1a_bytes(FNV_OFFSET, method.to_ascii_uppercase().as_bytes());
    base_seed ^ fnv1a_bytes(h, &(trial as u64).to_le_bytes())
}

const OBJECTIVE_STREAM: u64 = 10;
const INIT_STREAM: u64 = 11;

/// A prepared trial problem shared by every method.
pub struct Problem {
    pub objective: Objective,
    pub init: Points,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn build_problem(cfg: &ExperimentConfig, tabular: Option<&Objective>, trial: usize) -> Result<Problem> {
    let seed = problem_seed(cfg.base_seed, trial);
    let objective = match &cfg.objective {
        ObjectiveConfig::Synthetic {
            kernel,
            levels,
            dim,
            method,
        } => {
            let grid = regular_grid(&unit_levels(*levels), *dim);
            synthetic_gp_with(kernel, &grid, *method, &mut rng_for(seed, OBJECTIVE_STREAM))?
        }
        ObjectiveConfig::Benchmark { name } => Objective::analytic(Benchmark::from_name(name)?),
        ObjectiveConfig::Tabular { path } => match tabular {
            Some(o) => o.clone(),
            None => load_tabular(path)?,
        },
    };
    let design = lhs(cfg.init_points, objective.dim(), &mut rng_for(seed, INIT_STREAM));
    let init = match objective.grid() {
        Some((grid, _)) => grid.select(&nearest_grid(&design, grid)?),
        None => design,
    };
    Ok(Problem { objective, init })
}

fn beta_schedule(cfg: &ExperimentConfig, objective: &Objective) -> Result<BetaSchedule> {
    let size = objective.grid().map(|(g, _)| g.len());
    let need = |what: &str| Error::Config(format!("{what} β needs a finite grid objective"));
    Ok(match cfg.beta {
        Some(BetaConfig::Theoretical) => BetaSchedule::TheoreticalFinite {
            domain_size: size.ok_or_else(|| need("theoretical"))?,
        },
        Some(BetaConfig::Irgp) => BetaSchedule::IrgpRandom {
            domain_size: size.ok_or_else(|| need("IRGP"))?,
        },
        Some(BetaConfig::Heuristic) => BetaSchedule::Heuristic { dim: objective.dim() },
        Some(BetaConfig::Fixed { value }) => BetaSchedule::Fixed { value },
        None => match size {
            Some(n) => BetaSchedule::TheoreticalFinite { domain_size: n },
            None => BetaSchedule::Heuristic { dim: objective.dim() },
        },
    })
}

pub fn loop_config(cfg: &ExperimentConfig, objective: &Objective) -> Result<LoopConfig> {
    let dim = objective.dim();
    let synthetic_kernel = match &cfg.objective {
        ObjectiveConfig::Synthetic { kernel, .. } => Some(kernel.clone()),
        _ => None,
    };
    let model = match (&cfg.model, synthetic_kernel.clone()) {
        (Some(m), _) => m.clone(),
        (None, Some(kernel)) => ModelConfig::Fixed { kernel },
        (None, None) => ModelConfig::Fit {
            initial_lengthscale: None,
            refit_every: default_refit(),
            search: HyperSearchConfig::default(),
        },
    };
    let kernel = match model {
        ModelConfig::Fixed { kernel } => KernelPolicy::Fixed { spec: kernel },
        ModelConfig::Fit {
            initial_lengthscale,
            refit_every,
            search,
        } => KernelPolicy::Fit {
            initial: KernelSpec::gaussian_iso(dim, initial_lengthscale.unwrap_or(0.2), 1.0)?,
            search,
            refit_every,
        },
    };
    Ok(LoopConfig {
        model_noise: cfg.noise_variance,
        observation_noise: cfg.observation_noise.unwrap_or(cfg.noise_variance),
        kernel,
        standardize: cfg.standardize.unwrap_or(synthetic_kernel.is_none()),
        selection: cfg.selection.clone(),
    })
}

/// Runs one (method, trial) pair.
pub fn run_trial(cfg: &ExperimentConfig, method: &str, problem: &Problem, trial: usize) -> Result<Trace> {
    let wrap = |e: Error| Error::Trial {
        method: method.to_string(),
        trial,
        source: Box::new(e),
    };
    let run = || -> Result<Trace> {
        let strategy = Strategy::parse(method, beta_schedule(cfg, &problem.objective)?)?;
        let lc = loop_config(cfg, &problem.objective)?;
        let seeds = TrialSeeds {
            algorithm: method_seed(cfg.base_seed, method, trial),
            noise: problem_seed(cfg.base_seed, trial),
        };
        let mut trace = match cfg.mode {
            Mode::Synchronous => run_synchronous(
                &strategy,
                &problem.objective,
                cfg.workers,
                cfg.batches,
                &problem.init,
                &lc,
                seeds,
            )?,
            Mode::Asynchronous => run_asynchronous(
                &strategy,
                &problem.objective,
                cfg.workers,
                cfg.workers * cfg.batches,
                cfg.durations,
                &problem.init,
                &lc,
                seeds,
            )?,
        };
        trace.method = method.to_string();
        Ok(trace)
    };
    run().map_err(wrap)
}

/// Traces of successful trials sorted by (method, trial), plus failures.
#[derive(Debug)]
pub struct ExperimentResult {
    pub traces: Vec<(usize, Trace)>,
    pub failures: Vec<Error>,
}

fn thread_count(cfg: &ExperimentConfig) -> usize {
    let env = std::env::var("PARBO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let want = cfg.threads.unwrap_or(avail);
    env.map_or(want, |cap| want.min(cap)).max(1)
}

/// Runs every (method, trial) pair. Output order does not depend on thread
/// scheduling.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let tabular = match &cfg.objective {
        ObjectiveConfig::Tabular { path } => Some(load_tabular(path)?),
        _ => None,
    };
    let mut methods: Vec<&String> = cfg.methods.iter().collect();
    methods.sort();
    let jobs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<Trace>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, trial)| {
                let problem = build_problem(cfg, tabular.as_ref(), trial).map_err(|e| Error::Trial {
                    method: methods[m].clone(),
                    trial,
                    source: Box::new(e),
                })?;
                run_trial(cfg, methods[m], &problem, trial)
            })
            .collect()
    });
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for ((_, trial), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(t) => traces.push((trial, t)),
            Err(e) => failures.push(e),
        }
    }
    Ok(ExperimentResult { traces, failures })
}

/// Runs the experiment and writes `trace.csv` and `summary.csv` to the
/// configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = run_trials(cfg)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let trace_path = cfg.output.join("trace.csv");
    write_trace(&trace_path, &result.traces)?;
    let summary = summarize(&result.traces)?;
    write_summary(&cfg.output.join("summary.csv"), &summary)?;
    Ok(result)
}
