//! Parallel Bayesian optimization on an exact Gaussian-process core.
//!
//! The central strategy is the randomized kriging believer: when some queries
//! are still being evaluated, the model is conditioned on the values of one
//! posterior sample path at those inputs (plus fresh observation noise) before
//! the base acquisition function picks the next query.

// NaN-rejecting checks are written as `!(x >= 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod diagnostics;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod normal;
pub mod objectives;
pub mod points;
pub mod sampling;
pub mod scheduler;

pub use acquisition::BetaSchedule;
pub use diagnostics::{ConditionConstants, ConditionMethod, RegretRecord, SummaryRow};
pub use error::{Error, Result};
pub use gp::{Dataset, GpModel, HyperSearchConfig};
pub use harness::ExperimentConfig;
pub use kernel::{KernelFamily, KernelSpec};
pub use objectives::{Benchmark, Objective, SearchSpace};
pub use points::Points;
pub use sampling::PosteriorSample;
pub use scheduler::{BaseAcquisition, SchedulerState, SelectionConfig, Strategy, Trace};
