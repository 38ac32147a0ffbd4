use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use parbo::diagnostics::{bcr_bound, c_q, greedy_mig, rkb_bcr_bound, selftest, ConditionConstants, ConditionMethod};
use parbo::harness::run_experiment;
use parbo::objectives::{regular_grid, unit_levels};
use parbo::{ExperimentConfig, KernelSpec};

#[derive(Parser)]
#[command(
    name = "parbo",
    version,
    about = "Parallel Bayesian optimization experiments and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Check the numerical invariants of the GP and bound computations.
    Selftest,
    /// Greedy information gain on a regular grid and the resulting regret bound.
    Mig(MigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    Matern,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ucb,
    IrgpUcb,
    Pims,
    Eims,
    Ts,
}

#[derive(clap::Args)]
struct MigArgs {
    /// Horizon T.
    #[arg(long = "T", short = 'T')]
    t: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: Family,
    #[arg(long, default_value_t = 1.0)]
    lengthscale: f64,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Matérn smoothness (0.5, 1.5 or 2.5).
    #[arg(long, default_value_t = 2.5)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Grid levels per axis; the grid is {1/k, …, 1}^dim.
    #[arg(long, default_value_t = 1)]
    levels: usize,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Algorithm whose constants enter the bound.
    #[arg(long, value_enum, default_value = "pims")]
    method: Method,
    /// Maximum number of pending queries; adds the believer term when > 0.
    #[arg(long, default_value_t = 0)]
    q: usize,
}

fn mig(args: &MigArgs) -> Result<()> {
    let spec = match args.kernel {
        Family::Gaussian => KernelSpec::gaussian_iso(args.dim, args.lengthscale, args.variance)?,
        Family::Matern => KernelSpec::matern(args.nu, vec![args.lengthscale; args.dim], args.variance)?,
        Family::Linear => KernelSpec::linear(args.dim, args.variance)?,
    };
    let grid = regular_grid(&unit_levels(args.levels), args.dim);
    let gamma = greedy_mig(&spec, &grid, args.t, args.noise)?;
    let method = match args.method {
        Method::Ucb => ConditionMethod::Ucb,
        Method::IrgpUcb => ConditionMethod::IrgpUcb,
        Method::Pims => ConditionMethod::Pims,
        Method::Eims => ConditionMethod::Eims,
        Method::Ts => ConditionMethod::Ts,
    };
    let constants = ConditionConstants::new(method, grid.len(), args.noise)?;
    println!("greedy_mig {gamma}");
    println!("bcr_bound {}", bcr_bound(gamma, &constants, args.t.max(1), args.noise)?);
    if args.q > 0 {
        println!("c_q {}", c_q(args.q, args.noise));
        println!(
            "rkb_bcr_bound {}",
            rkb_bcr_bound(gamma, &constants, args.t.max(1), args.q, args.noise)?
        );
    }
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, trials: Option<usize>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("cannot load {}", config.display()))?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(o) = out {
        cfg.output = o;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    for e in &result.failures {
        eprintln!("failed: {e}");
    }
    println!(
        "{} traces written to {}",
        result.traces.len(),
        cfg.output.join("trace.csv").display()
    );
    Ok(result.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            trials,
        } => run(&config, seed, out, trials),
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Mig(args) => {
            if args.t < 1 {
                Err(anyhow::anyhow!("--T must be at least 1"))
            } else {
                mig(&args).map(|_| true)
            }
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
