//! `hjlab`: batch runner for the branching-population experiments.
//!
//! Exit codes: 0 success, 1 invalid input or failed verification, 2 assumption
//! failure, 3 numerical diagnostic, 4 I/O.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AssumptionFailure, Ctx, NumericalFailure};
use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(
    name = "hjlab",
    version,
    about = "Stochastic trait-structured populations and their Hamilton-Jacobi limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Override `run.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "HJLAB_WORKERS")]
    workers: Option<usize>,
    /// Run even when required assumptions fail.
    #[arg(long)]
    force: bool,
    /// Recompute and compare with the files already on disk instead of writing.
    #[arg(long)]
    verify: bool,
    /// Output directory (default: `output.dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify the model assumptions for the declared regime.
    Check(Common),
    /// Run a stochastic ensemble and write moment estimates.
    Simulate(Common),
    /// Integrate the mean, exponent and second-moment systems.
    Mean(Common),
    /// Solve the Hamilton-Jacobi equation with cross-validated schemes.
    Hj(Common),
    /// Compare simulations with their deterministic limits.
    Compare(Common),
    /// Run a ln K ladder, one durable file per cell.
    Sweep(Common),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<AssumptionFailure>() {
            return 2;
        }
        if cause.is::<NumericalFailure>() {
            return 3;
        }
        if cause.is::<std::io::Error>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<hjlab::Error>() {
            return match e {
                hjlab::Error::MeshCondition { .. }
                | hjlab::Error::UnboundedKernelTail(_)
                | hjlab::Error::Regime(_)
                | hjlab::Error::UndecidedCompact { .. } => 2,
                e if e.is_numerical() => 3,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    let (common, f): (Common, fn(&Ctx) -> anyhow::Result<Vec<PathBuf>>) = match cli.command {
        Command::Check(c) => (c, commands::check),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Mean(c) => (c, commands::mean),
        Command::Hj(c) => (c, commands::hj),
        Command::Compare(c) => (c, commands::compare),
        Command::Sweep(c) => (c, commands::sweep),
    };
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.run.base_seed = seed;
    }
    let ctx = Ctx::new(cfg, common.out, common.force, common.verify);
    f(&ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let verify = matches!(
        &cli.command,
        Command::Check(c) | Command::Simulate(c) | Command::Mean(c) | Command::Hj(c) | Command::Compare(c) | Command::Sweep(c)
            if c.verify
    );
    match run(cli) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            if verify {
                eprintln!("verified: outputs match");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
