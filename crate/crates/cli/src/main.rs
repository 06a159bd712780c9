//! Command-line front end for the spillover connectedness pipeline.
//!
//! Subcommands: estimate (one panel, one report), rolling (sliding-window
//! connectedness paths), simulate (Monte Carlo study and population tables),
//! bootstrap-check (bias correction and quantile bands for one fit).
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
//! Every run writes a manifest.json that suffices to rerun it bit-identically
//! via --from-manifest.

mod bands;
mod boot;
mod bootstrap_check;
mod estimate;
mod fileconf;
mod input;
mod manifest;
mod model;
mod rolling;
mod simulate;
mod svg;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "spillover",
    version,
    about = "Frequency-band connectedness measures for multivariate time series"
)]
struct Cli {
    /// Cap worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a static connectedness report for one panel.
    Estimate(estimate::EstimateArgs),
    /// Slide a fixed-length window over a panel and emit measure paths.
    Rolling(rolling::RollingArgs),
    /// Run the bivariate Monte Carlo study or its population table.
    Simulate(simulate::SimulateArgs),
    /// Bootstrap bias correction and quantile bands for a single fit.
    BootstrapCheck(bootstrap_check::BootstrapCheckArgs),
}

/// Error plus the exit code it maps to. Validation and configuration
/// problems exit 2; numerical failures inside the pipeline exit 3.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            error: anyhow::anyhow!(message.into()),
        }
    }
}

impl From<spillover::Error> for CliError {
    fn from(e: spillover::Error) -> Self {
        Self {
            code: if e.is_validation() { 2 } else { 3 },
            error: e.into(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self {
            code: 2,
            error: e.into(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            std::process::exit(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("the global thread pool is only configured here");
    }
    let result = match cli.command {
        Command::Estimate(args) => estimate::run(args),
        Command::Rolling(args) => rolling::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::BootstrapCheck(args) => bootstrap_check::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {:#}", e.error);
        std::process::exit(e.code);
    }
}
