//! `opo`: simulation runs, parameter sweeps and analytic comparisons for the
//! below-threshold optical parametric oscillator.
//!
//! Exit codes: 0 on success, 1 on I/O failures, 2 on invalid input, 3 when a
//! run is unreliable because too many trajectories diverged (the report is
//! still written).

mod compare;
mod config;
mod output;
mod run;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::SpecArgs;

#[derive(Debug, Parser)]
#[command(name = "opo", version, about = "Positive-P simulations of a nondegenerate OPO below threshold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one parameter point; writes report.json and running_cs.csv.
    Run(SpecArgs),
    /// Evaluate the Cauchy-Schwarz test along a gamma_r or mu axis; writes sweep.csv.
    Sweep(sweep::SweepArgs),
    /// Monte Carlo moments against the analytic predictions; writes compare.csv.
    Compare(SpecArgs),
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Unreliable(String),
    Io(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Input(_) => 2,
            Failure::Unreliable(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(msg) => write!(f, "invalid input: {msg}"),
            Failure::Unreliable(msg) => write!(f, "unreliable run: {msg}"),
            Failure::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<opo_core::Error> for Failure {
    fn from(e: opo_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn configure_workers() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("OPO_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("OPO_WORKERS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Io(anyhow::anyhow!("cannot start {n} workers: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn,opo_core::analytic=error"),
    )
    .init();
    let cli = Cli::parse();
    let outcome = configure_workers().and_then(|()| match &cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Sweep(args) => sweep::cmd_sweep(args),
        Command::Compare(args) => compare::cmd_compare(args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
