//! `gil`: generate spring datasets, train with or without rewiring, analyze
//! interaction strengths and aggregate runs into a table.

mod analyze;
mod generate;
mod manifest;
mod report;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status for invalid input (bad flags, missing or unreadable files).
pub const EXIT_USAGE: u8 = 2;
/// Exit status for numeric failures (non-finite loss, divergence).
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gil_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                gil_core::Error::Numeric(_)
                | gil_core::Error::Diverged(_)
                | gil_core::Error::SingularSeparation(..),
            ) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "gil", version, about = "Multi-order interaction analysis and graph rewiring")]
struct Cli {
    /// Worker threads for estimators and data generation (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a spring system and write a JSON-lines dataset.
    Generate(generate::GenerateArgs),
    /// Train a model, optionally with rewiring.
    Train(Box<train::TrainArgs>),
    /// Strength profiles of a trained checkpoint and of its initialization.
    Analyze(analyze::AnalyzeArgs),
    /// Aggregate run directories into a CSV table.
    Report(report::ReportArgs),
}

/// `GIL_SEED` takes precedence over `--seed`.
pub fn resolve_seed(flag: u64) -> CliResult<u64> {
    match std::env::var("GIL_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("GIL_SEED must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(usage("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Train(a) => train::run(*a),
        Command::Analyze(a) => analyze::run(a),
        Command::Report(a) => report::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
