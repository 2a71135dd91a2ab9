//! Batch front end for the spectral Galerkin solver.
//!
//! Commands: `verify`, `solve`, `solve-sde`, `convergence`; each reads a
//! JSON run configuration and writes deterministic artifacts into the
//! output directory. Exit codes: 0 success, 1 numerical/check failure,
//! 2 configuration error.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::CliError;
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "paraman", version, about = "Spectral Galerkin solver for parabolic equations on compact manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.directory from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override (stochastic streams and the verify suite).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity suite and structural checks.
    Verify(CommonArgs),
    /// Integrate the deterministic system and write monitors/snapshots.
    Solve(CommonArgs),
    /// Run a Monte Carlo ensemble of stochastic paths.
    SolveSde(CommonArgs),
    /// Error table over basis sizes and time steps.
    Convergence(CommonArgs),
}

fn load_config(args: &CommonArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", args.config.display())))?;
    let mut config = RunConfig::from_json(&text).map_err(CliError::Config)?;
    if let Some(seed) = args.seed {
        config.stochastic.seed = seed;
        config.verify.seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    Ok((config, out_dir))
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let args = match command {
        Command::Verify(a) | Command::Solve(a) | Command::SolveSde(a) | Command::Convergence(a) => {
            a
        }
    };
    let (config, out_dir) = load_config(args)?;
    let run = || match command {
        Command::Verify(_) => commands::cmd_verify(&config, &out_dir),
        Command::Solve(_) => commands::cmd_solve(&config, &out_dir),
        Command::SolveSde(_) => commands::cmd_solve_sde(&config, &out_dir),
        Command::Convergence(_) => commands::cmd_convergence(&config, &out_dir),
    };
    match args.threads {
        None => run(),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(run)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
