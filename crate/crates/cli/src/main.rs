//! `nsv`: run, verify and sweep the regularized fluid-kinetic solver.
//!
//! Exit codes: 0 success, 1 runtime failure or a failed check, 2 invalid
//! configuration or input. `SIM_LOG` sets the log level.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commands::SweepParam;

#[derive(Parser, Debug)]
#[command(name = "nsv", version, about = "Regularized Navier-Stokes-Vlasov solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation and write the ledger, snapshots and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `[solver] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a run directory: energy, weak-momentum, weak-vlasov, moments.
    Verify {
        /// Directory written by `nsv run`.
        dir: PathBuf,
        /// Comma-separated subset of checks; all by default.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        /// Where to write report.csv; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the random test functions; defaults to `[solver] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep delta or epsilon over a configured run, or refine a
    /// manufactured-solution case.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values, decreasing (grid sizes for resolution).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Case of a resolution sweep: translation, stokes, free-streaming.
        #[arg(long, default_value = "translation")]
        case: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out, seed } => commands::run(&config, &out, seed),
        Command::Verify { dir, checks, out, seed } => {
            let out = out.unwrap_or_else(|| dir.clone());
            commands::verify(&dir, &checks, &out, seed)
        }
        Command::Sweep {
            config,
            param,
            values,
            case,
            out,
            jobs,
        } => commands::sweep(config.as_deref(), param, &values, &case, &out, jobs),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
