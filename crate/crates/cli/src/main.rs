//! `tensordens` command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input, 2 file or environment failure.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tensordens::evaluate::ExampleId;

use crate::commands::ApproxTest;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "tensordens", version, about = "Bayesian conditional density regression with tensor-product splines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EstimatorFlags {
    /// Seed for every random draw (required).
    #[arg(long)]
    seed: u64,
    /// Sum every model and basis allocation exactly.
    #[arg(long, conflicts_with = "monte_carlo")]
    enumerate: bool,
    /// Sample basis allocations (and models, for large model spaces).
    #[arg(long)]
    monte_carlo: bool,
    /// Basis-size draws per model.
    #[arg(long)]
    n_star: Option<usize>,
    /// Model draws when the model space is larger than this.
    #[arg(long)]
    models: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from one of the built-in examples.
    Simulate {
        #[arg(long, value_parser = parse_example)]
        example: ExampleId,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior mean (and variance) of f(y|x) at query points or on a y grid.
    FitPredict {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Response grid "ymin:ymax:steps" evaluated at every query x.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also report the posterior second moment and variance.
        #[arg(long)]
        variance: bool,
        /// Store the wall time in the results file.
        #[arg(long)]
        record_timing: bool,
        #[command(flatten)]
        estimator: EstimatorFlags,
    },
    /// Replicated simulation benchmark over a grid of (n, p).
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV table path; the JSON table goes next to it with a .json extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the planned grid and exit.
        #[arg(long)]
        dry_run: bool,
        /// Store runtimes in the output tables.
        #[arg(long)]
        record_timing: bool,
        #[command(flatten)]
        estimator: EstimatorFlags,
    },
    /// Sup-norm projection residuals for built-in test functions.
    ApproxReport {
        /// Spline order.
        #[arg(long, short)]
        q: usize,
        #[arg(long, value_enum)]
        test: ApproxTest,
        /// Increasing basis dimensions, e.g. "8,16,32".
        #[arg(long)]
        j_list: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_example(s: &str) -> Result<ExampleId, String> {
    s.parse().map_err(|e: tensordens::Error| e.to_string())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("TENSORDENS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("TENSORDENS_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Io(format!("cannot start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { example, n, p, seed, out } => commands::simulate(example, n, p, seed, &out),
        Command::FitPredict {
            config,
            data,
            queries,
            grid,
            out,
            variance,
            record_timing,
            estimator: e,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            commands::apply_estimator_flags(&mut cfg.estimator, e.seed, e.enumerate, e.monte_carlo, e.n_star, e.models);
            commands::fit_predict(
                &cfg,
                commands::FitArgs {
                    data,
                    queries,
                    grid,
                    out,
                    variance,
                    record_timing,
                },
            )
        }
        Command::Benchmark {
            config,
            out,
            dry_run,
            record_timing,
            estimator: e,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            commands::apply_estimator_flags(&mut cfg.estimator, e.seed, e.enumerate, e.monte_carlo, e.n_star, e.models);
            commands::benchmark(&cfg, out, dry_run, record_timing)
        }
        Command::ApproxReport { q, test, j_list, out } => {
            let list = commands::parse_j_list(&j_list)?;
            commands::approx_report(q, test, &list, &out)
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
