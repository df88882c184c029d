use std::path::PathBuf;
use std::process::ExitCode;

use asgd_cli::commands::{self, RunOptions};
use asgd_cli::error::EXIT_MALFORMED;
use asgd_cli::CliError;
use asgd_core::engine::Algorithm;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "asgd", version, about = "Asynchronous SGD simulator with stochastic delays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured variant over the seed list and write traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Run only the base sections with this algorithm.
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long)]
        allow_inadmissible: bool,
    },
    /// Print the admissibility report of a config as JSON.
    CheckDelay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
    },
    /// Fit the log-log slope of the ensemble-mean squared gradient norm.
    RateFit {
        /// Glob matching trace CSV files.
        traces: String,
        /// Fraction of iterations, counted from the end, to fit over.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        /// Also write the ensemble CSV and the report here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Order trace ensembles by when they first drop below a threshold.
    Compare {
        /// One glob per ensemble.
        #[arg(required = true)]
        traces: Vec<String>,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Sync,
    Async,
    #[value(name = "async_i", alias = "async-i", alias = "sgdi")]
    AsyncI,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Sync => Algorithm::Sync,
            AlgorithmArg::Async => Algorithm::Async,
            AlgorithmArg::AsyncI => Algorithm::AsyncI,
        }
    }
}

fn execute(command: Command) -> Result<String, CliError> {
    Ok(match command {
        Command::Run {
            config,
            seed,
            out_dir,
            algorithm,
            allow_inadmissible,
        } => {
            let report = commands::cmd_run(&RunOptions {
                config,
                seed,
                out_dir,
                algorithm: algorithm.map(Into::into),
                allow_inadmissible,
            })?;
            commands::to_json(&report)
        }
        Command::CheckDelay { config, algorithm } => {
            commands::to_json(&commands::cmd_check_delay(&config, algorithm.map(Into::into))?)
        }
        Command::RateFit {
            traces,
            window,
            out_dir,
        } => commands::to_json(&commands::cmd_rate_fit(&traces, window, out_dir.as_deref())?),
        Command::Compare {
            traces,
            threshold,
            out_dir,
        } => commands::to_json(&commands::cmd_compare(&traces, threshold, out_dir.as_deref())?),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_MALFORMED as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(json) => {
            print!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
