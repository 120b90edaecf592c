mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{CliError, PredictArgs, StatsArgs};
use config::RunArgs;

/// Ensembles of classifiers trained on dimension-reduced views of the data.
#[derive(Debug, Parser)]
#[command(name = "drx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate every (dataset, strategy, inducer) combination and write one report per run
    Benchmark(RunArgs),
    /// Train one ensemble on a full dataset and save it
    Train(RunArgs),
    /// Classify rows with a saved model
    Predict(PredictArgs),
    /// Rank algorithms across datasets from benchmark reports
    Stats(StatsArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Stats(a) => commands::stats(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(commands::EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.err);
            ExitCode::from(e.code)
        }
    }
}
