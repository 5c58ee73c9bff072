//! `kge`: train and evaluate coherence-regularized knowledge-graph
//! embeddings from a single experiment config file.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "kge",
    version,
    about = "Knowledge-graph embeddings with a PMI coherence regularizer"
)]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override run.seed_base.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override train.lambda_c.
    #[arg(long = "lambda-c", global = true)]
    lambda_c: Option<f64>,
    /// Override train.lambda_r.
    #[arg(long = "lambda-r", global = true)]
    lambda_r: Option<f64>,
    /// Override train.dim.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Also report filtered-ranking link prediction metrics.
    #[arg(long = "filtered-ranking", global = true)]
    filtered_ranking: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract entity co-occurrences from textual triples and build the PMI
    /// matrix.
    Pmi,
    /// Train one model per seed and write models, traces, and a manifest.
    Train {
        /// Sweep the [grid] section and report the best combination by
        /// validation MRR.
        #[arg(long)]
        grid: bool,
    },
    /// Evaluate trained models: link prediction, triple classification,
    /// Coherence@k, AutoWI@k, plus per-seed and aggregate reports.
    Eval {
        /// Model files to evaluate (default: every model in the manifest).
        #[arg(long, num_args = 1..)]
        models: Vec<PathBuf>,
    },
    /// Export word-intrusion tasks, or score annotation files against the
    /// exported answer key.
    Intrude {
        /// Model file (default: the manifest's first seed).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Annotation files (task_id<TAB>chosen_entity per line). When given,
        /// scores them instead of exporting tasks.
        #[arg(long, num_args = 1..)]
        annotations: Vec<PathBuf>,
    },
    /// Rebuild the aggregate report from existing per-seed report files.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".to_string()))?;
    let overrides = Overrides {
        seed: cli.seed,
        lambda_c: cli.lambda_c,
        lambda_r: cli.lambda_r,
        dim: cli.dim,
        filtered_ranking: cli.filtered_ranking,
    };
    let config = ExperimentConfig::resolve(config_path, &overrides)?;
    match &cli.command {
        Command::Pmi => commands::run_pmi(&config),
        Command::Train { grid } => commands::run_train(&config, *grid),
        Command::Eval { models } => commands::run_eval(&config, models),
        Command::Intrude { model, annotations } => {
            commands::run_intrude(&config, model.as_deref(), annotations)
        }
        Command::Report => commands::run_report(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
