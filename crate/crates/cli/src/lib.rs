//! Command-line driver: data generation, corruption, training, imputation,
//! benchmarking and hyperparameter search.
//!
//! Every command resolves its configuration from defaults, an optional
//! `--config` JSON file and flags (flags win), writes its outputs into
//! `--out-dir`, and echoes the effective configuration as `config.json`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    BenchmarkSettings, CorruptSettings, DataKind, GenerateSettings, ImputeMethod, ImputeSettings,
    SchemeName, SearchSettings, TrainSettings,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key '{key}': {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Core(#[from] sdai::Error),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub(crate) fn config(key: impl Into<String>, message: String) -> Self {
        CliError::Config {
            key: key.into(),
            message,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "sdai", version, about = "Missing-data imputation with stacked denoising autoencoders")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON file with the command's configuration keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; every random component derives its stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (data.csv, schema.json).
    Generate(commands::GenerateArgs),
    /// Remove cells with a known pattern (corrupted.csv, eval_mask.csv).
    Corrupt(commands::CorruptArgs),
    /// Train an autoencoder (model.json, loss_history.csv).
    Train(commands::TrainArgs),
    /// Fill missing cells (imputed.csv, optional probabilities.csv).
    Impute(commands::ImputeArgs),
    /// Nested cross-validated comparison of imputers (report.csv, report.json).
    Benchmark(commands::BenchmarkArgs),
    /// Random hyperparameter search (trials.json, best_config.json).
    Search(commands::SearchArgs),
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli.global.jobs;
    if jobs == Some(0) {
        return Err(CliError::config("jobs", "must be at least 1".into()));
    }
    let work = move || commands::dispatch(&cli.global, cli.command);
    match jobs {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config("jobs", e.to_string()))?
            .install(work),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}
