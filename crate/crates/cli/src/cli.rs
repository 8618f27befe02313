//! Argument parsing, option resolution and exit codes.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use monsoon_core::autodiff::CheckpointError;
use monsoon_core::evaluation::EvalError;
use monsoon_core::features::FeatureError;
use monsoon_core::ingest::IngestError;
use monsoon_core::models::ModelError;
use monsoon_core::training::TrainError;

use crate::commands;
use crate::pipeline::ForecastInputError;
use crate::settings::{parse_pair, UsageError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_PREDICTION_INPUTS: i32 = 4;
pub const EXIT_SEARCH: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "monsoon",
    version,
    about = "Seasonal (June-September) all-India rainfall forecasting"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 usage, 2 data, 3 training, 4 prediction inputs, 5 search."
)]
pub struct Cli {
    /// key=value options file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent of the per-run output directories.
    #[arg(long, global = true, default_value = "runs")]
    pub runs_root: PathBuf,
    /// Exact output directory instead of `<runs-root>/<timestamp>-<command>`.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Extra option as key=value (repeatable); see README for the keys.
    #[arg(long = "set", global = true, value_parser = parse_pair)]
    pub set: Vec<(String, String)>,
    /// More log output.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate raw inputs and write a data store.
    Ingest(IngestArgs),
    /// Train one forecaster on the training years.
    Train(TrainArgs),
    /// Compare the four patched-transformer variants against every baseline.
    Benchmark(BenchmarkArgs),
    /// Forecast one season from a checkpoint.
    Predict(PredictArgs),
    /// Train one model per grid point and keep the best.
    Gridsearch(GridArgs),
    /// Write synthetic raw inputs with a known index-to-rain relation.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Daily JJAS rainfall CSV (`date,rain_mm`), path or URL.
    #[arg(long)]
    pub rain: String,
    /// Niño3.4 monthly index (NOAA text layout or `year,month,value` CSV), path or URL.
    #[arg(long)]
    pub nino: String,
    /// Monthly DMI CSV (`year,month,dmi`), path or URL.
    #[arg(long)]
    pub iod: String,
    /// Cache for downloaded sources.
    #[arg(long, default_value = ".monsoon-cache")]
    pub cache: PathBuf,
    /// DMI above this is a positive IOD month, below its negative a negative one.
    #[arg(long, default_value_t = monsoon_core::ingest::DEFAULT_IOD_THRESHOLD)]
    pub iod_threshold: f64,
}

/// Options shared by the commands that train.
#[derive(Debug, Args, Default)]
pub struct ModelFlags {
    /// Dataset variant: D1 (rain), D2 (+Niño3.4), D3 (+IOD), D4 (+both).
    #[arg(long)]
    pub variant: Option<String>,
    /// patchtst, lstm or cnn.
    #[arg(long)]
    pub model: Option<String>,
    /// attention or recurrent.
    #[arg(long)]
    pub encoder: Option<String>,
    /// rollout or direct.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Last training year; later years are the test block.
    #[arg(long)]
    pub split_boundary: Option<i32>,
    /// printed (default) or conventional.
    #[arg(long)]
    pub rmse_convention: Option<String>,
}

impl ModelFlags {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("variant", self.variant.clone());
        push("model", self.model.clone());
        push("encoder", self.encoder.clone());
        push("mode", self.mode.clone());
        push("window", self.window.map(|v| v.to_string()));
        push("horizon", self.horizon.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("max_epochs", self.epochs.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(|v| v.to_string()));
        push("split_boundary", self.split_boundary.map(|v| v.to_string()));
        push("rmse_convention", self.rmse_convention.clone());
        out
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub flags: ModelFlags,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Run every model (the default).
    #[arg(long)]
    pub all: bool,
    /// Comma-separated subset of patchtst, lr, gbt, svr, lstm, cnn.
    #[arg(long, conflicts_with = "all")]
    pub only: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub flags: ModelFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Target season.
    #[arg(long)]
    pub year: i32,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Observed data store; supplies the previous season and observed index months.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Forecast Niño3.4 months, same formats as observed data.
    #[arg(long)]
    pub nino_forecast: Option<PathBuf>,
    /// Forecast DMI months (`year,month,dmi`).
    #[arg(long)]
    pub iod_forecast: Option<PathBuf>,
    /// Override the long-period average (mm).
    #[arg(long)]
    pub lpa: Option<f64>,
    /// Override the lower tercile boundary (mm).
    #[arg(long)]
    pub t1: Option<f64>,
    /// Override the upper tercile boundary (mm).
    #[arg(long)]
    pub t2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// One `name=v1,v2,...` axis per line.
    #[arg(long)]
    pub grid: PathBuf,
    #[command(flatten)]
    pub flags: ModelFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1901)]
    pub first_year: i32,
    #[arg(long, default_value_t = 120)]
    pub years: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Exit code for a failed command, from the first recognized cause.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<ForecastInputError>() || cause.is::<CheckpointError>() {
            return EXIT_PREDICTION_INPUTS;
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return match e {
                TrainError::AllTrialsFailed(_) => EXIT_SEARCH,
                TrainError::InvalidConfig(_) | TrainError::InvalidGrid(_) => EXIT_USAGE,
                TrainError::Checkpoint(_) => EXIT_PREDICTION_INPUTS,
                _ => EXIT_TRAINING,
            };
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return match e {
                ModelError::MissingExogenous(_) | ModelError::MissingSeed(_) => {
                    EXIT_PREDICTION_INPUTS
                }
                ModelError::InvalidConfig(_) | ModelError::WindowShorterThanPatch { .. } => {
                    EXIT_USAGE
                }
                ModelError::Feature(_) => EXIT_DATA,
                _ => EXIT_TRAINING,
            };
        }
        if cause.is::<IngestError>()
            || cause.is::<FeatureError>()
            || cause.is::<EvalError>()
            || cause.is::<std::io::Error>()
        {
            return EXIT_DATA;
        }
    }
    EXIT_USAGE
}

/// Parses `argv` (including the program name), runs the command and returns its exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = if cli.verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

impl Cli {
    /// Config file pairs, then command flags, then `--set` pairs.
    pub fn option_pairs(
        &self,
        flags: Option<&ModelFlags>,
    ) -> anyhow::Result<Vec<(String, String)>> {
        let mut pairs = crate::settings::read_optional(self.config.as_deref())?;
        if let Some(f) = flags {
            pairs.extend(f.pairs());
        }
        pairs.extend(self.set.iter().cloned());
        Ok(pairs)
    }
}
