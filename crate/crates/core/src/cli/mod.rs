//! Command-line pipeline: generate data, encode hierarchies, fit, train,
//! evaluate, sweep and export.
//!
//! Every command hashes its configuration (all flags except `--out`) and
//! records the hash in its JSON and binary artifacts and in a manifest.

mod commands;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classifier::{Hierarchy, TrainConfig};
use crate::prototypes::{FitConfig, Mode};

pub use error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "hyperproto", version, about = "Hierarchy-regularized hyperbolic prototype networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic hierarchical benchmark (taxonomy plus train/test features).
    Generate(GenerateArgs),
    /// Turn a taxonomy into a class-distance matrix CSV.
    EncodeHierarchy(EncodeArgs),
    /// Fit prototypes to a class-distance matrix.
    FitPrototypes(FitArgs),
    /// Train the prototype classifier.
    Train(TrainArgs),
    /// Score a model or a predictions file.
    Eval(EvalArgs),
    /// Train and evaluate over a curvature x dimension x seed grid.
    Sweep(SweepArgs),
    /// Write prototype pairwise distances next to the ground-truth matrix.
    ExportMatrix(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lcd,
    Hcd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Children per node at each level, top level first.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 2, 3])]
    pub branching: Vec<usize>,
    /// Per-level standard deviation of centre offsets.
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_values_t = [2.0, 1.0, 0.5])]
    pub level_scales: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.6)]
    pub noise: f64,
    #[arg(long, default_value_t = 500)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 200)]
    pub test_per_class: usize,
    #[arg(long, value_enum, default_value_t = FeatureFormat::Csv)]
    pub format: FeatureFormat,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Lcd)]
    pub method: Method,
    /// HCD embedding dimension.
    #[arg(long, default_value_t = 10)]
    pub hcd_dim: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub hcd_curvature: f64,
    #[arg(long, default_value_t = 300)]
    pub hcd_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix CSV path; HCD also writes `<stem>.nodes.csv` and `<stem>.summary.json`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Taxonomy to encode; alternative to `--matrix`.
    #[arg(long, required_unless_present = "matrix")]
    pub taxonomy: Option<PathBuf>,
    /// Precomputed class-distance matrix CSV.
    #[arg(long, conflicts_with = "taxonomy")]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Lcd)]
    pub hierarchy: Method,
    #[arg(long, default_value = "hyperbolic")]
    pub mode: Mode,
    #[arg(long, allow_negative_numbers = true, default_value_t = FitConfig::default().curvature)]
    pub curvature: f64,
    #[arg(long, default_value_t = FitConfig::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = FitConfig::default().steps)]
    pub steps: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = FitConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Training options shared by `train` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value = "hyperbolic")]
    pub mode: Mode,
    #[arg(long, default_value = "none")]
    pub hierarchy: Hierarchy,
    #[arg(long, allow_negative_numbers = true, default_value_t = TrainConfig::default().temperature)]
    pub temperature: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = TrainConfig::default().ball_learning_rate)]
    pub ball_learning_rate: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = TrainConfig::default().disto_weight)]
    pub disto_weight: f64,
    /// Hidden width of the tiny backbone; 0 trains the head on raw features.
    #[arg(long, default_value_t = 0)]
    pub backbone_hidden: usize,
    #[arg(long, default_value_t = TrainConfig::default().feature_dim)]
    pub feature_dim: usize,
    /// Precomputed class-distance matrix CSV matching `--hierarchy`.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

impl ModelArgs {
    pub fn to_config(&self, curvature: f64, dim: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            hierarchy: self.hierarchy,
            curvature,
            dim,
            temperature: self.temperature,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            ball_learning_rate: self.ball_learning_rate,
            disto_weight: self.disto_weight,
            backbone_hidden: self.backbone_hidden,
            feature_dim: self.feature_dim,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Training features, CSV or binary.
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true, default_value_t = TrainConfig::default().curvature)]
    pub curvature: f64,
    #[arg(long, default_value_t = TrainConfig::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Model checkpoint; needs `--features`.
    #[arg(long, requires = "features", required_unless_present = "predictions")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Predictions CSV `sample_id,true_label,pred1..predk` to score instead of a model.
    #[arg(long, conflicts_with = "model")]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Optional `label,group` file for per-group accuracy.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Held-out features; the training features are scored when absent.
    #[arg(long)]
    pub test_features: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_values_t = [0.01, 0.1, 1.0])]
    pub curvatures: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [16])]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Tidy CSV path.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExportArgs {
    /// Model checkpoint or prototype file.
    #[arg(long)]
    pub model: PathBuf,
    /// Ground truth as a matrix CSV (used when the model stores none).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Taxonomy for an LCD ground truth and a leaf-order check.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// CSV path.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::EncodeHierarchy(a) => commands::encode_hierarchy(&a),
        Command::FitPrototypes(a) => commands::fit(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::ExportMatrix(a) => commands::export_matrix(&a),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Usage errors print clap's message and map to the config exit code.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ErrorKind::Config.exit_code() } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    run_from(std::env::args_os())
}
