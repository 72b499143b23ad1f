use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oiscore::estimator::ConditionFamily;
use oiscore::io::MatrixFormat;
use oiscore::metrics::Positive;
use oiscore::NormKind;
use serde::Serialize;

/// Overlap-index bound scoring for out-of-distribution detection.
#[derive(Debug, Parser)]
#[command(name = "oiscore", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an ID summary from a feature matrix.
    Fit(FitArgs),
    /// Score samples against a fitted summary.
    Score(ScoreArgs),
    /// AUROC, TPR95 and AUPR from ID and OOD score files.
    Eval(EvalArgs),
    /// Estimate the overlap index of two sample sets.
    EstimateOi(EstimateOiArgs),
    /// Upper bound on accuracy under distribution shift.
    AccuracyBound(AccuracyBoundArgs),
    /// Draw samples from a synthetic distribution.
    Synth(SynthArgs),
    /// Time per-sample scoring across dimensions and k.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    /// Matrix file format: csv or f32le.
    #[arg(long, default_value = "csv")]
    pub format: MatrixFormat,
    /// The CSV input starts with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value = "l2")]
    pub norm: NormKind,
    /// none, file:<path> or contaminated:<pool>,<count>,<seed>
    #[arg(long, default_value = "none")]
    pub center: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Adds a label column: ID when score ≥ threshold, OOD otherwise.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub id_scores: PathBuf,
    #[arg(long)]
    pub ood_scores: PathBuf,
    #[arg(long, default_value = "ood")]
    pub aupr_positive: Positive,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write ID and OOD score histograms to this JSON file.
    #[arg(long)]
    pub emit_histograms: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub hist_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub hist_hi: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateOiArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value = "l2")]
    pub norm: NormKind,
    /// Move the origin to the mean of the merged samples first.
    #[arg(long)]
    pub center_merged_mean: bool,
    /// Condition functions: balls or shells.
    #[arg(long, default_value = "balls")]
    pub family: ConditionFamily,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AccuracyBoundArgs {
    /// Accuracy on the training distribution.
    #[arg(long)]
    pub p: f64,
    /// Accuracy on the part of the shifted distribution outside the training one.
    #[arg(long)]
    pub q: f64,
    /// Clean ratio; adds the backdoor mixture bound with `--shifted` as the poisoned set.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Samples from the training distribution.
    #[arg(long, required_unless_present = "overlap")]
    pub clean: Option<PathBuf>,
    /// Samples from the shifted distribution.
    #[arg(long, required_unless_present = "overlap")]
    pub shifted: Option<PathBuf>,
    /// Use this overlap bound instead of computing one from samples.
    #[arg(long, conflicts_with_all = ["clean", "shifted", "sigma"], allow_negative_numbers = true)]
    pub overlap: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value = "l2")]
    pub norm: NormKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Distribution spec as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub count: usize,
    /// Overrides the `seed` field of the distribution JSON.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "csv")]
    pub format: MatrixFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,100,500,1000,2000")]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000")]
    pub k_sweep: Vec<usize>,
    /// k held fixed during the dimension sweep.
    #[arg(long, default_value_t = 100)]
    pub dim_sweep_k: usize,
    /// Dimension held fixed during the k sweep.
    #[arg(long, default_value_t = 100)]
    pub k_sweep_dim: usize,
    /// Timed calls per cell.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1_000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1_000)]
    pub fit_rows: usize,
    #[arg(long, default_value_t = 256)]
    pub probes: usize,
    #[arg(long, default_value = "l2")]
    pub norm: NormKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
