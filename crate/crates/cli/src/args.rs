use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use vrf_sentinel::vrf_io::ChangeType;

#[derive(Debug, Parser)]
#[command(name = "vrf-sentinel", version, about = "Detect anomalous modifications in voter registration file snapshots")]
pub struct Cli {
    /// Root seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

fn change_type(s: &str) -> Result<ChangeType, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = ChangeType::ALL.iter().map(|c| c.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic scenario with ground truth.
    Synth(SynthArgs),
    /// Parse and validate one snapshot, writing it in canonical form.
    Ingest(IngestArgs),
    /// Diff temporally adjacent snapshots into typed change records.
    Diff(DiffArgs),
    /// Aggregate change records into modification matrices.
    Matrix(MatrixArgs),
    /// Score and rank matrix entries with one detector.
    Detect(DetectArgs),
    /// Sweep planted perturbations and measure precision@k per detector.
    Evaluate(EvaluateArgs),
    /// Compute per-group feature vectors.
    Features(FeaturesArgs),
    /// Train the event-label classifier on labeled feature vectors.
    Train(TrainArgs),
    /// Classify feature vectors with a trained model.
    Predict(PredictArgs),
    /// Rerun a recorded invocation from its manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Organic background plus maintenance events, clusters and planted anomalies.
    Standard,
    /// Organic background only.
    Quiet,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Standard)]
    pub preset: Preset,
    /// Scenario configuration JSON; replaces the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_locales: Option<usize>,
    #[arg(long)]
    pub n_intervals: Option<usize>,
    #[arg(long)]
    pub interval_days: Option<u32>,
    #[arg(long)]
    pub population_median: Option<f64>,
    #[arg(long)]
    pub population_sigma: Option<f64>,
    #[arg(long)]
    pub population_min: Option<u64>,
    /// Multiplies every organic base rate.
    #[arg(long)]
    pub rate_scale: Option<f64>,
    /// Write modification matrices instead of realising snapshots.
    #[arg(long)]
    pub matrix_only: bool,
    /// Change type of the labeled groups in labels.csv.
    #[arg(long, value_parser = change_type, default_value = "deactivation")]
    pub label_change_type: ChangeType,
    /// Number of labeled groups to draw.
    #[arg(long, default_value_t = 184)]
    pub labels: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML column mapping; defaults to the canonical column names.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Snapshot date, when the file name has none.
    #[arg(long)]
    pub date: Option<chrono::NaiveDate>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DiffArgs {
    /// Directory of snapshot CSVs named with their YYYY-MM-DD date.
    #[arg(long)]
    pub snapshots: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Ignore status transitions out of pending.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MatrixArgs {
    #[arg(long)]
    pub changes: PathBuf,
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Build only this change type; all seven otherwise.
    #[arg(long, value_parser = change_type)]
    pub change_type: Option<ChangeType>,
    #[arg(long, default_value_t = 7)]
    pub interval_days: u32,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// temporal_std, temporal_iqr, cl_std[_W], cl_iqr[_W], global_std, global_iqr, nmf or rpca.
    #[arg(long)]
    pub method: String,
    /// Full cross-locale window width (odd).
    #[arg(long)]
    pub window: Option<usize>,
    /// NMF rank.
    #[arg(long)]
    pub k: Option<usize>,
    /// RPCA sparsity weight; 1/sqrt(max(rows, cols)) by default.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Entries outlined in the heatmap.
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Methods to sweep; the ten-method comparison set by default.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub fraction: f64,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    #[arg(long, default_value_t = 21)]
    pub grid_points: usize,
    /// Reuse one perturbed set for every γ.
    #[arg(long)]
    pub fixed_mask: bool,
    /// Ground truth JSON; adds the average rank of its planted cells.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub snapshots: PathBuf,
    #[arg(long)]
    pub changes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = change_type, default_value = "deactivation")]
    pub change_type: ChangeType,
    /// Labeled groups; only these are computed when given.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub interval_days: u32,
    #[arg(long)]
    pub months_since_last_update: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    #[arg(long, default_value_t = 50)]
    pub n_estimators: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.3)]
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Predictions whose top probability falls below this are left unlabeled.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fail unless every output hashes as recorded.
    #[arg(long)]
    pub check: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Diff(_) => "diff",
            Command::Matrix(_) => "matrix",
            Command::Detect(_) => "detect",
            Command::Evaluate(_) => "evaluate",
            Command::Features(_) => "features",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_mut(&mut self) -> &mut PathBuf {
        match self {
            Command::Synth(a) => &mut a.out,
            Command::Ingest(a) => &mut a.out,
            Command::Diff(a) => &mut a.out,
            Command::Matrix(a) => &mut a.out,
            Command::Detect(a) => &mut a.out,
            Command::Evaluate(a) => &mut a.out,
            Command::Features(a) => &mut a.out,
            Command::Train(a) => &mut a.out,
            Command::Predict(a) => &mut a.out,
            Command::Replay(a) => &mut a.out,
        }
    }

    /// Input paths that must exist before the command runs.
    pub fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut v: Vec<&mut PathBuf> = Vec::new();
        match self {
            Command::Synth(a) => v.extend(a.config.as_mut()),
            Command::Ingest(a) => {
                v.push(&mut a.snapshot);
                v.extend(a.schema.as_mut());
            }
            Command::Diff(a) => {
                v.push(&mut a.snapshots);
                v.extend(a.schema.as_mut());
            }
            Command::Matrix(a) => {
                v.push(&mut a.changes);
                v.push(&mut a.population);
            }
            Command::Detect(a) => v.push(&mut a.matrix),
            Command::Evaluate(a) => {
                v.push(&mut a.matrix);
                v.extend(a.truth.as_mut());
            }
            Command::Features(a) => {
                v.push(&mut a.snapshots);
                v.push(&mut a.changes);
                v.extend(a.labels.as_mut());
                v.extend(a.schema.as_mut());
            }
            Command::Train(a) => v.push(&mut a.features),
            Command::Predict(a) => {
                v.push(&mut a.model);
                v.push(&mut a.features);
            }
            Command::Replay(a) => v.push(&mut a.manifest),
        }
        v
    }
}
