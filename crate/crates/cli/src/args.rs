use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "kc-eval",
    version,
    about = "Evaluate programming-assistant hints with knowledge components",
    propagate_version = true
)]
pub struct Cli {
    /// TOML file supplying defaults for any flag (flags win).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Log more detail to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check logs against a KC database.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Extract KCs from code or hints, or run the judge pass.
    #[command(subcommand)]
    Extract(ExtractCommand),
    /// Compute RQ1, RQ2 or RQ3 tables.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Export a blind labeling sample for expert raters.
    SampleLabels(SampleLabelsArgs),
    /// Score filled-in rater files.
    Agreement(AgreementArgs),
    /// Generate synthetic cohorts with planted ground truth.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Render SVG figures from analysis tables.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum IngestCommand {
    /// Load logs, print counts and drop reasons.
    Validate(ValidateArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExtractCommand {
    /// Missing KCs for every checkpoint.
    Code(ExtractArgs),
    /// Addressed KCs for every hint.
    Hints(ExtractArgs),
    /// Validate or revise existing extractions.
    Judge(JudgeArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Progression labels with time and submission averages.
    Rq1(Rq1Args),
    /// Top-3 overlap grouped by hint KC-list length.
    Rq2(HintMetricArgs),
    /// Resolution of hinted KCs grouped by hint KC-list length.
    Rq3(HintMetricArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Write a synthetic dataset, ground truth and expectations.
    Generate(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DbArgs {
    /// KC database JSON (required).
    #[arg(long, value_name = "PATH")]
    pub kcdb: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset directory with checkpoints.jsonl and hints.jsonl.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Checkpoint log (instead of --dataset).
    #[arg(long, value_name = "PATH")]
    pub checkpoints: Option<PathBuf>,
    /// Hint log (instead of --dataset).
    #[arg(long, value_name = "PATH")]
    pub hints: Option<PathBuf>,
    /// Term label used in reports.
    #[arg(long)]
    pub term: Option<String>,
    /// Hint-to-checkpoint linkage window in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub linkage_window: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_parallel: Option<usize>,
    /// Total attempts per subject.
    #[arg(long)]
    pub retry_limit: Option<u32>,
    /// Extraction cache file.
    #[arg(long, value_name = "PATH")]
    pub cache: Option<PathBuf>,
    /// Environment variable holding the API key.
    #[arg(long, value_name = "NAME")]
    pub api_key_env: Option<String>,
    #[arg(long, value_name = "SECONDS")]
    pub timeout: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Extraction JSONL to write; existing records are kept and updated.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write permanent failures here as JSON.
    #[arg(long, value_name = "PATH")]
    pub drop_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct JudgeArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Extraction JSONL to judge.
    #[arg(long, value_name = "PATH")]
    pub extractions: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub drop_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Rq1Args {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "PATH")]
    pub extractions: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Gaps longer than this count as idle and add no time.
    #[arg(long, value_name = "SECONDS")]
    pub idle_cap: Option<f64>,
    /// Dataset directory of the comparison term for the Green t-test.
    #[arg(long, value_name = "DIR")]
    pub baseline_dataset: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub baseline_extractions: Option<PathBuf>,
    /// Use Welch's t-test instead of the pooled one.
    #[arg(long)]
    pub welch: bool,
}

#[derive(Debug, Clone, Args)]
pub struct HintMetricArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "PATH")]
    pub extractions: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleLabelsArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "PATH")]
    pub extractions: Option<PathBuf>,
    /// Labeling CSV to write; the sample itself goes next to it as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Number of items.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of items every rater labels.
    #[arg(long)]
    pub overlap_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AgreementArgs {
    /// Sample JSON written by sample-labels.
    #[arg(long, value_name = "PATH")]
    pub sample: Option<PathBuf>,
    /// Filled-in rater CSV; repeat per rater. The file stem names the rater.
    #[arg(long = "rater", value_name = "PATH")]
    pub raters: Vec<PathBuf>,
    /// Also write the scores here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_students: Option<usize>,
    #[arg(long)]
    pub q_top3: Option<f64>,
    #[arg(long)]
    pub term: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory holding analysis tables.
    #[arg(long, value_name = "DIR")]
    pub in_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}
