//! Command-line definitions. Commands: synth, ingest, train, fit-stats,
//! detect, score, perturb, eval, bench.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ontopic_core::baselines::ModelKind;

#[derive(Debug, Parser)]
#[command(
    name = "ontopic",
    version,
    about = "Essay scoring with built-in off-topic detection",
    long_about = "Trains per-prompt scoring models on on-topic essays, detects off-topic and \
                  adversarial responses via summed layer-wise Mahalanobis distances, and \
                  benchmarks the full model roster on synthetic or ingested corpora."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a deterministic synthetic corpus.
    Synth(SynthArgs),
    /// Ingest an essay dataset (JSONL or ASAP-style TSV) into corpus form.
    Ingest(IngestArgs),
    /// Train a model for one or all prompts.
    Train(TrainArgs),
    /// Fit per-layer Gaussian statistics for a trained checkpoint.
    FitStats(FitStatsArgs),
    /// Score essays and apply the detection threshold jointly.
    Detect(DetectArgs),
    /// Score essays without detection.
    Score(ScoreArgs),
    /// Generate adversarial off-topic essays from a perturbation manifest.
    Perturb(PerturbArgs),
    /// Compute metrics from a decisions file against labeled input.
    Eval(EvalArgs),
    /// Run the full benchmark matrix: all models, prompts, perturbations.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus directory (corpus.jsonl + prompts.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub prompts: usize,
    #[arg(long, default_value_t = 400)]
    pub essays_per_prompt: usize,
    #[arg(long, default_value_t = 120)]
    pub vocab_shared: usize,
    #[arg(long, default_value_t = 40)]
    pub vocab_per_topic: usize,
    #[arg(long, default_value_t = 0.05)]
    pub quality_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestFormat {
    Jsonl,
    Tsv,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input file (JSONL rows or tab-separated ASAP-style export).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = IngestFormat::Jsonl)]
    pub format: IngestFormat,
    /// Prompt manifest JSON; without it score ranges are inferred from the
    /// observed scores per prompt.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for stable split assignment of rows without a split tag.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail (exit 3) if any row is rejected.
    #[arg(long)]
    pub strict: bool,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        format!(
            "unknown model kind '{s}' (expected one of: {})",
            ModelKind::ALL.map(|k| k.as_str()).join(", ")
        )
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory from `synth` or `ingest`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Model kind: aoes, aoes-no-trm, aoes-l2, baseline1, baseline2.
    #[arg(long, value_parser = parse_model_kind, default_value = "aoes")]
    pub model: ModelKind,
    /// Prompt id, or "all" for one model per prompt.
    #[arg(long, default_value = "all")]
    pub prompt: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub max_len: usize,
    /// Add learned positional embeddings.
    #[arg(long)]
    pub positional: bool,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub warmup_steps: usize,
    /// Topic regularizer weight.
    #[arg(long, default_value_t = 0.6)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cap on off-topic training essays for the supervised baselines.
    #[arg(long, default_value_t = 200)]
    pub off_train_cap: usize,
}

#[derive(Debug, Args)]
pub struct FitStatsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Stats output path; defaults to the checkpoint path with `.stats`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the embedding layer's states as a detector feature layer.
    #[arg(long)]
    pub include_embedding: bool,
    /// Also write a quantile threshold of the on-topic train distances
    /// next to the stats file.
    #[arg(long, default_value_t = 0.95)]
    pub quantile: f64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Required for Mahalanobis-detection model kinds.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub threshold: PathBuf,
    /// Input essays as JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Decisions CSV output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Prompt whose test split gets perturbed.
    #[arg(long)]
    pub prompt: String,
    /// JSON array of perturbation specs.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Adversarial essays JSONL output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Decisions CSV from `detect`.
    #[arg(long)]
    pub decisions: PathBuf,
    /// The labeled JSONL the decisions were computed from.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// The prompt the model was trained for.
    #[arg(long)]
    pub prompt: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Labels for the metrics rows.
    #[arg(long, default_value = "eval")]
    pub dataset: String,
    #[arg(long, default_value = "model")]
    pub model: String,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark config JSON; defaults apply without it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}
