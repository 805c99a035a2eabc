//! The benchmark matrix: trains every configured model kind on every
//! prompt, calibrates thresholds, evaluates natural and adversarial
//! off-topic detection plus on-topic scoring, and emits one consolidated
//! report. Every artifact is deterministic for a given config; timestamps
//! are confined to the `meta.json` sidecar, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use ontopic_core::baselines::ModelKind;
use ontopic_core::corpus::{Corpus, SynthConfig, synthesize};
use ontopic_core::encoder::EncoderConfig;
use ontopic_core::metrics::HistogramReport;
use ontopic_core::trm::TrainConfig;

use crate::args::BenchArgs;
use crate::formats::checkpoint::Checkpoint;
use crate::formats::{checkpoint, decisions, file_sha256, fmt_f64, manifest, stats, threshold, trace};
use crate::pipeline::{
    self, CellConfig, OffTopicCaps, PerturbSpec, PromptData, ThresholdMode,
};
use crate::{CliError, CliResult, resolve_out_dir};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Generate a synthetic corpus with these parameters (seeded by the
    /// global benchmark seed).
    Synth(SynthParams),
    /// Load an existing corpus directory.
    Path(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SynthParams {
    pub n_prompts: usize,
    pub essays_per_prompt: usize,
    pub vocab_shared: usize,
    pub vocab_per_topic: usize,
    pub quality_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n_prompts: d.n_prompts,
            essays_per_prompt: d.essays_per_prompt,
            vocab_shared: d.vocab_shared,
            vocab_per_topic: d.vocab_per_topic,
            quality_noise: d.quality_noise,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EncoderParams {
    pub dim: usize,
    pub layers: usize,
    pub max_len: usize,
    pub positional: bool,
}

impl Default for EncoderParams {
    fn default() -> Self {
        let d = EncoderConfig::default();
        Self { dim: d.dim, layers: d.layers, max_len: d.max_len, positional: d.positional }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainParams {
    pub lambda: f64,
    pub lr: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            lambda: d.lambda,
            lr: d.lr,
            warmup_steps: d.warmup_steps,
            epochs: d.epochs,
            batch_size: d.batch_size,
        }
    }
}

/// Benchmark configuration. Every field has a default; a config file and
/// the command line override selectively (flags > file > defaults).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub dataset_name: String,
    pub corpus: CorpusSource,
    pub encoder: EncoderParams,
    pub train: TrainParams,
    /// Model kinds to run; every entry must parse.
    pub models: Vec<String>,
    /// Add the untrained TF-IDF similarity detector to the comparison.
    pub include_tfidf: bool,
    pub threshold_mode: ThresholdMode,
    pub off_topic: OffTopicCaps,
    /// Adversarial generators applied to the perturbation model.
    pub perturbations: Vec<PerturbSpec>,
    /// The model kind whose detector faces the perturbations.
    pub perturb_model: String,
    pub histogram_bins: usize,
    /// Feed the embedding layer to the detector as well.
    pub include_embedding: bool,
    /// Abort (exit 3) if the run exceeds this wall-clock budget.
    pub time_budget_secs: Option<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            dataset_name: "synth".into(),
            corpus: CorpusSource::Synth(SynthParams::default()),
            encoder: EncoderParams::default(),
            train: TrainParams::default(),
            models: ModelKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            include_tfidf: true,
            threshold_mode: ThresholdMode::DevEer,
            off_topic: OffTopicCaps::default(),
            perturbations: PerturbSpec::default_roster(),
            perturb_model: "aoes".into(),
            histogram_bins: 20,
            include_embedding: false,
            time_budget_secs: None,
        }
    }
}

impl BenchConfig {
    pub fn parsed_models(&self) -> anyhow::Result<Vec<ModelKind>> {
        self.models
            .iter()
            .map(|s| {
                ModelKind::parse(s)
                    .ok_or_else(|| anyhow::anyhow!("unknown model kind '{s}' in config"))
            })
            .collect()
    }
}

/// Summary the benchmark writes as `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub prompts: Vec<String>,
    /// Mean off-topic F1 over prompts, per model (plus tfidf when enabled).
    pub mean_off_topic_f1: BTreeMap<String, f64>,
    /// Mean on-topic QWK over prompts, per trained model.
    pub mean_qwk: BTreeMap<String, f64>,
    /// Directional comparisons computed from this run.
    pub directional: BTreeMap<String, bool>,
    /// Mean adversarial detection F1 per perturbation kind.
    pub adversarial_f1: BTreeMap<String, f64>,
    pub threshold_mode: ThresholdMode,
}

pub fn run(args: &BenchArgs) -> CliResult {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Data(anyhow::anyhow!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<BenchConfig>(&text)
                .map_err(|e| CliError::Usage(format!("bad bench config: {e}")))?
        }
        None => BenchConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config
        .parsed_models()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out = resolve_out_dir(args.out.as_deref(), "bench");
    let report = run_bench(&config, &out)?;
    eprintln!("benchmark complete: report at {}", out.join("report.json").display());
    for (model, f1) in &report.mean_off_topic_f1 {
        eprintln!("  {model}: mean off-topic F1 {f1:.3}");
    }
    Ok(())
}

struct MetricSink {
    rows: Vec<(String, String, String, f64)>, // model, prompt, metric, value
}

impl MetricSink {
    fn push(&mut self, model: &str, prompt: &str, metric: &str, value: f64) {
        self.rows.push((model.to_string(), prompt.to_string(), metric.to_string(), value));
    }

    fn mean_of(&self, model: &str, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|(m, _, k, _)| m == model && k == metric)
            .map(|(_, _, _, v)| *v)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

pub fn run_bench(config: &BenchConfig, out: &Path) -> anyhow::Result<BenchReport> {
    let started = Instant::now();
    let start_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    std::fs::create_dir_all(out)?;
    let models = config.parsed_models()?;

    let corpus = materialize_corpus(config, out)?;
    let prompts: Vec<String> = corpus.prompts.keys().cloned().collect();

    let cell_cfg = CellConfig {
        encoder: EncoderConfig {
            dim: config.encoder.dim,
            layers: config.encoder.layers,
            max_len: config.encoder.max_len,
            positional: config.encoder.positional,
            seed: 0,
        },
        train: TrainConfig {
            lambda: config.train.lambda,
            lr: config.train.lr,
            warmup_steps: config.train.warmup_steps,
            epochs: config.train.epochs,
            batch_size: config.train.batch_size,
            seed: 0,
        },
        include_embedding: config.include_embedding,
    };

    let mut sink = MetricSink { rows: Vec::new() };
    let mut adversarial: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for prompt_id in &prompts {
        let data = pipeline::prompt_data(&corpus, prompt_id, config.off_topic)?;

        for &kind in &models {
            check_budget(config, started)?;
            let (ckpt, ckpt_path) =
                load_or_train(kind, &data, &cell_cfg, config.seed, out, prompt_id)?;
            let stats_pair = load_or_fit_stats(&ckpt, &ckpt_path, &data, config, out, prompt_id)?;
            let stats_ref = stats_pair.as_ref().map(|(s, _)| s);

            let eval = pipeline::evaluate_cell(
                &ckpt,
                stats_ref,
                &data,
                config.threshold_mode,
                config.histogram_bins,
            )?;

            let stem = format!("{}-{}", kind.as_str(), prompt_id);
            write_threshold(&eval, stats_pair.as_ref().map(|(_, h)| h.as_str()), out, &stem)?;
            decisions::write(
                &out.join("decisions").join(format!("{stem}.csv")),
                &eval.decisions,
                eval.n_layers,
            )?;
            write_histogram(&out.join("histograms").join(format!("{stem}.csv")), &eval.histogram)?;

            let model_name = kind.as_str();
            sink.push(model_name, prompt_id, "f1", eval.detection.f1);
            sink.push(model_name, prompt_id, "precision", eval.detection.precision);
            sink.push(model_name, prompt_id, "recall", eval.detection.recall);
            sink.push(model_name, prompt_id, "overlap", eval.histogram.overlap);
            sink.push(model_name, prompt_id, "threshold", eval.threshold.delta);
            if let Some(eer) = &eval.eer {
                sink.push(model_name, prompt_id, "eer_fpr", eer.fpr);
                sink.push(model_name, prompt_id, "eer_fnr", eer.fnr);
            }
            if let Some(s) = &eval.scoring {
                sink.push(model_name, prompt_id, "qwk", s.qwk);
                sink.push(model_name, prompt_id, "pearson", s.pearson);
            }
            if let Some(j) = &eval.joint {
                sink.push(model_name, prompt_id, "qwk_joint", j.qwk);
            }

            // Adversarial suite against the configured detector model.
            if model_name == config.perturb_model {
                for spec in &config.perturbations {
                    check_budget(config, started)?;
                    let adv = pipeline::evaluate_adversarial(
                        &ckpt,
                        stats_ref,
                        &data,
                        spec,
                        config.seed,
                        config.histogram_bins,
                    )?;
                    let kind_name = adv.kind.as_str();
                    sink.push(model_name, prompt_id, &format!("adv:{kind_name}:f1"), adv.detection.f1);
                    sink.push(
                        model_name,
                        prompt_id,
                        &format!("adv:{kind_name}:precision"),
                        adv.detection.precision,
                    );
                    sink.push(
                        model_name,
                        prompt_id,
                        &format!("adv:{kind_name}:recall"),
                        adv.detection.recall,
                    );
                    adversarial.entry(kind_name.to_string()).or_default().push(adv.detection.f1);
                    decisions::write(
                        &out.join("decisions").join(format!("{stem}-{kind_name}.csv")),
                        &adv.decisions,
                        adv.n_layers,
                    )?;
                    write_histogram(
                        &out.join("histograms").join(format!("{stem}-{kind_name}.csv")),
                        &adv.histogram,
                    )?;
                }
            }
        }

        if config.include_tfidf {
            let cell = pipeline::evaluate_tfidf(&data, config.threshold_mode, config.histogram_bins)?;
            sink.push("tfidf", prompt_id, "f1", cell.detection.f1);
            sink.push("tfidf", prompt_id, "precision", cell.detection.precision);
            sink.push("tfidf", prompt_id, "recall", cell.detection.recall);
            sink.push("tfidf", prompt_id, "overlap", cell.histogram.overlap);
            sink.push("tfidf", prompt_id, "threshold", cell.threshold.delta);
            write_histogram(
                &out.join("histograms").join(format!("tfidf-{prompt_id}.csv")),
                &cell.histogram,
            )?;
        }
    }

    write_metrics_csv(&out.join("metrics.csv"), &config.dataset_name, &sink)?;

    let mut mean_f1 = BTreeMap::new();
    let mut mean_qwk = BTreeMap::new();
    for &kind in &models {
        if let Some(f1) = sink.mean_of(kind.as_str(), "f1") {
            mean_f1.insert(kind.as_str().to_string(), f1);
        }
        if let Some(q) = sink.mean_of(kind.as_str(), "qwk") {
            mean_qwk.insert(kind.as_str().to_string(), q);
        }
    }
    if config.include_tfidf {
        if let Some(f1) = sink.mean_of("tfidf", "f1") {
            mean_f1.insert("tfidf".to_string(), f1);
        }
    }

    let mut directional = BTreeMap::new();
    if let (Some(&a), Some(&b)) = (mean_f1.get("aoes"), mean_f1.get("aoes-no-trm")) {
        directional.insert("aoes_f1_ge_no_trm".to_string(), a >= b);
    }
    if let (Some(&a), Some(&b)) = (mean_f1.get("aoes"), mean_f1.get("aoes-l2")) {
        directional.insert("aoes_f1_ge_l2".to_string(), a >= b);
    }
    if let (Some(&a), Some(&b)) = (mean_qwk.get("aoes"), mean_qwk.get("aoes-no-trm")) {
        directional.insert("aoes_qwk_ge_no_trm".to_string(), a >= b);
    }

    let adversarial_f1: BTreeMap<String, f64> = adversarial
        .into_iter()
        .map(|(k, v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (k, mean)
        })
        .collect();

    let report = BenchReport {
        dataset: config.dataset_name.clone(),
        prompts,
        mean_off_topic_f1: mean_f1,
        mean_qwk,
        directional,
        adversarial_f1,
        threshold_mode: config.threshold_mode,
    };
    let mut report_text = serde_json::to_string_pretty(&report)?;
    report_text.push('\n');
    std::fs::write(out.join("report.json"), report_text)?;

    write_run_manifest(config, out)?;

    // Timestamps live only here so everything else stays byte-identical
    // across reruns.
    let end_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "started_unix": start_unix,
        "finished_unix": end_unix,
        "elapsed_secs": started.elapsed().as_secs_f64(),
    });
    std::fs::write(out.join("meta.json"), format!("{meta:#}\n"))?;

    Ok(report)
}

fn check_budget(config: &BenchConfig, started: Instant) -> anyhow::Result<()> {
    if let Some(budget) = config.time_budget_secs {
        let elapsed = started.elapsed().as_secs();
        if elapsed > budget {
            anyhow::bail!("wall-clock budget of {budget}s exceeded ({elapsed}s elapsed)");
        }
    }
    Ok(())
}

fn materialize_corpus(config: &BenchConfig, out: &Path) -> anyhow::Result<Corpus> {
    match &config.corpus {
        CorpusSource::Synth(params) => {
            let synth = SynthConfig {
                n_prompts: params.n_prompts,
                essays_per_prompt: params.essays_per_prompt,
                vocab_shared: params.vocab_shared,
                vocab_per_topic: params.vocab_per_topic,
                quality_noise: params.quality_noise,
                seed: config.seed,
            };
            let corpus = synthesize(&synth)?;
            manifest::write_corpus_dir(&out.join("corpus"), &corpus)?;
            Ok(corpus)
        }
        CorpusSource::Path(path) => manifest::read_corpus_dir(path),
    }
}

/// Reuses a cell's checkpoint when one is already on disk (interrupted runs
/// resume); otherwise trains and persists it with its loss trace.
fn load_or_train(
    kind: ModelKind,
    data: &PromptData,
    cell_cfg: &CellConfig,
    seed: u64,
    out: &Path,
    prompt_id: &str,
) -> anyhow::Result<(Checkpoint, PathBuf)> {
    let stem = format!("{}-{}", kind.as_str(), prompt_id);
    let ckpt_path = out.join("models").join(format!("{stem}.ckpt"));
    if ckpt_path.exists() {
        let ckpt = checkpoint::read(&ckpt_path)?;
        if ckpt.kind != kind || ckpt.prompt.id != *prompt_id {
            anyhow::bail!(
                "existing checkpoint {} does not match cell {stem}; clean the output directory",
                ckpt_path.display()
            );
        }
        if ckpt.encoder.config.dim != cell_cfg.encoder.dim
            || ckpt.encoder.config.layers != cell_cfg.encoder.layers
        {
            anyhow::bail!(
                "existing checkpoint {} was trained with different hyperparameters; \
                 clean the output directory",
                ckpt_path.display()
            );
        }
        return Ok((ckpt, ckpt_path));
    }
    let (ckpt, steps) = pipeline::train_cell(kind, data, cell_cfg, seed)?;
    checkpoint::write(&ckpt_path, &ckpt)?;
    trace::write(&out.join("traces").join(format!("{stem}.csv")), &steps)?;
    Ok((ckpt, ckpt_path))
}

type StatsPair = (ontopic_core::oodstats::LayerStats, String);

fn load_or_fit_stats(
    ckpt: &Checkpoint,
    ckpt_path: &Path,
    data: &PromptData,
    config: &BenchConfig,
    out: &Path,
    prompt_id: &str,
) -> anyhow::Result<Option<StatsPair>> {
    if !ckpt.kind.uses_mahalanobis() {
        return Ok(None);
    }
    let stem = format!("{}-{}", ckpt.kind.as_str(), prompt_id);
    let stats_path = out.join("stats").join(format!("{stem}.stats"));
    let ckpt_hash = file_sha256(ckpt_path)?;
    if stats_path.exists() {
        let file = stats::read(&stats_path)?;
        if file.checkpoint_hash != ckpt_hash {
            anyhow::bail!(
                "existing stats {} do not match checkpoint {}; clean the output directory",
                stats_path.display(),
                ckpt_path.display()
            );
        }
        let hash = file_sha256(&stats_path)?;
        return Ok(Some((file.stats, hash)));
    }
    let fitted = pipeline::fit_cell_stats(ckpt, &data.on_train, config.include_embedding)?;
    stats::write(&stats_path, &fitted, &ckpt_hash)?;
    let hash = file_sha256(&stats_path)?;
    Ok(Some((fitted, hash)))
}

fn write_threshold(
    eval: &pipeline::CellEval,
    stats_hash: Option<&str>,
    out: &Path,
    stem: &str,
) -> anyhow::Result<()> {
    let hash = stats_hash.unwrap_or("");
    let file = match &eval.eer {
        Some(report) => threshold::ThresholdFile::from_eer(report, hash),
        None => threshold::ThresholdFile::from_quantile(&eval.threshold, hash),
    };
    threshold::write(&out.join("thresholds").join(format!("{stem}.json")), &file)
}

pub fn write_histogram(path: &Path, histogram: &HistogramReport) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "bin_low,bin_high,count_on,count_off")?;
    for bin in &histogram.bins {
        writeln!(out, "{},{},{},{}", fmt_f64(bin.low), fmt_f64(bin.high), bin.count_on, bin.count_off)?;
    }
    out.flush()?;
    Ok(())
}

fn write_metrics_csv(path: &Path, dataset: &str, sink: &MetricSink) -> anyhow::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "dataset,model,prompt,metric,value")?;
    for (model, prompt, metric, value) in &sink.rows {
        writeln!(out, "{dataset},{model},{prompt},{metric},{value:.6}")?;
    }
    out.flush()?;
    Ok(())
}

/// The run manifest records the config and the content hash of every
/// artifact (excluding itself and the timestamp sidecar).
fn write_run_manifest(config: &BenchConfig, out: &Path) -> anyhow::Result<()> {
    let mut artifacts: BTreeMap<String, String> = BTreeMap::new();
    collect_hashes(out, out, &mut artifacts)?;
    artifacts.remove("manifest.json");
    artifacts.remove("meta.json");
    let manifest = serde_json::json!({
        "config": config,
        "seed_labels": {
            "corpus": "seed -> corpus/split (synthesizer)",
            "init": "seed -> init/<model>/<prompt>",
            "head": "seed -> head/<model>/<prompt>",
            "shuffle": "seed -> shuffle/<model>/<prompt>",
            "perturb": "seed -> perturb/<kind>/<prompt>/{dev,test}",
        },
        "artifacts": artifacts,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out.join("manifest.json"), text)?;
    Ok(())
}

fn collect_hashes(
    root: &Path,
    dir: &Path,
    out: &mut BTreeMap<String, String>,
) -> anyhow::Result<()> {
    let mut entries: Vec<PathBuf> =
        std::fs::read_dir(dir)?.map(|e| Ok(e?.path())).collect::<anyhow::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_hashes(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .replace('\\', "/");
            out.insert(rel, file_sha256(&path)?);
        }
    }
    Ok(())
}
