//! In-memory orchestration: per-prompt data assembly (with the disjoint
//! off-topic donor protocol), model training, detection scoring, threshold
//! calibration and per-cell evaluation. Commands wrap these functions with
//! file IO; the benchmark and the acceptance suite drive them directly.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use ontopic_core::adversary::{self, PerturbKind};
use ontopic_core::baselines::{self, ModelKind, TfIdf};
use ontopic_core::calibrate::{self, EerReport, Threshold, TopicClass};
use ontopic_core::corpus::{Corpus, Essay, Split, normalize_score};
use ontopic_core::encoder::{EncoderConfig, EncoderModel, Vocabulary, tokenize};
use ontopic_core::metrics::{self, AgreementReport, DetectionReport, HistogramReport};
use ontopic_core::oodstats::{self, LayerStats};
use ontopic_core::seed;
use ontopic_core::trm::{HeadEval, StepRecord, TrainConfig};

use crate::formats::checkpoint::Checkpoint;
use crate::formats::decisions::DecisionRow;

/// Caps on the off-topic pools, mirroring the usual few-hundred-sample
/// protocol. Zero means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffTopicCaps {
    pub train_cap: usize,
    pub test_cap: usize,
}

impl Default for OffTopicCaps {
    fn default() -> Self {
        Self { train_cap: 200, test_cap: 100 }
    }
}

/// One prompt's working data. Off-topic pools are drawn from *donor*
/// prompts: the first half of the other prompts feeds the train and dev
/// pools, the remaining half feeds the test pool, so models never see the
/// test-donor prompts during training or calibration.
#[derive(Debug, Clone)]
pub struct PromptData {
    pub prompt: ontopic_core::corpus::Prompt,
    pub on_train: Vec<Essay>,
    pub on_dev: Vec<Essay>,
    pub on_test: Vec<Essay>,
    pub off_train: Vec<Essay>,
    pub off_dev: Vec<Essay>,
    pub off_test: Vec<Essay>,
    pub train_donors: Vec<String>,
    pub test_donors: Vec<String>,
}

pub fn prompt_data(
    corpus: &Corpus,
    prompt_id: &str,
    caps: OffTopicCaps,
) -> anyhow::Result<PromptData> {
    let prompt = corpus
        .prompt(prompt_id)
        .ok_or_else(|| anyhow::anyhow!("prompt '{prompt_id}' not in corpus"))?
        .clone();
    let clone_all = |split: Split| -> Vec<Essay> {
        corpus.essays_in(prompt_id, split).into_iter().cloned().collect()
    };

    let others: Vec<&String> =
        corpus.prompts.keys().filter(|id| id.as_str() != prompt_id).collect();
    let half = others.len().div_ceil(2);
    let train_donors: Vec<String> = others[..half].iter().map(|s| (*s).clone()).collect();
    let mut test_donors: Vec<String> = others[half..].iter().map(|s| (*s).clone()).collect();
    if test_donors.is_empty() {
        // Two-prompt corpora cannot keep donor prompts disjoint; fall back
        // to disjoint essays of the same donor.
        test_donors = train_donors.clone();
    }

    let pool = |donors: &[String], split: Split, cap: usize| -> Vec<Essay> {
        let mut out = Vec::new();
        for donor in donors {
            out.extend(corpus.essays_in(donor, split).into_iter().cloned());
        }
        if cap > 0 {
            out.truncate(cap);
        }
        out
    };

    Ok(PromptData {
        prompt,
        on_train: clone_all(Split::Train),
        on_dev: clone_all(Split::Dev),
        on_test: clone_all(Split::Test),
        off_train: pool(&train_donors, Split::Train, caps.train_cap),
        off_dev: pool(&train_donors, Split::Dev, 0),
        off_test: pool(&test_donors, Split::Test, caps.test_cap),
        train_donors,
        test_donors,
    })
}

/// Hyperparameters shared by every benchmark cell.
#[derive(Debug, Clone)]
pub struct CellConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    /// Include the embedding layer's states in the detector features.
    pub include_embedding: bool,
}

/// Trains one (model kind, prompt) cell: vocabulary from the on-topic train
/// split, seeded encoder and head, the kind's loss.
pub fn train_cell(
    kind: ModelKind,
    data: &PromptData,
    cell: &CellConfig,
    global_seed: u64,
) -> anyhow::Result<(Checkpoint, Vec<StepRecord>)> {
    let scope = format!("{}/{}", kind.as_str(), data.prompt.id);
    let vocab = Vocabulary::build(data.on_train.iter().map(|e| e.text.as_str()));

    let mut enc_cfg = cell.encoder.clone();
    enc_cfg.seed = seed::derive(global_seed, &format!("init/{scope}"));
    let mut encoder = EncoderModel::init(enc_cfg, vocab.size());
    let mut head =
        kind.init_head(cell.encoder.dim, seed::derive(global_seed, &format!("head/{scope}")));

    let mut train_cfg = cell.train.clone();
    train_cfg.seed = seed::derive(global_seed, &format!("shuffle/{scope}"));

    let on_refs: Vec<&Essay> = data.on_train.iter().collect();
    let off_refs: Vec<&Essay> = data.off_train.iter().collect();
    let trace = baselines::train_kind(
        kind,
        &mut encoder,
        &mut head,
        &data.prompt,
        &on_refs,
        &off_refs,
        &vocab,
        &train_cfg,
    )?;

    let ckpt = Checkpoint { kind, prompt: data.prompt.clone(), vocab, encoder, head };
    Ok((ckpt, trace))
}

/// Fits the detector statistics of a trained checkpoint on its prompt's
/// on-topic train split.
pub fn fit_cell_stats(
    ckpt: &Checkpoint,
    on_train: &[Essay],
    include_embedding: bool,
) -> anyhow::Result<LayerStats> {
    let refs: Vec<&Essay> = on_train.iter().collect();
    let (stats, _) =
        oodstats::batch_extract_and_fit(&ckpt.encoder, &ckpt.vocab, &refs, include_embedding)?;
    Ok(stats)
}

/// Head outputs plus the model's detection score for one essay.
#[derive(Debug, Clone)]
pub struct ScoredEssay {
    pub essay_id: String,
    pub detection: f64,
    pub per_layer: Vec<f64>,
    pub eval: HeadEval,
}

pub fn score_essay(
    ckpt: &Checkpoint,
    stats: Option<&LayerStats>,
    essay: &Essay,
) -> anyhow::Result<ScoredEssay> {
    let ids = tokenize(&essay.text, &ckpt.vocab, ckpt.encoder.config.max_len)?;
    let cache = ckpt.encoder.forward(&ids)?;
    let eval = ckpt.head.eval(cache.pooled());
    let (detection, per_layer) = match (ckpt.kind.uses_mahalanobis(), stats) {
        (true, Some(stats)) => {
            let include_embedding = stats.layer_count() == ckpt.encoder.config.layers + 1;
            let features = cache.layer_features(include_embedding);
            let score = stats.distance(&features)?;
            (score.total, score.per_layer)
        }
        (true, None) => anyhow::bail!(
            "model kind '{}' detects via layer stats; no stats provided",
            ckpt.kind.as_str()
        ),
        (false, _) => {
            let score = baselines::head_detection_score(ckpt.kind, &eval)
                .expect("head-score model kinds always produce a detection score");
            (score, Vec::new())
        }
    };
    Ok(ScoredEssay { essay_id: essay.id.clone(), detection, per_layer, eval })
}

pub fn score_essays(
    ckpt: &Checkpoint,
    stats: Option<&LayerStats>,
    essays: &[Essay],
) -> anyhow::Result<Vec<ScoredEssay>> {
    essays.iter().map(|e| score_essay(ckpt, stats, e)).collect()
}

/// Turns scored essays into decision rows under a threshold.
pub fn decide_rows(scored: &[ScoredEssay], threshold: &Threshold, ckpt: &Checkpoint) -> Vec<DecisionRow> {
    scored
        .iter()
        .map(|s| {
            let d = calibrate::decide(&s.essay_id, s.detection, s.eval.y_s, threshold, &ckpt.prompt);
            DecisionRow {
                essay_id: s.essay_id.clone(),
                d_total: s.detection,
                per_layer: s.per_layer.clone(),
                y_h: s.eval.y_h,
                y_t: s.eval.y_t,
                y_s: s.eval.y_s,
                predicted_class: d.predicted_class,
                final_score: d.final_score,
            }
        })
        .collect()
}

/// Where the calibration scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Calibrate on the held-out dev split (default; no test leakage).
    DevEer,
    /// Calibrate on the test split itself. Matches the evaluation protocol
    /// the comparison numbers were reported under, at the cost of leaking
    /// test labels into the threshold; kept for comparison runs only.
    TestEer,
    /// Quantile of on-topic training distances; needs no off-topic data.
    Quantile(f64),
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::DevEer
    }
}

/// Full evaluation of one trained cell.
#[derive(Debug, Clone)]
pub struct CellEval {
    pub eer: Option<EerReport>,
    pub threshold: Threshold,
    pub detection: DetectionReport,
    /// Agreement of the raw predicted grades on gold-scored on-topic test
    /// essays, before any detection gating.
    pub scoring: Option<AgreementReport>,
    /// Agreement of the reported (post-detection) grades on the same
    /// essays; flagged on-topic essays count with grade zero.
    pub joint: Option<AgreementReport>,
    pub histogram: HistogramReport,
    pub decisions: Vec<DecisionRow>,
    pub n_layers: usize,
}

pub fn evaluate_cell(
    ckpt: &Checkpoint,
    stats: Option<&LayerStats>,
    data: &PromptData,
    mode: ThresholdMode,
    histogram_bins: usize,
) -> anyhow::Result<CellEval> {
    let on_test = score_essays(ckpt, stats, &data.on_test)?;
    let off_test = score_essays(ckpt, stats, &data.off_test)?;
    let (threshold, eer) = calibrate_threshold(ckpt, stats, data, mode, &on_test, &off_test)?;
    evaluate_with_threshold(ckpt, data, threshold, eer, &on_test, &off_test, histogram_bins)
}

fn calibrate_threshold(
    ckpt: &Checkpoint,
    stats: Option<&LayerStats>,
    data: &PromptData,
    mode: ThresholdMode,
    on_test: &[ScoredEssay],
    off_test: &[ScoredEssay],
) -> anyhow::Result<(Threshold, Option<EerReport>)> {
    match mode {
        ThresholdMode::DevEer => {
            let on_dev = score_essays(ckpt, stats, &data.on_dev)?;
            let off_dev = score_essays(ckpt, stats, &data.off_dev)?;
            let report = calibrate::calibrate_eer(
                &on_dev.iter().map(|s| s.detection).collect::<Vec<_>>(),
                &off_dev.iter().map(|s| s.detection).collect::<Vec<_>>(),
            )?;
            Ok((report.threshold.clone(), Some(report)))
        }
        ThresholdMode::TestEer => {
            let report = calibrate::calibrate_eer(
                &on_test.iter().map(|s| s.detection).collect::<Vec<_>>(),
                &off_test.iter().map(|s| s.detection).collect::<Vec<_>>(),
            )?;
            Ok((report.threshold.clone(), Some(report)))
        }
        ThresholdMode::Quantile(q) => {
            let on_train = score_essays(ckpt, stats, &data.on_train)?;
            let threshold = calibrate::calibrate_quantile(
                &on_train.iter().map(|s| s.detection).collect::<Vec<_>>(),
                q,
            )?;
            Ok((threshold, None))
        }
    }
}

fn evaluate_with_threshold(
    ckpt: &Checkpoint,
    data: &PromptData,
    threshold: Threshold,
    eer: Option<EerReport>,
    on_test: &[ScoredEssay],
    off_test: &[ScoredEssay],
    histogram_bins: usize,
) -> anyhow::Result<CellEval> {
    let on_rows = decide_rows(on_test, &threshold, ckpt);
    let off_rows = decide_rows(off_test, &threshold, ckpt);

    let mut pairs: Vec<(TopicClass, TopicClass)> = Vec::new();
    pairs.extend(on_rows.iter().map(|r| (r.predicted_class, TopicClass::OnTopic)));
    pairs.extend(off_rows.iter().map(|r| (r.predicted_class, TopicClass::OffTopic)));
    let detection = metrics::detection_metrics(&pairs);

    // Scoring agreement over gold-scored on-topic test essays.
    let mut pred_grades = Vec::new();
    let mut joint_grades = Vec::new();
    let mut gold_grades = Vec::new();
    for (essay, row) in data.on_test.iter().zip(&on_rows) {
        debug_assert_eq!(essay.id, row.essay_id);
        if let Some(gold) = essay.gold_score {
            gold_grades.push(gold);
            pred_grades.push(ontopic_core::corpus::denormalize_score(row.y_s, &data.prompt));
            joint_grades.push(row.final_score);
        }
    }
    let scoring = agreement_or_none(&pred_grades, &gold_grades, &data.prompt);
    let joint = agreement_or_none(&joint_grades, &gold_grades, &data.prompt);

    let histogram = metrics::histogram_report(
        &on_test.iter().map(|s| s.detection).collect::<Vec<_>>(),
        &off_test.iter().map(|s| s.detection).collect::<Vec<_>>(),
        histogram_bins,
    )?;

    let n_layers = on_rows.first().map_or(0, |r| r.per_layer.len());
    let mut decisions = on_rows;
    decisions.extend(off_rows);
    Ok(CellEval { eer, threshold, detection, scoring, joint, histogram, decisions, n_layers })
}

fn agreement_or_none(
    pred: &[i32],
    gold: &[i32],
    prompt: &ontopic_core::corpus::Prompt,
) -> Option<AgreementReport> {
    if pred.len() < 2 {
        return None;
    }
    metrics::agreement(pred, gold, prompt.score_min, prompt.score_max).ok()
}

/// TF-IDF comparison system: fits document frequencies on the on-topic
/// train split, scores essays by `1 - cosine` to the prompt keywords.
pub struct TfIdfCell {
    pub eer: Option<EerReport>,
    pub threshold: Threshold,
    pub detection: DetectionReport,
    pub histogram: HistogramReport,
}

pub fn evaluate_tfidf(
    data: &PromptData,
    mode: ThresholdMode,
    histogram_bins: usize,
) -> anyhow::Result<TfIdfCell> {
    let model = TfIdf::fit(data.on_train.iter().map(|e| e.text.as_str()));
    let repr = data.prompt.topic_keywords.join(" ");
    let score =
        |essays: &[Essay]| -> Vec<f64> {
            essays.iter().map(|e| baselines::tfidf_detection_score(&model, &repr, &e.text)).collect()
        };
    let on_test = score(&data.on_test);
    let off_test = score(&data.off_test);
    let (threshold, eer) = match mode {
        ThresholdMode::DevEer => {
            let report = calibrate::calibrate_eer(&score(&data.on_dev), &score(&data.off_dev))?;
            (report.threshold.clone(), Some(report))
        }
        ThresholdMode::TestEer => {
            let report = calibrate::calibrate_eer(&on_test, &off_test)?;
            (report.threshold.clone(), Some(report))
        }
        ThresholdMode::Quantile(q) => {
            (calibrate::calibrate_quantile(&score(&data.on_train), q)?, None)
        }
    };
    let mut pairs: Vec<(TopicClass, TopicClass)> = Vec::new();
    let classify = |s: f64| {
        if s <= threshold.delta { TopicClass::OnTopic } else { TopicClass::OffTopic }
    };
    pairs.extend(on_test.iter().map(|&s| (classify(s), TopicClass::OnTopic)));
    pairs.extend(off_test.iter().map(|&s| (classify(s), TopicClass::OffTopic)));
    let detection = metrics::detection_metrics(&pairs);
    let histogram = metrics::histogram_report(&on_test, &off_test, histogram_bins)?;
    Ok(TfIdfCell { eer, threshold, detection, histogram })
}

/// Perturbation settings as they appear in manifests and the benchmark
/// config. The tag picks the generator, fields tune its intensity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbSpec {
    AddSpeech {
        #[serde(default = "default_speech_k")]
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resource_path: Option<PathBuf>,
    },
    BabelGenerate {
        #[serde(default = "default_babel_sentences")]
        n_sentences: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_essays: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    RepeatSent {
        #[serde(default = "default_repeats")]
        n_repeats: usize,
        #[serde(default = "default_targets")]
        n_targets: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    ReplaceSents {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn default_speech_k() -> usize {
    3
}
fn default_babel_sentences() -> usize {
    8
}
fn default_repeats() -> usize {
    3
}
fn default_targets() -> usize {
    2
}

impl PerturbSpec {
    pub fn kind(&self) -> PerturbKind {
        match self {
            PerturbSpec::AddSpeech { .. } => PerturbKind::AddSpeech,
            PerturbSpec::BabelGenerate { .. } => PerturbKind::BabelGenerate,
            PerturbSpec::RepeatSent { .. } => PerturbKind::RepeatSent,
            PerturbSpec::ReplaceSents { .. } => PerturbKind::ReplaceSents,
        }
    }

    pub fn seed_override(&self) -> Option<u64> {
        match self {
            PerturbSpec::AddSpeech { seed, .. }
            | PerturbSpec::BabelGenerate { seed, .. }
            | PerturbSpec::RepeatSent { seed, .. }
            | PerturbSpec::ReplaceSents { seed } => *seed,
        }
    }

    /// The default benchmark roster: one spec per generator.
    pub fn default_roster() -> Vec<PerturbSpec> {
        vec![
            PerturbSpec::AddSpeech { k: default_speech_k(), seed: None, resource_path: None },
            PerturbSpec::BabelGenerate {
                n_sentences: default_babel_sentences(),
                n_essays: None,
                seed: None,
            },
            PerturbSpec::RepeatSent {
                n_repeats: default_repeats(),
                n_targets: default_targets(),
                seed: None,
            },
            PerturbSpec::ReplaceSents { seed: None },
        ]
    }
}

/// Applies one perturbation spec to a set of target essays. Donors must
/// come from other prompts (used by sentence replacement); keywords drive
/// gibberish generation; essays that are structurally too short for a
/// generator are skipped.
pub fn apply_perturbation(
    spec: &PerturbSpec,
    targets: &[Essay],
    donors: &[Essay],
    keywords: &[String],
    speech: &[String],
    base_seed: u64,
    prompt_id: &str,
) -> anyhow::Result<Vec<Essay>> {
    let seed_root = spec.seed_override().unwrap_or(base_seed);
    let mut out = Vec::new();
    match spec {
        PerturbSpec::AddSpeech { k, .. } => {
            for (i, essay) in targets.iter().enumerate() {
                let s = seed::derive_indexed(seed_root, "essay", i as u64);
                out.push(adversary::add_speech(essay, speech, *k, s)?);
            }
        }
        PerturbSpec::BabelGenerate { n_sentences, n_essays, .. } => {
            let obscure: Vec<String> =
                adversary::OBSCURE_WORDS.iter().map(|w| w.to_string()).collect();
            let count = n_essays.unwrap_or(targets.len()).max(1);
            for i in 0..count {
                let s = seed::derive_indexed(seed_root, "essay", i as u64);
                let text = adversary::babel_generate(keywords, &obscure, *n_sentences, s)?;
                out.push(Essay {
                    id: format!("{prompt_id}-babel-{i:04}"),
                    prompt_id: prompt_id.to_string(),
                    text,
                    gold_score: None,
                    split: Split::Test,
                });
            }
        }
        PerturbSpec::RepeatSent { n_repeats, n_targets, .. } => {
            for (i, essay) in targets.iter().enumerate() {
                let s = seed::derive_indexed(seed_root, "essay", i as u64);
                out.push(adversary::repeat_sent(essay, *n_repeats, *n_targets, s)?);
            }
        }
        PerturbSpec::ReplaceSents { .. } => {
            for (i, essay) in targets.iter().enumerate() {
                let s = seed::derive_indexed(seed_root, "essay", i as u64);
                match adversary::replace_sents(essay, donors, s) {
                    Ok(e) => out.push(e),
                    // Essays with fewer than three sentences cannot keep
                    // first and last while replacing a body; skip them.
                    Err(adversary::AdversaryError::TooShortEssay { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    if out.is_empty() {
        anyhow::bail!("perturbation {} produced no essays", spec.kind().as_str());
    }
    Ok(out)
}

/// Adversarial evaluation of one trained cell against one perturbation:
/// calibrates on perturbed dev essays, evaluates on perturbed test essays.
pub struct AdversarialEval {
    pub kind: PerturbKind,
    pub eer: EerReport,
    pub detection: DetectionReport,
    pub histogram: HistogramReport,
    pub decisions: Vec<DecisionRow>,
    pub n_layers: usize,
}

pub fn evaluate_adversarial(
    ckpt: &Checkpoint,
    stats: Option<&LayerStats>,
    data: &PromptData,
    spec: &PerturbSpec,
    global_seed: u64,
    histogram_bins: usize,
) -> anyhow::Result<AdversarialEval> {
    let speech = adversary::default_speech_sentences();
    let kind = spec.kind();
    let scope = format!("perturb/{}/{}", kind.as_str(), data.prompt.id);
    let dev_seed = seed::derive(global_seed, &format!("{scope}/dev"));
    let test_seed = seed::derive(global_seed, &format!("{scope}/test"));

    // Dev-side perturbations calibrate the threshold; donors come from the
    // train-donor prompts so the test donors stay unseen.
    let adv_dev = apply_perturbation(
        spec,
        &data.on_dev,
        &data.off_dev,
        &data.prompt.topic_keywords,
        &speech,
        dev_seed,
        &data.prompt.id,
    )?;
    let adv_test = apply_perturbation(
        spec,
        &data.on_test,
        &data.off_test,
        &data.prompt.topic_keywords,
        &speech,
        test_seed,
        &data.prompt.id,
    )?;

    let on_dev = score_essays(ckpt, stats, &data.on_dev)?;
    let adv_dev_scores = score_essays(ckpt, stats, &adv_dev)?;
    let eer = calibrate::calibrate_eer(
        &on_dev.iter().map(|s| s.detection).collect::<Vec<_>>(),
        &adv_dev_scores.iter().map(|s| s.detection).collect::<Vec<_>>(),
    )?;

    let on_test = score_essays(ckpt, stats, &data.on_test)?;
    let adv_test_scores = score_essays(ckpt, stats, &adv_test)?;
    let threshold = eer.threshold.clone();
    let on_rows = decide_rows(&on_test, &threshold, ckpt);
    let adv_rows = decide_rows(&adv_test_scores, &threshold, ckpt);

    let mut pairs: Vec<(TopicClass, TopicClass)> = Vec::new();
    pairs.extend(on_rows.iter().map(|r| (r.predicted_class, TopicClass::OnTopic)));
    pairs.extend(adv_rows.iter().map(|r| (r.predicted_class, TopicClass::OffTopic)));
    let detection = metrics::detection_metrics(&pairs);

    let histogram = metrics::histogram_report(
        &on_test.iter().map(|s| s.detection).collect::<Vec<_>>(),
        &adv_test_scores.iter().map(|s| s.detection).collect::<Vec<_>>(),
        histogram_bins,
    )?;

    let n_layers = on_rows.first().map_or(0, |r| r.per_layer.len());
    let mut decisions = on_rows;
    decisions.extend(adv_rows);
    Ok(AdversarialEval { kind, eer, detection, histogram, decisions, n_layers })
}

/// Tokenized detection scores of the on-topic train split, the input to
/// quantile calibration.
pub fn train_split_distances(
    ckpt: &Checkpoint,
    stats: &LayerStats,
    data: &PromptData,
) -> anyhow::Result<Vec<f64>> {
    Ok(score_essays(ckpt, Some(stats), &data.on_train)?
        .iter()
        .map(|s| s.detection)
        .collect())
}

/// Normalized gold target of an essay, when it has one.
pub fn normalized_target(essay: &Essay, prompt: &ontopic_core::corpus::Prompt) -> Option<f64> {
    essay.gold_score.and_then(|g| normalize_score(g, prompt).ok())
}
