//! Comparison systems and ablations. All five trainable variants share the
//! encoder, the training loop, the calibration path and the metrics; they
//! differ only in head shape, loss and detection-score definition, so
//! benchmark differences isolate exactly those choices.
//!
//! - `aoes`: gated head, hybrid log loss, Mahalanobis detection
//! - `aoes-no-trm`: single linear head, MSE, Mahalanobis detection
//! - `aoes-l2`: gated head with the squared gate regularizer, Mahalanobis
//! - `baseline1`: linear head trained with off-topic essays forced to grade
//!   zero; detection thresholds the predicted score itself
//! - `baseline2`: multi-task regression + on/off classifier; detection
//!   thresholds the classifier probability
//!
//! The untrained TF-IDF similarity detector rounds out the comparison set.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Essay, Prompt, normalize_score};
use crate::encoder::{EncoderModel, Vocabulary, tokenize};
use crate::trm::{Head, HeadEval, LossSpec, StepRecord, TrainConfig, TrainError, TrainSample, train};
use crate::{num, text};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("model kind requires labeled off-topic training essays")]
    MissingOffTopicTrain,
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// The trainable model roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Aoes,
    AoesNoTrm,
    AoesL2,
    Baseline1,
    Baseline2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Aoes,
        ModelKind::AoesNoTrm,
        ModelKind::AoesL2,
        ModelKind::Baseline1,
        ModelKind::Baseline2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Aoes => "aoes",
            ModelKind::AoesNoTrm => "aoes-no-trm",
            ModelKind::AoesL2 => "aoes-l2",
            ModelKind::Baseline1 => "baseline1",
            ModelKind::Baseline2 => "baseline2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Supervised baselines consume labeled off-topic training essays; the
    /// main model and its ablations train on on-topic data only.
    pub fn needs_off_topic_train(self) -> bool {
        matches!(self, ModelKind::Baseline1 | ModelKind::Baseline2)
    }

    /// Whether detection runs on summed layer-wise Mahalanobis distances
    /// (otherwise the head itself supplies the detection score).
    pub fn uses_mahalanobis(self) -> bool {
        matches!(self, ModelKind::Aoes | ModelKind::AoesNoTrm | ModelKind::AoesL2)
    }

    pub fn loss(self, lambda: f64) -> LossSpec {
        match self {
            ModelKind::Aoes => LossSpec::HybridLog { lambda },
            ModelKind::AoesL2 => LossSpec::HybridSquared { lambda },
            ModelKind::AoesNoTrm | ModelKind::Baseline1 => LossSpec::Mse,
            ModelKind::Baseline2 => LossSpec::MseTopicBce,
        }
    }

    pub fn init_head(self, dim: usize, head_seed: u64) -> Head {
        match self {
            ModelKind::Aoes | ModelKind::AoesL2 => Head::init_gated(dim, head_seed),
            ModelKind::AoesNoTrm | ModelKind::Baseline1 => Head::init_linear(dim, head_seed),
            ModelKind::Baseline2 => Head::init_dual(dim, head_seed),
        }
    }
}

/// Detection score carried by the head itself, where the model kind defines
/// one. Higher means more off-topic. Mahalanobis kinds return `None`; their
/// score comes from fitted layer statistics.
pub fn head_detection_score(kind: ModelKind, eval: &HeadEval) -> Option<f64> {
    match kind {
        // Off-topic training essays were forced to grade zero, so a low
        // predicted score is the off-topic signal.
        ModelKind::Baseline1 => Some(-eval.y_s),
        ModelKind::Baseline2 => Some(1.0 - eval.topic_prob.expect("dual head")),
        _ => None,
    }
}

/// Tokenized training set for one prompt and model kind: the prompt's
/// on-topic train split plus, for the supervised baselines, off-topic
/// essays with their target forced to the bottom of the scale.
pub fn assemble_training_samples(
    kind: ModelKind,
    prompt: &Prompt,
    on_train: &[&Essay],
    off_train: &[&Essay],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<TrainSample>, BaselineError> {
    let mut samples = Vec::new();
    for essay in on_train {
        let Some(gold) = essay.gold_score else { continue };
        let Ok(target) = normalize_score(gold, prompt) else { continue };
        let ids = tokenize(&essay.text, vocab, max_len).map_err(TrainError::from)?;
        samples.push(TrainSample { ids, target, on_topic: true });
    }
    if kind.needs_off_topic_train() {
        if off_train.is_empty() {
            return Err(BaselineError::MissingOffTopicTrain);
        }
        for essay in off_train {
            let ids = tokenize(&essay.text, vocab, max_len).map_err(TrainError::from)?;
            samples.push(TrainSample { ids, target: 0.0, on_topic: false });
        }
    }
    if samples.is_empty() {
        return Err(BaselineError::Train(TrainError::NoTrainingData));
    }
    Ok(samples)
}

/// Trains one model variant end to end. The head must match the kind (see
/// [`ModelKind::init_head`]).
pub fn train_kind(
    kind: ModelKind,
    encoder: &mut EncoderModel,
    head: &mut Head,
    prompt: &Prompt,
    on_train: &[&Essay],
    off_train: &[&Essay],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<Vec<StepRecord>, BaselineError> {
    let samples = assemble_training_samples(
        kind,
        prompt,
        on_train,
        off_train,
        vocab,
        encoder.config.max_len,
    )?;
    Ok(train(encoder, head, &samples, kind.loss(config.lambda), config)?)
}

/// Inverse-document-frequency table fitted on training text.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdf {
    idf: BTreeMap<String, f64>,
    n_docs: usize,
}

impl TfIdf {
    /// Fits document frequencies. IDF uses the smoothed form
    /// `ln((1 + N) / (1 + df)) + 1`, so terms unseen at fit time still get
    /// a finite weight.
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0usize;
        for doc in docs {
            n_docs += 1;
            let mut seen: Vec<String> = content_words(doc);
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_default() += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(term, count)| (term, Self::idf_value(n_docs, count)))
            .collect();
        Self { idf, n_docs }
    }

    fn idf_value(n_docs: usize, df: usize) -> f64 {
        num::ln((1.0 + n_docs as f64) / (1.0 + df as f64)) + 1.0
    }

    pub fn idf(&self, term: &str) -> f64 {
        self.idf
            .get(term)
            .copied()
            .unwrap_or_else(|| Self::idf_value(self.n_docs, 0))
    }

    /// Raw term counts weighted by IDF.
    pub fn vector(&self, text_in: &str) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for w in content_words(text_in) {
            *tf.entry(w).or_default() += 1.0;
        }
        tf.into_iter().map(|(term, count)| { let w = count * self.idf(&term); (term, w) }).collect()
    }

    /// Cosine similarity between the TF-IDF vectors of a prompt
    /// representation and an essay; 0 when either vector is empty.
    pub fn similarity(&self, prompt_repr: &str, essay_text: &str) -> f64 {
        cosine(&self.vector(prompt_repr), &self.vector(essay_text))
    }
}

/// Word tokens only; punctuation tokens carry no content.
fn content_words(text_in: &str) -> Vec<String> {
    text::words(text_in)
        .into_iter()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .collect()
}

pub fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut dot = 0.0;
    let mut norm_a = 0.0;
    for (term, &wa) in a {
        norm_a += wa * wa;
        if let Some(&wb) = b.get(term) {
            dot += wa * wb;
        }
    }
    let norm_b: f64 = b.values().map(|w| w * w).sum();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (num::sqrt(norm_a) * num::sqrt(norm_b))
}

/// Detection score of the TF-IDF comparison system: one minus the cosine
/// similarity to the prompt representation.
pub fn tfidf_detection_score(model: &TfIdf, prompt_repr: &str, essay_text: &str) -> f64 {
    1.0 - model.similarity(prompt_repr, essay_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, SynthConfig, synthesize};
    use crate::encoder::EncoderConfig;
    use crate::seed;
    use crate::trm::batch_loss_and_grads;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::Rng;

    #[test]
    fn kind_strings_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(ModelKind::parse(kind.as_str()), Some(kind));
        }
        assert_eq!(ModelKind::parse("bert"), None);
    }

    fn fixture() -> (crate::corpus::Corpus, Vocabulary) {
        let corpus = synthesize(&SynthConfig {
            n_prompts: 2,
            essays_per_prompt: 60,
            ..SynthConfig::default()
        })
        .unwrap();
        let texts: Vec<&str> = corpus
            .essays_in("p1", Split::Train)
            .iter()
            .map(|e| e.text.as_str())
            .collect();
        let vocab = Vocabulary::build(texts);
        (corpus, vocab)
    }

    #[test]
    fn baseline1_forces_off_topic_targets_to_zero() {
        let (corpus, vocab) = fixture();
        let prompt = corpus.prompt("p1").unwrap();
        let on = corpus.essays_in("p1", Split::Train);
        let off = corpus.essays_in("p2", Split::Train);
        let samples = assemble_training_samples(
            ModelKind::Baseline1,
            prompt,
            &on,
            &off,
            &vocab,
            64,
        )
        .unwrap();
        let off_samples: Vec<_> = samples.iter().filter(|s| !s.on_topic).collect();
        assert_eq!(off_samples.len(), off.len());
        assert!(off_samples.iter().all(|s| s.target == 0.0));
        assert!(samples.iter().filter(|s| s.on_topic).all(|s| (0.0..=1.0).contains(&s.target)));
    }

    #[test]
    fn supervised_kinds_demand_off_topic_data() {
        let (corpus, vocab) = fixture();
        let prompt = corpus.prompt("p1").unwrap();
        let on = corpus.essays_in("p1", Split::Train);
        for kind in [ModelKind::Baseline1, ModelKind::Baseline2] {
            assert!(matches!(
                assemble_training_samples(kind, prompt, &on, &[], &vocab, 64),
                Err(BaselineError::MissingOffTopicTrain)
            ));
        }
        // The unsupervised kinds do not.
        for kind in [ModelKind::Aoes, ModelKind::AoesNoTrm, ModelKind::AoesL2] {
            assert!(assemble_training_samples(kind, prompt, &on, &[], &vocab, 64).is_ok());
        }
    }

    #[test]
    fn baseline1_detection_orders_by_predicted_score() {
        let low = HeadEval { y_h: 0.05, y_t: None, gate_pre: None, y_s: 0.05, topic_prob: None };
        let high = HeadEval { y_h: 0.8, y_t: None, gate_pre: None, y_s: 0.8, topic_prob: None };
        let s_low = head_detection_score(ModelKind::Baseline1, &low).unwrap();
        let s_high = head_detection_score(ModelKind::Baseline1, &high).unwrap();
        // The lower predicted score must be flagged first at any threshold.
        assert!(s_low > s_high);
    }

    #[test]
    fn baseline2_classifier_at_zero_logit_is_even() {
        let head = Head::Dual {
            score: crate::trm::Affine::zeros(4),
            topic: crate::trm::Affine::zeros(4),
        };
        let eval = head.eval(&[0.2, -0.4, 0.1, 0.9]);
        assert_eq!(eval.topic_prob, Some(0.5));
        assert_eq!(head_detection_score(ModelKind::Baseline2, &eval), Some(0.5));
    }

    #[test]
    fn dual_head_joint_loss_vanishes_only_on_perfect_batches() {
        let (corpus, vocab) = fixture();
        let config = EncoderConfig { dim: 8, layers: 2, max_len: 64, positional: false, seed: 5 };
        let encoder = EncoderModel::init(config, vocab.size());
        let essay = corpus.essays_in("p1", Split::Train)[0];
        let ids = tokenize(&essay.text, &vocab, 64).unwrap();

        let target = 0.4;
        // Score branch hits the target exactly; classifier logit saturates
        // toward the on-topic label.
        let head = Head::Dual {
            score: crate::trm::Affine { w: vec![0.0; 8], b: target },
            topic: crate::trm::Affine { w: vec![0.0; 8], b: 40.0 },
        };
        let sample = TrainSample { ids: ids.clone(), target, on_topic: true };
        let (loss, _, _) =
            batch_loss_and_grads(&encoder, &head, &[&sample], LossSpec::MseTopicBce).unwrap();
        assert!(loss.total < 1e-12, "loss {}", loss.total);

        let wrong = TrainSample { ids, target, on_topic: false };
        let (loss, _, _) =
            batch_loss_and_grads(&encoder, &head, &[&wrong], LossSpec::MseTopicBce).unwrap();
        assert!(loss.total > 1.0);
    }

    #[test]
    fn dual_head_gradients_match_finite_differences() {
        let config = EncoderConfig { dim: 8, layers: 2, max_len: 32, positional: false, seed: 6 };
        let encoder = EncoderModel::init(config, 20);
        let mut head = Head::init_dual(8, seed::derive(6, "head"));
        let mut rng = seed::rng(seed::derive(6, "fd"));
        let samples: Vec<TrainSample> = (0..4)
            .map(|i| TrainSample {
                ids: (0..rng.random_range(3..8)).map(|_| rng.random_range(0..20)).collect(),
                target: rng.random_range(0.0..1.0),
                on_topic: i % 2 == 0,
            })
            .collect();
        let batch: Vec<&TrainSample> = samples.iter().collect();

        let (_, enc_grads, head_grads) =
            batch_loss_and_grads(&encoder, &head, &batch, LossSpec::MseTopicBce).unwrap();
        let mut analytic = Vec::new();
        enc_grads.flatten_into(&mut analytic);
        head_grads.flatten_into(&mut analytic);

        let mut flat = Vec::new();
        encoder.flatten_into(&mut flat);
        head.flatten_into(&mut flat);
        let enc_len = encoder.param_count();
        let mut probe = encoder.clone();
        let step = 1e-5;
        let mut worst = 0.0f64;
        for p in 0..flat.len() {
            let orig = flat[p];
            let mut eval = |value: f64, flat: &mut [f64]| {
                flat[p] = value;
                probe.assign_from_flat(&flat[..enc_len]);
                head.assign_from_flat(&flat[enc_len..]);
                batch_loss_and_grads(&probe, &head, &batch, LossSpec::MseTopicBce)
                    .unwrap()
                    .0
                    .total
            };
            let up = eval(orig + step, &mut flat);
            let down = eval(orig - step, &mut flat);
            flat[p] = orig;
            let numeric = (up - down) / (2.0 * step);
            let denom = analytic[p].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[p] - numeric).abs() / denom);
        }
        assert!(worst <= 1e-4, "max rel error {worst}");
    }

    #[test]
    fn linear_head_reports_the_raw_score_and_no_topic_trace() {
        let (corpus, vocab) = fixture();
        let prompt = corpus.prompt("p1").unwrap();
        let config = EncoderConfig { dim: 8, layers: 2, max_len: 64, positional: false, seed: 7 };
        let mut encoder = EncoderModel::init(config, vocab.size());
        let mut head = ModelKind::AoesNoTrm.init_head(8, seed::derive(7, "head"));
        let on = corpus.essays_in("p1", Split::Train);
        let trace = train_kind(
            ModelKind::AoesNoTrm,
            &mut encoder,
            &mut head,
            prompt,
            &on[..20.min(on.len())],
            &[],
            &vocab,
            &TrainConfig { epochs: 1, warmup_steps: 5, ..TrainConfig::default() },
        )
        .unwrap();
        assert!(trace.iter().all(|r| r.topic.is_none()));
        let essay = on[0];
        let ids = tokenize(&essay.text, &vocab, 64).unwrap();
        let cache = encoder.forward(&ids).unwrap();
        let eval = head.eval(cache.pooled());
        assert_eq!(eval.y_s, eval.y_h);
        assert_eq!(eval.y_t, None);
    }

    #[test]
    fn layer_stats_do_not_depend_on_the_head() {
        // The detector consumes encoder features only, so the no-gate
        // ablation shares the exact stats pipeline.
        let (corpus, vocab) = fixture();
        let config = EncoderConfig { dim: 8, layers: 2, max_len: 64, positional: false, seed: 8 };
        let encoder = EncoderModel::init(config, vocab.size());
        let essays = corpus.essays_in("p1", Split::Train);
        let (a, _) = crate::oodstats::batch_extract_and_fit(&encoder, &vocab, &essays, false).unwrap();
        let (b, _) = crate::oodstats::batch_extract_and_fit(&encoder, &vocab, &essays, false).unwrap();
        for (ga, gb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(ga.mean, gb.mean);
            assert_eq!(ga.cov, gb.cov);
        }
    }

    #[test]
    fn tfidf_identical_and_disjoint_texts() {
        let model = TfIdf::fit(["alpha beta gamma", "alpha delta", "beta gamma epsilon"]);
        let sim = model.similarity("alpha beta gamma", "alpha beta gamma");
        assert!((sim - 1.0).abs() < 1e-12);
        assert_eq!(model.similarity("alpha beta", "zeta theta"), 0.0);
        assert_eq!(tfidf_detection_score(&model, "alpha beta", "zeta theta"), 1.0);
    }

    #[test]
    fn tfidf_matches_hand_computed_weights() {
        // Corpus: d1 = "apple banana", d2 = "apple cherry",
        // d3 = "banana banana durian". N = 3, df(apple) = df(banana) = 2,
        // df(cherry) = df(durian) = 1.
        let model = TfIdf::fit(["apple banana", "apple cherry", "banana banana durian"]);
        let idf_common = num::ln(4.0 / 3.0) + 1.0;
        let idf_rare = num::ln(2.0) + 1.0;
        assert!((model.idf("apple") - idf_common).abs() < 1e-15);
        assert!((model.idf("durian") - idf_rare).abs() < 1e-15);

        // cosine(d1, d2) with tf = raw counts:
        // dot = idf_common^2, |d1| = idf_common * sqrt(2),
        // |d2| = sqrt(idf_common^2 + idf_rare^2).
        let expected = idf_common * idf_common
            / (idf_common * num::sqrt(2.0) * num::sqrt(idf_common * idf_common + idf_rare * idf_rare));
        let got = model.similarity("apple banana", "apple cherry");
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");

        // Repeated terms raise tf: d3 against "banana" alone.
        let v3 = model.vector("banana banana durian");
        assert!((v3["banana"] - 2.0 * idf_common).abs() < 1e-15);
    }

    #[test]
    fn tfidf_ranks_on_topic_essays_above_off_topic() {
        let (corpus, _) = fixture();
        let p1 = corpus.prompt("p1").unwrap();
        let train_texts: Vec<&str> = corpus
            .essays_in("p1", Split::Train)
            .iter()
            .map(|e| e.text.as_str())
            .collect();
        let model = TfIdf::fit(train_texts);
        let repr = p1.topic_keywords.join(" ");
        let on_scores: Vec<f64> = corpus
            .essays_in("p1", Split::Test)
            .iter()
            .map(|e| tfidf_detection_score(&model, &repr, &e.text))
            .collect();
        let off_scores: Vec<f64> = corpus
            .essays_in("p2", Split::Test)
            .iter()
            .map(|e| tfidf_detection_score(&model, &repr, &e.text))
            .collect();
        assert!(num::mean(&off_scores) > num::mean(&on_scores));
    }
}
