//! Scoring heads and training.
//!
//! The main head decomposes the essay score into two branches over the
//! pooled encoder output: a raw regression score `y_h` and a sigmoid gate
//! `y_t` in (0, 1); the reported score is their product `y_s = y_t * y_h`.
//! Training minimizes a hybrid loss: mean squared error on `y_s` plus a
//! topic regularizer `-mean log y_t` that pushes the gate toward 1 on
//! on-topic data. The gate is never used as a classifier; detection happens
//! in `oodstats`.
//!
//! The same loop trains every model variant (gate ablations and the
//! supervised baselines) by switching the head shape and loss.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::seq::SliceRandom;

use crate::corpus::{Corpus, Split, normalize_score};
use crate::encoder::{EncoderError, EncoderGrads, EncoderModel, UpstreamGrad, Vocabulary, tokenize};
use crate::{num, seed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("gate output saturated to {value} (overflow)")]
    DegenerateGate { value: f64 },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("batch is empty or sizes mismatch")]
    EmptyBatch,
    #[error("no training samples with gold scores")]
    NoTrainingData,
    #[error("loss {0:?} does not match the head shape")]
    HeadLossMismatch(LossSpec),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// Affine map from the pooled vector to a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Affine {
    pub fn zeros(dim: usize) -> Self {
        Self { w: vec![0.0; dim], b: 0.0 }
    }

    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: (0..dim).map(|_| rng.random_range(-0.05..0.05)).collect(),
            b: rng.random_range(-0.05..0.05),
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.w, x) + self.b
    }

    fn accumulate(&mut self, d_out: f64, x: &[f64]) {
        for (w, &xi) in self.w.iter_mut().zip(x) {
            *w += d_out * xi;
        }
        self.b += d_out;
    }

    fn add_input_grad(&self, d_out: f64, d_x: &mut [f64]) {
        for (g, &w) in d_x.iter_mut().zip(&self.w) {
            *g += d_out * w;
        }
    }
}

/// Two-branch head: `score` produces `y_h`, `gate` produces the logit of
/// `y_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrmHead {
    pub score: Affine,
    pub gate: Affine,
}

/// One forward evaluation of the two-branch head.
/// `y_s == y_t * y_h` holds exactly; `gate_pre` is the gate logit kept for
/// numerically safe loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrmOutput {
    pub y_h: f64,
    pub y_t: f64,
    pub y_s: f64,
    pub gate_pre: f64,
}

/// Evaluates the two-branch head on a pooled encoder output.
pub fn head_forward(head: &TrmHead, x: &[f64]) -> TrmOutput {
    let y_h = head.score.forward(x);
    let gate_pre = head.gate.forward(x);
    let y_t = num::sigmoid(gate_pre);
    TrmOutput { y_h, y_t, y_s: y_t * y_h, gate_pre }
}

/// Loss gradients for one output of the two-branch head, already chained
/// through the sigmoid onto the gate logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrmGrad {
    pub d_y_h: f64,
    pub d_gate_pre: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridLoss {
    pub mse: f64,
    pub topic: f64,
    pub total: f64,
}

/// Batch hybrid loss `mean (y_g - y_s)^2 + lambda * (-mean log y_t)` and its
/// gradients with respect to each output.
///
/// The topic term is evaluated as `softplus(-gate_pre)` so a gate close to 1
/// never produces `log(0)`. A gate that saturates to exactly 0 or 1 in
/// `f64` is reported as an overflow.
pub fn hybrid_loss(
    outputs: &[TrmOutput],
    targets: &[f64],
    lambda: f64,
) -> Result<(HybridLoss, Vec<TrmGrad>), TrainError> {
    hybrid_loss_impl(outputs, targets, lambda, GateLoss::Log)
}

/// Ablation variant: the topic term is `mean (1 - y_t)^2` instead of the
/// log form.
pub fn hybrid_loss_squared(
    outputs: &[TrmOutput],
    targets: &[f64],
    lambda: f64,
) -> Result<(HybridLoss, Vec<TrmGrad>), TrainError> {
    hybrid_loss_impl(outputs, targets, lambda, GateLoss::Squared)
}

enum GateLoss {
    Log,
    Squared,
}

fn hybrid_loss_impl(
    outputs: &[TrmOutput],
    targets: &[f64],
    lambda: f64,
    gate_loss: GateLoss,
) -> Result<(HybridLoss, Vec<TrmGrad>), TrainError> {
    if outputs.is_empty() || outputs.len() != targets.len() {
        return Err(TrainError::EmptyBatch);
    }
    let n = outputs.len() as f64;
    let mut mse = 0.0;
    let mut topic = 0.0;
    let mut grads = Vec::with_capacity(outputs.len());
    for (out, &target) in outputs.iter().zip(targets) {
        if out.y_t <= 0.0 || out.y_t >= 1.0 {
            return Err(TrainError::DegenerateGate { value: out.y_t });
        }
        let err = target - out.y_s;
        mse += err * err / n;
        let d_y_h = -(2.0 / n) * err * out.y_t;
        // d(mse)/d(y_t), then the chain rule through the sigmoid.
        let sig_prime = out.y_t * (1.0 - out.y_t);
        let mut d_gate_pre = -(2.0 / n) * err * out.y_h * sig_prime;
        match gate_loss {
            GateLoss::Log => {
                topic += num::softplus(-out.gate_pre) / n;
                // d(-log y_t)/d(gate_pre) = y_t - 1
                d_gate_pre += lambda / n * (out.y_t - 1.0);
            }
            GateLoss::Squared => {
                let miss = 1.0 - out.y_t;
                topic += miss * miss / n;
                d_gate_pre += lambda / n * (-2.0 * miss) * sig_prime;
            }
        }
        grads.push(TrmGrad { d_y_h, d_gate_pre });
    }
    let total = mse + lambda * topic;
    Ok((HybridLoss { mse, topic, total }, grads))
}

/// Head variants shared by all trained models. The same struct doubles as
/// the gradient accumulator for its own shape (see [`Head::zeros_like`]).
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Two-branch gated head.
    Gated(TrmHead),
    /// Single regression branch, `y_s = y_h`.
    Linear(Affine),
    /// Regression branch plus a binary on-topic classifier branch.
    Dual { score: Affine, topic: Affine },
}

/// One head evaluation in a shape-independent form.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadEval {
    pub y_h: f64,
    /// Gate value, gated heads only.
    pub y_t: Option<f64>,
    pub gate_pre: Option<f64>,
    /// The score the model reports.
    pub y_s: f64,
    /// Probability the essay is on-topic, dual heads only.
    pub topic_prob: Option<f64>,
}

impl Head {
    pub fn init_gated(dim: usize, head_seed: u64) -> Self {
        let mut rng = seed::rng(head_seed);
        Head::Gated(TrmHead { score: Affine::init(dim, &mut rng), gate: Affine::init(dim, &mut rng) })
    }

    pub fn init_linear(dim: usize, head_seed: u64) -> Self {
        let mut rng = seed::rng(head_seed);
        Head::Linear(Affine::init(dim, &mut rng))
    }

    pub fn init_dual(dim: usize, head_seed: u64) -> Self {
        let mut rng = seed::rng(head_seed);
        Head::Dual { score: Affine::init(dim, &mut rng), topic: Affine::init(dim, &mut rng) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Head::Gated(h) => h.score.w.len(),
            Head::Linear(a) => a.w.len(),
            Head::Dual { score, .. } => score.w.len(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let d = self.dim();
        match self {
            Head::Gated(_) => Head::Gated(TrmHead { score: Affine::zeros(d), gate: Affine::zeros(d) }),
            Head::Linear(_) => Head::Linear(Affine::zeros(d)),
            Head::Dual { .. } => Head::Dual { score: Affine::zeros(d), topic: Affine::zeros(d) },
        }
    }

    pub fn eval(&self, x: &[f64]) -> HeadEval {
        match self {
            Head::Gated(h) => {
                let out = head_forward(h, x);
                HeadEval {
                    y_h: out.y_h,
                    y_t: Some(out.y_t),
                    gate_pre: Some(out.gate_pre),
                    y_s: out.y_s,
                    topic_prob: None,
                }
            }
            Head::Linear(a) => {
                let y = a.forward(x);
                HeadEval { y_h: y, y_t: None, gate_pre: None, y_s: y, topic_prob: None }
            }
            Head::Dual { score, topic } => {
                let y = score.forward(x);
                let p = num::sigmoid(topic.forward(x));
                HeadEval { y_h: y, y_t: None, gate_pre: None, y_s: y, topic_prob: Some(p) }
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let d = self.dim() + 1;
        match self {
            Head::Linear(_) => d,
            Head::Gated(_) | Head::Dual { .. } => 2 * d,
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            Head::Gated(h) => {
                out.extend_from_slice(&h.score.w);
                out.push(h.score.b);
                out.extend_from_slice(&h.gate.w);
                out.push(h.gate.b);
            }
            Head::Linear(a) => {
                out.extend_from_slice(&a.w);
                out.push(a.b);
            }
            Head::Dual { score, topic } => {
                out.extend_from_slice(&score.w);
                out.push(score.b);
                out.extend_from_slice(&topic.w);
                out.push(topic.b);
            }
        }
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        let mut take_affine = |a: &mut Affine| {
            let w_len = a.w.len();
            a.w.copy_from_slice(&flat[pos..pos + w_len]);
            pos += w_len;
            a.b = flat[pos];
            pos += 1;
        };
        match self {
            Head::Gated(h) => {
                take_affine(&mut h.score);
                take_affine(&mut h.gate);
            }
            Head::Linear(a) => take_affine(a),
            Head::Dual { score, topic } => {
                take_affine(score);
                take_affine(topic);
            }
        }
        pos
    }
}

/// Which loss the training loop optimizes. Must match the head shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// MSE on `y_s` plus `lambda * (-mean log y_t)`; gated head.
    HybridLog { lambda: f64 },
    /// MSE on `y_s` plus `lambda * mean (1 - y_t)^2`; gated head.
    HybridSquared { lambda: f64 },
    /// Plain MSE on a single linear head.
    Mse,
    /// MSE on the score branch plus binary cross-entropy on the topic
    /// branch (on-topic = 1); dual head.
    MseTopicBce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the topic regularizer.
    pub lambda: f64,
    pub lr: f64,
    /// Steps of linear learning-rate warmup; constant afterwards.
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lambda: 0.6, lr: 5e-4, warmup_steps: 500, epochs: 20, batch_size: 16, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lambda >= 0.0) {
            return Err(TrainError::InvalidConfig("lambda must be >= 0"));
        }
        if !(self.lr > 0.0) {
            return Err(TrainError::InvalidConfig("lr must be > 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("epochs and batch_size must be positive"));
        }
        Ok(())
    }

    /// Learning rate at a zero-based step index: linear ramp over
    /// `warmup_steps`, constant afterwards.
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 || step + 1 >= self.warmup_steps {
            self.lr
        } else {
            self.lr * (step + 1) as f64 / self.warmup_steps as f64
        }
    }
}

/// One tokenized training sample.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub ids: Vec<u32>,
    /// Normalized gold score in [0, 1].
    pub target: f64,
    /// On-topic label; only the multi-task loss reads it.
    pub on_topic: bool,
}

/// Per-step entry of the loss trace. `topic` is absent for losses without a
/// second term.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub mse: f64,
    pub topic: Option<f64>,
    pub total: f64,
}

/// Batch loss components in trace form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub mse: f64,
    pub topic: Option<f64>,
    pub total: f64,
}

/// Computes the batch loss and all parameter gradients without updating
/// anything. The returned head has gradient values in place of parameters.
pub fn batch_loss_and_grads(
    encoder: &EncoderModel,
    head: &Head,
    batch: &[&TrainSample],
    loss: LossSpec,
) -> Result<(StepLoss, EncoderGrads, Head), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut enc_grads = EncoderGrads::zeros(encoder);
    let mut head_grads = head.zeros_like();
    let dim = head.dim();

    let step_loss = match (head, loss) {
        (Head::Gated(h), LossSpec::HybridLog { lambda })
        | (Head::Gated(h), LossSpec::HybridSquared { lambda }) => {
            let mut caches = Vec::with_capacity(batch.len());
            let mut outputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for sample in batch {
                let cache = encoder.forward(&sample.ids)?;
                outputs.push(head_forward(h, cache.pooled()));
                targets.push(sample.target);
                caches.push(cache);
            }
            let (loss_val, grads) = match loss {
                LossSpec::HybridLog { .. } => hybrid_loss(&outputs, &targets, lambda)?,
                _ => hybrid_loss_squared(&outputs, &targets, lambda)?,
            };
            let Head::Gated(hg) = &mut head_grads else { unreachable!() };
            for (cache, grad) in caches.iter().zip(&grads) {
                let x = cache.pooled();
                hg.score.accumulate(grad.d_y_h, x);
                hg.gate.accumulate(grad.d_gate_pre, x);
                let mut d_x = vec![0.0; dim];
                h.score.add_input_grad(grad.d_y_h, &mut d_x);
                h.gate.add_input_grad(grad.d_gate_pre, &mut d_x);
                enc_grads.add_assign(
                    &encoder.backward(cache, &UpstreamGrad { pooled: &d_x, layer_states: None }),
                );
            }
            StepLoss { mse: loss_val.mse, topic: Some(loss_val.topic), total: loss_val.total }
        }
        (Head::Linear(a), LossSpec::Mse) => {
            let mut mse = 0.0;
            for sample in batch {
                let cache = encoder.forward(&sample.ids)?;
                let x = cache.pooled();
                let y = a.forward(x);
                let err = sample.target - y;
                mse += err * err / n;
                let d_y = -(2.0 / n) * err;
                let Head::Linear(ag) = &mut head_grads else { unreachable!() };
                ag.accumulate(d_y, x);
                let mut d_x = vec![0.0; dim];
                a.add_input_grad(d_y, &mut d_x);
                enc_grads.add_assign(
                    &encoder.backward(&cache, &UpstreamGrad { pooled: &d_x, layer_states: None }),
                );
            }
            StepLoss { mse, topic: None, total: mse }
        }
        (Head::Dual { score, topic }, LossSpec::MseTopicBce) => {
            let mut mse = 0.0;
            let mut bce = 0.0;
            for sample in batch {
                let cache = encoder.forward(&sample.ids)?;
                let x = cache.pooled();
                let y = score.forward(x);
                let z = topic.forward(x);
                let label = if sample.on_topic { 1.0 } else { 0.0 };
                let err = sample.target - y;
                mse += err * err / n;
                bce += (num::softplus(z) - label * z) / n;
                let d_y = -(2.0 / n) * err;
                let d_z = (num::sigmoid(z) - label) / n;
                let Head::Dual { score: sg, topic: tg } = &mut head_grads else { unreachable!() };
                sg.accumulate(d_y, x);
                tg.accumulate(d_z, x);
                let mut d_x = vec![0.0; dim];
                score.add_input_grad(d_y, &mut d_x);
                topic.add_input_grad(d_z, &mut d_x);
                enc_grads.add_assign(
                    &encoder.backward(&cache, &UpstreamGrad { pooled: &d_x, layer_states: None }),
                );
            }
            StepLoss { mse, topic: Some(bce), total: mse + bce }
        }
        _ => return Err(TrainError::HeadLossMismatch(loss)),
    };

    Ok((step_loss, enc_grads, head_grads))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(dim: usize) -> Self {
        Self { m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - libm::pow(ADAM_BETA1, self.t as f64);
        let b2t = 1.0 - libm::pow(ADAM_BETA2, self.t as f64);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / b1t;
            let v_hat = *v / b2t;
            *p -= lr * m_hat / (num::sqrt(v_hat) + ADAM_EPS);
        }
    }
}

/// Trains encoder and head jointly with Adam and linear warmup.
///
/// Deterministic for a given config: sample order is reshuffled each epoch
/// from a seed derived from `config.seed` and the epoch index, batches are
/// consumed in order, and gradient accumulation is sequential.
pub fn train(
    encoder: &mut EncoderModel,
    head: &mut Head,
    samples: &[TrainSample],
    loss: LossSpec,
    config: &TrainConfig,
) -> Result<Vec<StepRecord>, TrainError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::NoTrainingData);
    }

    let enc_params = encoder.param_count();
    let total_params = enc_params + head.param_count();
    let mut adam = Adam::new(total_params);
    let mut flat_params = Vec::with_capacity(total_params);
    let mut flat_grads = Vec::with_capacity(total_params);
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut rng = seed::rng(seed::derive_indexed(config.seed, "shuffle", epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss_val, enc_grads, head_grads) =
                batch_loss_and_grads(encoder, head, &batch, loss)?;
            if !loss_val.total.is_finite() {
                return Err(TrainError::NonFiniteLoss { step });
            }

            flat_params.clear();
            encoder.flatten_into(&mut flat_params);
            head.flatten_into(&mut flat_params);
            flat_grads.clear();
            enc_grads.flatten_into(&mut flat_grads);
            head_grads.flatten_into(&mut flat_grads);

            let lr = config.lr_at(step);
            adam.step(&mut flat_params, &flat_grads, lr);
            let used = encoder.assign_from_flat(&flat_params);
            head.assign_from_flat(&flat_params[used..]);

            trace.push(StepRecord {
                step,
                lr,
                mse: loss_val.mse,
                topic: loss_val.topic,
                total: loss_val.total,
            });
            step += 1;
        }
    }
    Ok(trace)
}

/// Assembles tokenized on-topic training samples for one prompt: the
/// prompt's train split, targets normalized onto [0, 1]. Essays without a
/// gold score are skipped.
pub fn prompt_train_samples(
    corpus: &Corpus,
    prompt_id: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<TrainSample>, TrainError> {
    let prompt = corpus.prompt(prompt_id).ok_or(TrainError::NoTrainingData)?;
    let mut samples = Vec::new();
    for essay in corpus.essays_in(prompt_id, Split::Train) {
        let Some(gold) = essay.gold_score else { continue };
        let Ok(target) = normalize_score(gold, prompt) else { continue };
        let ids = tokenize(&essay.text, vocab, max_len)?;
        samples.push(TrainSample { ids, target, on_topic: true });
    }
    if samples.is_empty() {
        return Err(TrainError::NoTrainingData);
    }
    Ok(samples)
}

/// Spec'd end-to-end entry point: trains the gated head with the hybrid
/// loss on one prompt's on-topic train split.
pub fn train_on_prompt(
    corpus: &Corpus,
    prompt_id: &str,
    vocab: &Vocabulary,
    encoder: &mut EncoderModel,
    head: &mut Head,
    config: &TrainConfig,
) -> Result<Vec<StepRecord>, TrainError> {
    let samples = prompt_train_samples(corpus, prompt_id, vocab, encoder.config.max_len)?;
    train(encoder, head, &samples, LossSpec::HybridLog { lambda: config.lambda }, config)
}
