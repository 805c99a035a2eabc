//! Tokenizer and the small differentiable text encoder.
//!
//! The encoder is a stack of single-head attention mixer layers: layer 0 is
//! the token embedding, layer `l` is `tanh(affine(attention(layer l-1)))`,
//! and the pooled output is `tanh(affine(mean over tokens of the final
//! layer))`. It exposes every intermediate layer state so per-layer features
//! can feed the off-topic detector, and implements exact analytic gradients
//! for all parameters; training never touches an autograd framework.
//!
//! All arithmetic is `f64`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{Mat, outer_add};
use crate::{num, seed, text};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncoderError {
    #[error("text produced no tokens")]
    EmptyText,
    #[error("empty token sequence")]
    EmptyInput,
    #[error("sequence of {len} tokens exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },
}

/// Token-to-id map with two reserved ids: `PAD=0` and `UNK=1`.
///
/// Built from training-split text only; ids are assigned in sorted token
/// order so the vocabulary does not depend on essay order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Vocabulary {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = BTreeSet::new();
        for t in texts {
            for w in text::words(t) {
                set.insert(w);
            }
        }
        let mut tokens = vec![String::from(PAD_TOKEN), String::from(UNK_TOKEN)];
        tokens.extend(set);
        Self::from_tokens(tokens)
    }

    /// Rebuilds a vocabulary from its id-ordered token list (checkpoints).
    /// `tokens[0]` and `tokens[1]` must be the reserved entries.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        assert!(tokens.len() >= 2, "reserved tokens missing");
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, ids }
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// Tokens in id order, reserved entries first.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Lowercased word/punctuation tokenization, truncated to `max_len`.
pub fn tokenize(text_in: &str, vocab: &Vocabulary, max_len: usize) -> Result<Vec<u32>, EncoderError> {
    let mut ids: Vec<u32> = text::words(text_in).iter().map(|w| vocab.id(w)).collect();
    if ids.is_empty() {
        return Err(EncoderError::EmptyText);
    }
    ids.truncate(max_len);
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Hidden width `d`.
    pub dim: usize,
    /// Number of mixer layers `L` (the embedding is layer 0).
    pub layers: usize,
    pub max_len: usize,
    /// Learned positional embeddings; off by default, the topic signal at
    /// this scale is lexical.
    pub positional: bool,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { dim: 32, layers: 4, max_len: 128, positional: false, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    /// Position-wise affine applied to the attention context.
    pub w: Mat,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub config: EncoderConfig,
    /// V x d token embeddings.
    pub embedding: Mat,
    pub layers: Vec<LayerParams>,
    pub pooler_w: Mat,
    pub pooler_b: Vec<f64>,
    /// max_len x d, present only when `config.positional`.
    pub positional: Option<Mat>,
}

const INIT_RANGE: f64 = 0.05;

impl EncoderModel {
    /// Fresh model with all parameters drawn uniform(-0.05, 0.05) from the
    /// config seed. The draw order is fixed (embedding, then per layer
    /// wq/wk/wv/w/b, then pooler, then positional) and doubles as the
    /// flattening order for the optimizer and checkpoints.
    pub fn init(config: EncoderConfig, vocab_size: usize) -> Self {
        assert!(config.layers >= 2, "need at least two layers");
        assert!(config.dim >= 8, "need dim >= 8");
        let d = config.dim;
        let mut rng = seed::rng(seed::derive(config.seed, "init"));
        let mut draw_mat = |rows: usize, cols: usize| {
            let mut m = Mat::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.random_range(-INIT_RANGE..INIT_RANGE);
            }
            m
        };
        let embedding = draw_mat(vocab_size, d);
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            let wq = draw_mat(d, d);
            let wk = draw_mat(d, d);
            let wv = draw_mat(d, d);
            let w = draw_mat(d, d);
            let b = draw_mat(1, d).data().to_vec();
            layers.push(LayerParams { wq, wk, wv, w, b });
        }
        let pooler_w = draw_mat(d, d);
        let pooler_b = draw_mat(1, d).data().to_vec();
        let positional = config.positional.then(|| draw_mat(config.max_len, d));
        Self { config, embedding, layers, pooler_w, pooler_b, positional }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    /// Runs the encoder and keeps every intermediate needed for `backward`.
    pub fn forward(&self, ids: &[u32]) -> Result<ForwardCache, EncoderError> {
        if ids.is_empty() {
            return Err(EncoderError::EmptyInput);
        }
        if ids.len() > self.config.max_len {
            return Err(EncoderError::SequenceTooLong {
                len: ids.len(),
                max_len: self.config.max_len,
            });
        }
        let t = ids.len();
        let d = self.config.dim;
        let scale = 1.0 / num::sqrt(d as f64);

        let mut x0 = Mat::zeros(t, d);
        for (i, &id) in ids.iter().enumerate() {
            let row = self.embedding.row(id as usize);
            let out = x0.row_mut(i);
            out.copy_from_slice(row);
            if let Some(pos) = &self.positional {
                for (o, &p) in out.iter_mut().zip(pos.row(i)) {
                    *o += p;
                }
            }
        }

        let mut states = Vec::with_capacity(self.layers.len() + 1);
        states.push(x0);
        let mut q_cache = Vec::with_capacity(self.layers.len());
        let mut k_cache = Vec::with_capacity(self.layers.len());
        let mut v_cache = Vec::with_capacity(self.layers.len());
        let mut attn_cache = Vec::with_capacity(self.layers.len());
        let mut ctx_cache = Vec::with_capacity(self.layers.len());

        for (li, layer) in self.layers.iter().enumerate() {
            let x = states.last().expect("state stack");
            let q = x.mul(&layer.wq);
            let k = x.mul(&layer.wk);
            let v = x.mul(&layer.wv);
            let mut scores = q.mul_bt(&k);
            scores.scale(scale);
            let attn = softmax_rows(&scores);
            let ctx = attn.mul(&v);
            let mut z = ctx.mul(&layer.w);
            for r in 0..t {
                let row = z.row_mut(r);
                for (zv, &bv) in row.iter_mut().zip(&layer.b) {
                    *zv = num::tanh(*zv + bv);
                }
            }
            if !z.is_finite() {
                return Err(EncoderError::NonFiniteActivation { layer: li + 1 });
            }
            q_cache.push(q);
            k_cache.push(k);
            v_cache.push(v);
            attn_cache.push(attn);
            ctx_cache.push(ctx);
            states.push(z);
        }

        let mean_final = states.last().expect("final state").mean_rows();
        let mut pooled = self.pooler_b.clone();
        for (j, p) in pooled.iter_mut().enumerate() {
            for (i, &m) in mean_final.iter().enumerate() {
                *p += m * self.pooler_w[(i, j)];
            }
            *p = num::tanh(*p);
        }
        if !pooled.iter().all(|v| v.is_finite()) {
            return Err(EncoderError::NonFiniteActivation { layer: self.layers.len() + 1 });
        }

        Ok(ForwardCache {
            ids: ids.to_vec(),
            states,
            q: q_cache,
            k: k_cache,
            v: v_cache,
            attn: attn_cache,
            ctx: ctx_cache,
            mean_final,
            pooled,
        })
    }

    /// Per-layer detection features: `tanh` of the token-mean of each mixer
    /// layer's states, one `d`-vector per layer (the embedding layer is not
    /// included). Every component lies strictly inside (-1, 1).
    pub fn layer_features(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>, EncoderError> {
        let cache = self.forward(ids)?;
        Ok(cache.layer_features(false))
    }

    /// Exact gradients of all parameters for an upstream gradient on the
    /// pooled output and, optionally, on each mixer layer's state matrix.
    pub fn backward(&self, cache: &ForwardCache, upstream: &UpstreamGrad) -> EncoderGrads {
        let t = cache.ids.len();
        let d = self.config.dim;
        let scale = 1.0 / num::sqrt(d as f64);
        let mut grads = EncoderGrads::zeros(self);

        // Pooler: pooled = tanh(m . Wp + bp)
        let mut d_pre = vec![0.0; d];
        for j in 0..d {
            let y = cache.pooled[j];
            d_pre[j] = upstream.pooled[j] * (1.0 - y * y);
        }
        outer_add(&mut grads.pooler_w, &cache.mean_final, &d_pre);
        for (g, &v) in grads.pooler_b.iter_mut().zip(&d_pre) {
            *g += v;
        }
        let mut d_mean = vec![0.0; d];
        for j in 0..d {
            d_mean[j] = crate::linalg::dot(self.pooler_w.row(j), &d_pre);
        }

        // Mean over tokens spreads the gradient evenly.
        let mut d_state = Mat::zeros(t, d);
        let inv_t = 1.0 / t as f64;
        for r in 0..t {
            for (g, &m) in d_state.row_mut(r).iter_mut().zip(&d_mean) {
                *g = m * inv_t;
            }
        }

        for li in (0..self.layers.len()).rev() {
            if let Some(states) = upstream.layer_states {
                d_state.add_assign(&states[li]);
            }
            let layer = &self.layers[li];
            let x = &cache.states[li];
            let x_out = &cache.states[li + 1];

            // tanh
            let mut d_z = d_state;
            for r in 0..t {
                let yrow = x_out.row(r);
                for (g, &y) in d_z.row_mut(r).iter_mut().zip(yrow) {
                    *g *= 1.0 - y * y;
                }
            }

            // affine: z = ctx . W + b
            grads.layers[li].w.add_assign(&cache.ctx[li].mul_at_b(&d_z));
            for r in 0..t {
                for (g, &v) in grads.layers[li].b.iter_mut().zip(d_z.row(r)) {
                    *g += v;
                }
            }
            let d_ctx = d_z.mul_bt(&layer.w);

            // attention: ctx = A . V, A = softmax(Q K^T * scale)
            let attn = &cache.attn[li];
            let d_attn = d_ctx.mul_bt(&cache.v[li]);
            let d_v = attn.mul_at_b(&d_ctx);
            let mut d_scores = softmax_rows_backward(attn, &d_attn);
            d_scores.scale(scale);
            let d_q = d_scores.mul(&cache.k[li]);
            let d_k = d_scores.mul_at_b(&cache.q[li]);

            grads.layers[li].wq.add_assign(&x.mul_at_b(&d_q));
            grads.layers[li].wk.add_assign(&x.mul_at_b(&d_k));
            grads.layers[li].wv.add_assign(&x.mul_at_b(&d_v));

            let mut d_x = d_q.mul_bt(&layer.wq);
            d_x.add_assign(&d_k.mul_bt(&layer.wk));
            d_x.add_assign(&d_v.mul_bt(&layer.wv));
            d_state = d_x;
        }

        for (i, &id) in cache.ids.iter().enumerate() {
            let src = d_state.row(i);
            let dst = grads.embedding.row_mut(id as usize);
            for (g, &v) in dst.iter_mut().zip(src) {
                *g += v;
            }
            if let Some(pos) = &mut grads.positional {
                for (g, &v) in pos.row_mut(i).iter_mut().zip(src) {
                    *g += v;
                }
            }
        }

        grads
    }

    pub fn param_count(&self) -> usize {
        let d = self.config.dim;
        let mut n = self.embedding.rows() * d;
        n += self.layers.len() * (4 * d * d + d);
        n += d * d + d;
        if self.positional.is_some() {
            n += self.config.max_len * d;
        }
        n
    }

    /// Parameters in the fixed flattening order.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.embedding.data());
        for layer in &self.layers {
            out.extend_from_slice(layer.wq.data());
            out.extend_from_slice(layer.wk.data());
            out.extend_from_slice(layer.wv.data());
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        out.extend_from_slice(self.pooler_w.data());
        out.extend_from_slice(&self.pooler_b);
        if let Some(pos) = &self.positional {
            out.extend_from_slice(pos.data());
        }
    }

    /// Inverse of [`flatten_into`]; returns how many values were consumed.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        take(self.embedding.data_mut());
        for layer in &mut self.layers {
            take(layer.wq.data_mut());
            take(layer.wk.data_mut());
            take(layer.wv.data_mut());
            take(layer.w.data_mut());
            take(&mut layer.b);
        }
        take(self.pooler_w.data_mut());
        take(&mut self.pooler_b);
        if let Some(p) = &mut self.positional {
            take(p.data_mut());
        }
        pos
    }
}

/// Upstream gradients for [`EncoderModel::backward`]: always on the pooled
/// output, optionally one `T x d` matrix per mixer layer's states.
pub struct UpstreamGrad<'a> {
    pub pooled: &'a [f64],
    pub layer_states: Option<&'a [Mat]>,
}

/// Everything the forward pass computed, kept for the backward pass and for
/// feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    ids: Vec<u32>,
    /// `layers + 1` state matrices; index 0 is the embedding output.
    states: Vec<Mat>,
    q: Vec<Mat>,
    k: Vec<Mat>,
    v: Vec<Mat>,
    attn: Vec<Mat>,
    ctx: Vec<Mat>,
    mean_final: Vec<f64>,
    pooled: Vec<f64>,
}

impl ForwardCache {
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    pub fn states(&self) -> &[Mat] {
        &self.states
    }

    pub fn seq_len(&self) -> usize {
        self.ids.len()
    }

    /// `tanh(mean over tokens)` of each layer's states. With
    /// `include_embedding` the layer-0 states contribute a leading vector.
    pub fn layer_features(&self, include_embedding: bool) -> Vec<Vec<f64>> {
        let start = usize::from(!include_embedding);
        self.states[start..]
            .iter()
            .map(|m| m.mean_rows().into_iter().map(num::tanh).collect())
            .collect()
    }
}

/// Gradient accumulator mirroring the model's parameter shapes.
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub embedding: Mat,
    pub layers: Vec<LayerGrads>,
    pub pooler_w: Mat,
    pub pooler_b: Vec<f64>,
    pub positional: Option<Mat>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub w: Mat,
    pub b: Vec<f64>,
}

impl EncoderGrads {
    pub fn zeros(model: &EncoderModel) -> Self {
        let d = model.config.dim;
        Self {
            embedding: Mat::zeros(model.embedding.rows(), d),
            layers: model
                .layers
                .iter()
                .map(|_| LayerGrads {
                    wq: Mat::zeros(d, d),
                    wk: Mat::zeros(d, d),
                    wv: Mat::zeros(d, d),
                    w: Mat::zeros(d, d),
                    b: vec![0.0; d],
                })
                .collect(),
            pooler_w: Mat::zeros(d, d),
            pooler_b: vec![0.0; d],
            positional: model
                .positional
                .as_ref()
                .map(|p| Mat::zeros(p.rows(), p.cols())),
        }
    }

    pub fn add_assign(&mut self, other: &EncoderGrads) {
        self.embedding.add_assign(&other.embedding);
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.wq.add_assign(&b.wq);
            a.wk.add_assign(&b.wk);
            a.wv.add_assign(&b.wv);
            a.w.add_assign(&b.w);
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
        self.pooler_w.add_assign(&other.pooler_w);
        for (x, y) in self.pooler_b.iter_mut().zip(&other.pooler_b) {
            *x += y;
        }
        if let (Some(a), Some(b)) = (&mut self.positional, &other.positional) {
            a.add_assign(b);
        }
    }

    /// Same flattening order as [`EncoderModel::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.embedding.data());
        for layer in &self.layers {
            out.extend_from_slice(layer.wq.data());
            out.extend_from_slice(layer.wk.data());
            out.extend_from_slice(layer.wv.data());
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        out.extend_from_slice(self.pooler_w.data());
        out.extend_from_slice(&self.pooler_b);
        if let Some(pos) = &self.positional {
            out.extend_from_slice(pos.data());
        }
    }
}

fn softmax_rows(scores: &Mat) -> Mat {
    let mut out = scores.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = num::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Jacobian-vector product of row-wise softmax:
/// `dS_ij = A_ij * (dA_ij - sum_k dA_ik A_ik)`.
fn softmax_rows_backward(attn: &Mat, d_attn: &Mat) -> Mat {
    let mut out = Mat::zeros(attn.rows(), attn.cols());
    for r in 0..attn.rows() {
        let a = attn.row(r);
        let da = d_attn.row(r);
        let inner = crate::linalg::dot(a, da);
        for (o, (&av, &dv)) in out.row_mut(r).iter_mut().zip(a.iter().zip(da)) {
            *o = av * (dv - inner);
        }
    }
    out
}
