//! Per-layer Gaussian statistics over encoder features and summed
//! layer-wise Mahalanobis distances — the off-topic detection score.
//!
//! Fitting uses the population covariance (1/M) form. Because the feature
//! dimension can exceed the sample count at small scale, every covariance is
//! shrunk by `eps * I` with `eps = 1e-6 * max(1, trace/d)` before the SPD
//! factorization; distances are quadratic forms solved against that
//! factorization, never an explicit inverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Essay;
use crate::encoder::{EncoderError, EncoderModel, Vocabulary, tokenize};
use crate::linalg::{Cholesky, LinalgError, Mat, outer_add};
use crate::num;

pub const SHRINKAGE_BASE: f64 = 1e-6;
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least 2 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("non-finite feature value in sample {sample}, layer {layer}")]
    NonFiniteFeature { sample: usize, layer: usize },
    #[error("feature shapes are inconsistent across samples")]
    InconsistentShapes,
    #[error("query has {got} layers/dims, stats expect {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("covariance factorization failed: {0}")]
    Factorization(#[from] LinalgError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// Fitted Gaussian for one layer: mean, population covariance, and the
/// factorization of the shrunk covariance used for solves.
#[derive(Debug, Clone)]
pub struct LayerGaussian {
    pub mean: Vec<f64>,
    pub cov: Mat,
    pub epsilon: f64,
    chol: Cholesky,
}

impl LayerGaussian {
    fn build(mean: Vec<f64>, cov: Mat, epsilon: f64) -> Result<Self, StatsError> {
        let mut shrunk = cov.clone();
        for i in 0..shrunk.rows() {
            shrunk[(i, i)] += epsilon;
        }
        let chol = Cholesky::factor(&shrunk)?;
        Ok(Self { mean, cov, epsilon, chol })
    }

    /// Quadratic form `(h - mu)^T (cov + eps I)^{-1} (h - mu)`.
    pub fn mahalanobis(&self, h: &[f64]) -> Result<f64, StatsError> {
        if h.len() != self.mean.len() {
            return Err(StatsError::ShapeMismatch { got: h.len(), expected: self.mean.len() });
        }
        let diff: Vec<f64> = h.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let solved = self.chol.solve(&diff);
        Ok(crate::linalg::dot(&diff, &solved).max(0.0))
    }
}

/// The fitted detector: one Gaussian per encoder layer.
#[derive(Debug, Clone)]
pub struct LayerStats {
    pub layers: Vec<LayerGaussian>,
    pub sample_count: usize,
}

/// Per-layer distances and their sum, the detection score.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionScore {
    pub per_layer: Vec<f64>,
    pub total: f64,
}

/// Per-layer diagnostics emitted next to a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSummary {
    /// Mean L2 norm of the feature vectors, per layer.
    pub mean_norms: Vec<f64>,
}

/// Fits per-layer means and population covariances on `M x L x d` features.
///
/// Moments are accumulated in a single pass (sums and sums of outer
/// products); if the diagonal diagnostics betray cancellation — a negative
/// variance or a dynamic range beyond 1e12 — that layer is recomputed with
/// the centered two-pass form.
pub fn fit(features: &[Vec<Vec<f64>>]) -> Result<LayerStats, StatsError> {
    let m = features.len();
    if m < 2 {
        return Err(StatsError::TooFewSamples { got: m });
    }
    let layer_count = features[0].len();
    if layer_count == 0 {
        return Err(StatsError::InconsistentShapes);
    }
    let dim = features[0][0].len();
    for (si, sample) in features.iter().enumerate() {
        if sample.len() != layer_count {
            return Err(StatsError::InconsistentShapes);
        }
        for (li, h) in sample.iter().enumerate() {
            if h.len() != dim {
                return Err(StatsError::InconsistentShapes);
            }
            if !h.iter().all(|v| v.is_finite()) {
                return Err(StatsError::NonFiniteFeature { sample: si, layer: li });
            }
        }
    }

    let inv_m = 1.0 / m as f64;
    let mut layers = Vec::with_capacity(layer_count);
    for li in 0..layer_count {
        let mut sum = vec![0.0; dim];
        let mut outer = Mat::zeros(dim, dim);
        for sample in features {
            let h = &sample[li];
            for (s, &v) in sum.iter_mut().zip(h) {
                *s += v;
            }
            outer_add(&mut outer, h, h);
        }
        let mean: Vec<f64> = sum.iter().map(|&s| s * inv_m).collect();
        let mut cov = Mat::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                cov[(i, j)] = outer[(i, j)] * inv_m - mean[i] * mean[j];
            }
        }
        symmetrize(&mut cov);

        if needs_two_pass(&cov) {
            cov = two_pass_cov(features, li, &mean);
        }

        let epsilon = shrinkage(&cov);
        layers.push(LayerGaussian::build(mean, cov, epsilon)?);
    }
    Ok(LayerStats { layers, sample_count: m })
}

fn shrinkage(cov: &Mat) -> f64 {
    let d = cov.rows();
    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    SHRINKAGE_BASE * (trace / d as f64).max(1.0)
}

fn symmetrize(cov: &mut Mat) {
    for i in 0..cov.rows() {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
}

fn needs_two_pass(cov: &Mat) -> bool {
    let d = cov.rows();
    let mut min_diag = f64::INFINITY;
    let mut max_diag = 0.0f64;
    for i in 0..d {
        min_diag = min_diag.min(cov[(i, i)]);
        max_diag = max_diag.max(cov[(i, i)]);
    }
    if min_diag < 0.0 {
        return true;
    }
    max_diag > 0.0 && min_diag > 0.0 && max_diag / min_diag > CONDITION_LIMIT
}

fn two_pass_cov(features: &[Vec<Vec<f64>>], layer: usize, mean: &[f64]) -> Mat {
    let dim = mean.len();
    let mut cov = Mat::zeros(dim, dim);
    for sample in features {
        let diff: Vec<f64> = sample[layer].iter().zip(mean).map(|(a, b)| a - b).collect();
        outer_add(&mut cov, &diff, &diff);
    }
    cov.scale(1.0 / features.len() as f64);
    symmetrize(&mut cov);
    cov
}

impl LayerStats {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.mean.len())
    }

    /// Rebuilds stats from persisted parts, refactorizing each covariance.
    pub fn from_parts(
        parts: Vec<(Vec<f64>, Mat, f64)>,
        sample_count: usize,
    ) -> Result<Self, StatsError> {
        let layers = parts
            .into_iter()
            .map(|(mean, cov, epsilon)| LayerGaussian::build(mean, cov, epsilon))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { layers, sample_count })
    }

    /// Summed layer-wise Mahalanobis distance of one feature stack.
    pub fn distance(&self, features: &[Vec<f64>]) -> Result<DetectionScore, StatsError> {
        if features.len() != self.layers.len() {
            return Err(StatsError::ShapeMismatch {
                got: features.len(),
                expected: self.layers.len(),
            });
        }
        let per_layer: Vec<f64> = self
            .layers
            .iter()
            .zip(features)
            .map(|(g, h)| g.mahalanobis(h))
            .collect::<Result<_, _>>()?;
        let total = per_layer.iter().sum();
        Ok(DetectionScore { per_layer, total })
    }

    /// Test hook: replaces every covariance with the identity (and drops the
    /// shrinkage), turning each layer distance into a squared Euclidean
    /// norm.
    pub fn force_identity_cov(&mut self) {
        for layer in &mut self.layers {
            let d = layer.mean.len();
            layer.cov = Mat::identity(d);
            layer.epsilon = 0.0;
            layer.chol = Cholesky::factor(&Mat::identity(d)).expect("identity is SPD");
        }
    }
}

/// Runs every essay through the frozen encoder, fits stats on the collected
/// per-layer features, and reports per-layer mean feature norms.
pub fn batch_extract_and_fit(
    model: &EncoderModel,
    vocab: &Vocabulary,
    essays: &[&Essay],
    include_embedding: bool,
) -> Result<(LayerStats, FeatureSummary), StatsError> {
    let mut features = Vec::with_capacity(essays.len());
    for essay in essays {
        let ids = tokenize(&essay.text, vocab, model.config.max_len)?;
        let cache = model.forward(&ids)?;
        features.push(cache.layer_features(include_embedding));
    }
    let stats = fit(&features)?;
    let layer_count = stats.layer_count();
    let mut mean_norms = vec![0.0; layer_count];
    for sample in &features {
        for (li, h) in sample.iter().enumerate() {
            mean_norms[li] += num::sqrt(crate::linalg::dot(h, h));
        }
    }
    for v in &mut mean_norms {
        *v /= features.len() as f64;
    }
    Ok((stats, FeatureSummary { mean_norms }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, SynthConfig, synthesize};
    use crate::encoder::EncoderConfig;
    use crate::seed;
    use rand::Rng;

    fn single_layer(samples: &[&[f64]]) -> Vec<Vec<Vec<f64>>> {
        samples.iter().map(|s| vec![s.to_vec()]).collect()
    }

    #[test]
    fn fit_matches_hand_computed_moments() {
        let features =
            single_layer(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0], &[2.0, 2.0]]);
        let stats = fit(&features).unwrap();
        let g = &stats.layers[0];
        assert_eq!(g.mean, vec![1.0, 1.0]);
        assert_eq!(g.cov[(0, 0)], 1.0);
        assert_eq!(g.cov[(1, 1)], 1.0);
        assert_eq!(g.cov[(0, 1)], 0.0);
        assert_eq!(g.cov[(1, 0)], 0.0);
        assert_eq!(g.epsilon, 1e-6);
        assert_eq!(stats.sample_count, 4);
    }

    #[test]
    fn distance_matches_direct_formula() {
        let features =
            single_layer(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0], &[2.0, 2.0]]);
        let stats = fit(&features).unwrap();
        // (3,1) - (1,1) = (2,0); D = 4 / (1 + 1e-6)
        let score = stats.distance(&[vec![3.0, 1.0]]).unwrap();
        assert!((score.total - 4.0 / (1.0 + 1e-6)).abs() < 1e-12);
        // Query at the mean: zero.
        let zero = stats.distance(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(zero.total, 0.0);
    }

    #[test]
    fn total_is_exactly_the_per_layer_sum() {
        let features: Vec<Vec<Vec<f64>>> = (0..6)
            .map(|i| {
                vec![
                    vec![i as f64, (i * i) as f64 * 0.1],
                    vec![-(i as f64) * 0.3, 1.0 / (i + 1) as f64],
                ]
            })
            .collect();
        let stats = fit(&features).unwrap();
        let score = stats.distance(&[vec![4.0, 0.5], vec![-0.2, 0.9]]).unwrap();
        assert_eq!(score.per_layer.len(), 2);
        assert_eq!(score.total, score.per_layer.iter().sum::<f64>());
        assert!(score.per_layer.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn two_layer_sum_example() {
        // Unit covariances with queries two and three units from the means:
        // per-layer distances ~4 and ~9, total ~13.
        let layer_a: Vec<&[f64]> = vec![&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0], &[2.0, 2.0]];
        let features: Vec<Vec<Vec<f64>>> = layer_a
            .iter()
            .map(|s| vec![s.to_vec(), s.to_vec()])
            .collect();
        let stats = fit(&features).unwrap();
        let score = stats.distance(&[vec![3.0, 1.0], vec![4.0, 1.0]]).unwrap();
        assert!((score.per_layer[0] - 4.0).abs() < 1e-4);
        assert!((score.per_layer[1] - 9.0).abs() < 1e-4);
        assert!((score.total - 13.0).abs() < 1e-4);
    }

    #[test]
    fn identical_samples_fall_back_to_shrinkage() {
        let features = single_layer(&[&[0.5, -0.5], &[0.5, -0.5], &[0.5, -0.5]]);
        let stats = fit(&features).unwrap();
        let g = &stats.layers[0];
        assert_eq!(g.cov[(0, 0)], 0.0);
        assert_eq!(g.epsilon, 1e-6);
        // Regularized inverse is (1/eps) I: distance r^2 / eps.
        let score = stats.distance(&[vec![0.5 + 1e-3, -0.5]]).unwrap();
        assert!((score.total - 1e-6 / 1e-6).abs() < 1e-9, "got {}", score.total);
    }

    #[test]
    fn one_sample_is_too_few() {
        let features = single_layer(&[&[1.0, 2.0]]);
        assert!(matches!(fit(&features), Err(StatsError::TooFewSamples { got: 1 })));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let features = single_layer(&[&[1.0, 2.0], &[f64::NAN, 0.0]]);
        assert!(matches!(
            fit(&features),
            Err(StatsError::NonFiniteFeature { sample: 1, layer: 0 })
        ));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let features = single_layer(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let stats = fit(&features).unwrap();
        assert!(matches!(
            stats.distance(&[vec![1.0, 2.0], vec![1.0, 2.0]]),
            Err(StatsError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            stats.distance(&[vec![1.0]]),
            Err(StatsError::ShapeMismatch { .. })
        ));
    }

    /// Independent oracle: explicit Gauss-Jordan inverse of the shrunk
    /// covariance and a triple-loop quadratic form.
    fn oracle_distance(g: &LayerGaussian, h: &[f64]) -> f64 {
        let d = g.mean.len();
        let mut aug = vec![vec![0.0; 2 * d]; d];
        for i in 0..d {
            for j in 0..d {
                aug[i][j] = g.cov[(i, j)] + if i == j { g.epsilon } else { 0.0 };
            }
            aug[i][d + i] = 1.0;
        }
        for col in 0..d {
            let pivot_row = (col..d)
                .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot_row);
            let pivot = aug[col][col];
            for j in 0..2 * d {
                aug[col][j] /= pivot;
            }
            for row in 0..d {
                if row != col {
                    let factor = aug[row][col];
                    for j in 0..2 * d {
                        aug[row][j] -= factor * aug[col][j];
                    }
                }
            }
        }
        let mut total = 0.0;
        for i in 0..d {
            for j in 0..d {
                total += (h[i] - g.mean[i]) * aug[i][d + j] * (h[j] - g.mean[j]);
            }
        }
        total
    }

    #[test]
    fn distance_agrees_with_explicit_inverse_oracle() {
        let mut rng = seed::rng(707);
        for _ in 0..100 {
            let d = rng.random_range(1..=4);
            let m = rng.random_range(2..=50);
            let features: Vec<Vec<Vec<f64>>> = (0..m)
                .map(|_| vec![(0..d).map(|_| rng.random_range(-1.0..1.0)).collect()])
                .collect();
            let stats = fit(&features).unwrap();
            let query: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ours = stats.distance(&[query.clone()]).unwrap().total;
            let oracle = oracle_distance(&stats.layers[0], &query);
            assert!(
                num::rel_error(ours, oracle) <= 1e-8,
                "d={d} m={m}: {ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn identity_covariance_gives_squared_euclidean() {
        let mut rng = seed::rng(708);
        let features: Vec<Vec<Vec<f64>>> = (0..20)
            .map(|_| vec![(0..3).map(|_| rng.random_range(-1.0..1.0)).collect()])
            .collect();
        let mut stats = fit(&features).unwrap();
        stats.force_identity_cov();
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let expected: f64 = q
                .iter()
                .zip(&stats.layers[0].mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let got = stats.distance(&[q.clone()]).unwrap().total;
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_is_invariant_under_sample_reordering() {
        let mut rng = seed::rng(709);
        let mut features: Vec<Vec<Vec<f64>>> = (0..30)
            .map(|_| vec![(0..3).map(|_| rng.random_range(-1.0..1.0)).collect()])
            .collect();
        let stats_a = fit(&features).unwrap();
        features.reverse();
        features.swap(0, 7);
        let stats_b = fit(&features).unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = stats_a.distance(&[q.clone()]).unwrap().total;
            let b = stats_b.distance(&[q.clone()]).unwrap().total;
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn mean_in_sample_distance_is_close_to_dim() {
        // Average in-sample distance equals trace((cov+eps I)^{-1} cov),
        // which is within a few percent of d for well-conditioned fits.
        let mut rng = seed::rng(710);
        let d = 2;
        let m = 50 * d;
        let gauss = rand_distr::Normal::new(0.0, 0.4).unwrap();
        let features: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|_| {
                vec![(0..d).map(|_| rand_distr::Distribution::sample(&gauss, &mut rng)).collect()]
            })
            .collect();
        let stats = fit(&features).unwrap();
        let mean_d = num::mean(
            &features
                .iter()
                .map(|f| stats.distance(&[f[0].clone()]).unwrap().total)
                .collect::<Vec<_>>(),
        );
        let target = d as f64;
        assert!(
            (mean_d - target).abs() / target < 0.05,
            "mean in-sample distance {mean_d}, expected about {target}"
        );
    }

    #[test]
    fn cancellation_triggers_the_two_pass_path() {
        // Large common offset with tiny spread: the raw moment form loses
        // all significant digits, the centered recomputation does not.
        let base = 1e9;
        let samples: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![base + i as f64 * 1e-3, base - i as f64 * 1e-3])
            .collect();
        let features: Vec<Vec<Vec<f64>>> =
            samples.iter().map(|s| vec![s.clone()]).collect();
        let stats = fit(&features).unwrap();
        let mean = &stats.layers[0].mean;
        let expected = two_pass_cov(&features, 0, mean);
        assert_eq!(stats.layers[0].cov, expected);
        assert!(stats.layers[0].cov[(0, 0)] > 0.0);
    }

    #[test]
    fn batch_extraction_is_deterministic_and_matches_two_pass_means() {
        let corpus = synthesize(&SynthConfig {
            n_prompts: 1,
            essays_per_prompt: 60,
            ..SynthConfig::default()
        })
        .unwrap();
        let essays = corpus.essays_in("p1", Split::Train);
        let texts: Vec<&str> = essays.iter().map(|e| e.text.as_str()).collect();
        let vocab = Vocabulary::build(texts);
        let config = EncoderConfig { dim: 16, layers: 4, max_len: 64, positional: false, seed: 3 };
        let model = EncoderModel::init(config, vocab.size());

        let (stats_a, summary_a) =
            batch_extract_and_fit(&model, &vocab, &essays, false).unwrap();
        let (stats_b, _) = batch_extract_and_fit(&model, &vocab, &essays, false).unwrap();
        assert_eq!(stats_a.layer_count(), 4);
        assert_eq!(summary_a.mean_norms.len(), 4);
        for (a, b) in stats_a.layers.iter().zip(&stats_b.layers) {
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.cov, b.cov);
        }

        // Independent two-pass mean oracle over re-extracted features.
        for li in 0..4 {
            let mut sums = vec![0.0; 16];
            for essay in &essays {
                let ids = tokenize(&essay.text, &vocab, 64).unwrap();
                let feats = model.layer_features(&ids).unwrap();
                for (s, &v) in sums.iter_mut().zip(&feats[li]) {
                    *s += v;
                }
            }
            for (s, &m) in sums.iter().zip(&stats_a.layers[li].mean) {
                let mean = s / essays.len() as f64;
                assert!(num::rel_error(mean, m) <= 1e-12);
            }
        }
    }

    #[test]
    fn include_embedding_adds_a_layer() {
        let corpus = synthesize(&SynthConfig {
            n_prompts: 1,
            essays_per_prompt: 30,
            ..SynthConfig::default()
        })
        .unwrap();
        let essays = corpus.essays_in("p1", Split::Train);
        let texts: Vec<&str> = essays.iter().map(|e| e.text.as_str()).collect();
        let vocab = Vocabulary::build(texts);
        let config = EncoderConfig { dim: 8, layers: 2, max_len: 64, positional: false, seed: 4 };
        let model = EncoderModel::init(config, vocab.size());
        let (stats, _) = batch_extract_and_fit(&model, &vocab, &essays, true).unwrap();
        assert_eq!(stats.layer_count(), 3);
    }
}
