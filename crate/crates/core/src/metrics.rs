//! Evaluation metrics: quadratic weighted kappa and Pearson correlation for
//! scoring agreement, precision/recall/F1 for detection (off-topic is the
//! positive class), and histogram report data for score distributions.

use alloc::vec;
use alloc::vec::Vec;

use crate::calibrate::TopicClass;
use crate::num;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least {need} paired values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("grade {grade} outside range {min}..={max}")]
    GradeOutOfRange { grade: i32, min: i32, max: i32 },
    #[error("input lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("weighted expected agreement is zero (constant raters)")]
    DegenerateMarginals,
    #[error("an input has zero variance")]
    ZeroVariance,
    #[error("empty input")]
    EmptyInput,
    #[error("bins must be >= 1")]
    NoBins,
}

/// Quadratic weighted kappa over integer grades in
/// `score_min..=score_max`: `1 - sum(w*O) / sum(w*E)` with quadratic
/// penalties `w_ij = (i-j)^2 / (R-1)^2` and the expected matrix `E` scaled
/// to the observed total.
pub fn qwk(
    pred: &[i32],
    gold: &[i32],
    score_min: i32,
    score_max: i32,
) -> Result<f64, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { a: pred.len(), b: gold.len() });
    }
    if pred.len() < 2 {
        return Err(MetricsError::TooFewValues { need: 2, got: pred.len() });
    }
    let r = (score_max - score_min + 1) as usize;
    if r < 2 {
        return Err(MetricsError::DegenerateMarginals);
    }
    let index_of = |grade: i32| -> Result<usize, MetricsError> {
        if grade < score_min || grade > score_max {
            return Err(MetricsError::GradeOutOfRange {
                grade,
                min: score_min,
                max: score_max,
            });
        }
        Ok((grade - score_min) as usize)
    };

    let n = pred.len() as f64;
    let mut observed = vec![0.0f64; r * r];
    let mut pred_marginal = vec![0.0f64; r];
    let mut gold_marginal = vec![0.0f64; r];
    for (&p, &g) in pred.iter().zip(gold) {
        let pi = index_of(p)?;
        let gi = index_of(g)?;
        observed[pi * r + gi] += 1.0;
        pred_marginal[pi] += 1.0;
        gold_marginal[gi] += 1.0;
    }

    let denom_scale = f64::from(score_max - score_min) * f64::from(score_max - score_min);
    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for i in 0..r {
        for j in 0..r {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_scale;
            weighted_observed += w * observed[i * r + j];
            // E scaled so sum(E) equals sum(O) = n.
            weighted_expected += w * pred_marginal[i] * gold_marginal[j] / n;
        }
    }
    if weighted_expected == 0.0 {
        return Err(MetricsError::DegenerateMarginals);
    }
    Ok(1.0 - weighted_observed / weighted_expected)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch { a: xs.len(), b: ys.len() });
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooFewValues { need: 2, got: xs.len() });
    }
    let mx = num::mean(xs);
    let my = num::mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(sxy / num::sqrt(sxx * syy))
}

/// Scoring-agreement bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub qwk: f64,
    pub pearson: f64,
    pub n: usize,
}

pub fn agreement(
    pred: &[i32],
    gold: &[i32],
    score_min: i32,
    score_max: i32,
) -> Result<AgreementReport, MetricsError> {
    let k = qwk(pred, gold, score_min, score_max)?;
    let xs: Vec<f64> = pred.iter().map(|&v| f64::from(v)).collect();
    let ys: Vec<f64> = gold.iter().map(|&v| f64::from(v)).collect();
    let r = pearson(&xs, &ys)?;
    Ok(AgreementReport { qwk: k, pearson: r, n: pred.len() })
}

/// Confusion counts with off-topic as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionReport {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 over `(predicted, actual)` class pairs. Degenerate
/// splits resolve by convention: precision is 0 with no positive
/// predictions, recall is 0 with no positive truths, F1 is 0 when both
/// rates vanish.
pub fn detection_metrics(decisions: &[(TopicClass, TopicClass)]) -> DetectionReport {
    let mut counts = ConfusionCounts::default();
    for &(pred, actual) in decisions {
        match (pred, actual) {
            (TopicClass::OffTopic, TopicClass::OffTopic) => counts.true_pos += 1,
            (TopicClass::OffTopic, TopicClass::OnTopic) => counts.false_pos += 1,
            (TopicClass::OnTopic, TopicClass::OffTopic) => counts.false_neg += 1,
            (TopicClass::OnTopic, TopicClass::OnTopic) => counts.true_neg += 1,
        }
    }
    let precision = if counts.true_pos + counts.false_pos == 0 {
        0.0
    } else {
        counts.true_pos as f64 / (counts.true_pos + counts.false_pos) as f64
    };
    let recall = if counts.true_pos + counts.false_neg == 0 {
        0.0
    } else {
        counts.true_pos as f64 / (counts.true_pos + counts.false_neg) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DetectionReport { counts, precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count_on: usize,
    pub count_off: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    pub bins: Vec<HistogramBin>,
    /// Sum over bins of the smaller normalized mass; 1.0 for identical
    /// distributions, 0.0 for distributions that never share a bin.
    pub overlap: f64,
}

/// Shared equal-width binning over the combined range, half-open bins with
/// the top value falling into the last bin.
pub fn histogram_report(
    on_scores: &[f64],
    off_scores: &[f64],
    bins: usize,
) -> Result<HistogramReport, MetricsError> {
    if on_scores.is_empty() || off_scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    let all = on_scores.iter().chain(off_scores);
    let min = all.clone().copied().fold(f64::INFINITY, f64::min);
    let max = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let index = |v: f64| -> usize {
        if width == 0.0 {
            return 0;
        }
        (((v - min) / width) as usize).min(bins - 1)
    };
    let mut on_counts = vec![0usize; bins];
    let mut off_counts = vec![0usize; bins];
    for &v in on_scores {
        on_counts[index(v)] += 1;
    }
    for &v in off_scores {
        off_counts[index(v)] += 1;
    }
    let mut overlap = 0.0;
    let mut out = Vec::with_capacity(bins);
    for b in 0..bins {
        let p_on = on_counts[b] as f64 / on_scores.len() as f64;
        let p_off = off_counts[b] as f64 / off_scores.len() as f64;
        overlap += p_on.min(p_off);
        out.push(HistogramBin {
            low: min + b as f64 * width,
            high: if b + 1 == bins { max } else { min + (b + 1) as f64 * width },
            count_on: on_counts[b],
            count_off: off_counts[b],
        });
    }
    Ok(HistogramReport { bins: out, overlap })
}
