//! Threshold selection and the joint decision rule.
//!
//! A detection score at or below the threshold keeps the essay on-topic and
//! reports its predicted grade; a score above it flags the essay off-topic
//! and reports zero. Thresholds come from equal-error-rate search over
//! labeled calibration scores, or from a quantile of on-topic training
//! distances when no off-topic examples exist.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Prompt, denormalize_score};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrateError {
    #[error("score list is empty")]
    EmptyInput,
    #[error("all calibration scores are identical")]
    DegenerateScores,
    #[error("quantile level {0} outside (0, 1)")]
    BadQuantile(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdMethod {
    /// Equal error rate over labeled on/off calibration scores.
    Eer,
    /// Empirical quantile of on-topic training distances.
    Quantile { q: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub delta: f64,
    pub method: ThresholdMethod,
}

/// An equal-error-rate calibration result with the rates it achieved on the
/// calibration data.
#[derive(Debug, Clone, PartialEq)]
pub struct EerReport {
    pub threshold: Threshold,
    /// Fraction of on-topic essays flagged (score > delta).
    pub fpr: f64,
    /// Fraction of off-topic essays missed (score <= delta).
    pub fnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopicClass {
    OnTopic,
    OffTopic,
}

impl TopicClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicClass::OnTopic => "on",
            TopicClass::OffTopic => "off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "on" => Some(TopicClass::OnTopic),
            "off" => Some(TopicClass::OffTopic),
            _ => None,
        }
    }
}

/// The joint outcome for one essay: detection score, class, final grade.
/// A flagged essay always reports grade zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub essay_id: String,
    pub d_total: f64,
    pub predicted_class: TopicClass,
    pub final_score: i32,
}

/// Error rates of one candidate threshold, higher score = more off-topic.
fn rates_at(delta: f64, on: &[f64], off: &[f64]) -> (f64, f64) {
    let fp = on.iter().filter(|&&s| s > delta).count();
    let fnn = off.iter().filter(|&&s| s <= delta).count();
    (fp as f64 / on.len() as f64, fnn as f64 / off.len() as f64)
}

fn f1_at(delta: f64, on: &[f64], off: &[f64]) -> f64 {
    let tp = off.iter().filter(|&&s| s > delta).count() as f64;
    let fp = on.iter().filter(|&&s| s > delta).count() as f64;
    let fnn = off.iter().filter(|&&s| s <= delta).count() as f64;
    if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fnn) }
}

/// All candidate thresholds: midpoints between adjacent distinct values of
/// the merged score list, plus sentinels below and above everything.
fn candidate_thresholds(on: &[f64], off: &[f64]) -> Vec<f64> {
    let mut merged: Vec<f64> = on.iter().chain(off).copied().collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();
    let mut candidates = Vec::with_capacity(merged.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    for pair in merged.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    candidates.push(f64::INFINITY);
    candidates
}

/// Picks the threshold minimizing `|FPR - FNR|` over all candidates.
/// Ties break toward larger F1, then toward the lower threshold. Perfectly
/// separated score sets yield the midpoint of the separating gap with both
/// rates at zero.
pub fn calibrate_eer(on_scores: &[f64], off_scores: &[f64]) -> Result<EerReport, CalibrateError> {
    if on_scores.is_empty() || off_scores.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    let first = on_scores[0];
    if on_scores.iter().chain(off_scores).all(|&s| s == first) {
        return Err(CalibrateError::DegenerateScores);
    }

    // (delta, |fpr - fnr|, f1)
    let mut best: Option<(f64, f64, f64)> = None;
    let mut best_rates = (0.0, 0.0);
    for delta in candidate_thresholds(on_scores, off_scores) {
        if !delta.is_finite() {
            // The sentinels mark total rejection/acceptance; any finite
            // candidate is at least as balanced, so they never win and must
            // not be persisted (thresholds are finite by contract).
            continue;
        }
        let (fpr, fnr) = rates_at(delta, on_scores, off_scores);
        let diff = (fpr - fnr).abs();
        let f1 = f1_at(delta, on_scores, off_scores);
        let better = match best {
            None => true,
            Some((b_delta, b_diff, b_f1)) => {
                diff < b_diff
                    || (diff == b_diff && f1 > b_f1)
                    || (diff == b_diff && f1 == b_f1 && delta < b_delta)
            }
        };
        if better {
            best = Some((delta, diff, f1));
            best_rates = (fpr, fnr);
        }
    }
    let (delta, ..) = best.expect("nonempty candidate list");
    Ok(EerReport {
        threshold: Threshold { delta, method: ThresholdMethod::Eer },
        fpr: best_rates.0,
        fnr: best_rates.1,
    })
}

/// Linear-interpolation empirical quantile of on-topic training distances.
pub fn calibrate_quantile(train_distances: &[f64], q: f64) -> Result<Threshold, CalibrateError> {
    if train_distances.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(CalibrateError::BadQuantile(q));
    }
    let mut sorted = train_distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h as usize;
    let frac = h - lo as f64;
    let delta = if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    };
    Ok(Threshold { delta, method: ThresholdMethod::Quantile { q } })
}

/// The joint decision: at or below the threshold the essay keeps its
/// denormalized predicted grade; above it the essay is flagged and graded
/// zero regardless of the predicted score.
pub fn decide(
    essay_id: &str,
    d_total: f64,
    y_s: f64,
    threshold: &Threshold,
    prompt: &Prompt,
) -> Decision {
    if d_total <= threshold.delta {
        Decision {
            essay_id: String::from(essay_id),
            d_total,
            predicted_class: TopicClass::OnTopic,
            final_score: denormalize_score(y_s, prompt),
        }
    } else {
        Decision {
            essay_id: String::from(essay_id),
            d_total,
            predicted_class: TopicClass::OffTopic,
            final_score: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn separated_sets_split_at_the_gap_midpoint() {
        let report = calibrate_eer(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_eq!(report.threshold.delta, 6.5);
        assert_eq!(report.fpr, 0.0);
        assert_eq!(report.fnr, 0.0);
    }

    #[test]
    fn interleaved_sets_hit_the_equal_error_point() {
        // Candidates: -inf, 1.5, 2.5, 3.5, +inf. Only 2.5 equalizes the
        // rates (brute-forced by hand: FPR = FNR = 0.5).
        let report = calibrate_eer(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert_eq!(report.threshold.delta, 2.5);
        assert_eq!(report.fpr, 0.5);
        assert_eq!(report.fnr, 0.5);
    }

    #[test]
    fn identical_scores_are_degenerate() {
        assert_eq!(
            calibrate_eer(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]),
            Err(CalibrateError::DegenerateScores)
        );
        assert_eq!(calibrate_eer(&[], &[1.0]), Err(CalibrateError::EmptyInput));
    }

    #[test]
    fn eer_gap_is_minimal_over_exhaustive_candidates() {
        // Any other candidate threshold must have at least the winning gap.
        let on = vec![0.2, 0.5, 0.9, 1.4, 2.0, 2.2];
        let off = vec![1.1, 1.9, 2.5, 3.0, 3.3];
        let report = calibrate_eer(&on, &off).unwrap();
        let winning_gap = (report.fpr - report.fnr).abs();
        for delta in candidate_thresholds(&on, &off) {
            let (fpr, fnr) = rates_at(delta, &on, &off);
            assert!(
                (fpr - fnr).abs() >= winning_gap - 1e-15,
                "candidate {delta} beats the reported threshold"
            );
        }
    }

    #[test]
    fn eer_only_depends_on_score_order() {
        // Any strictly increasing transform leaves the achieved rates
        // unchanged (the threshold itself moves with the scores).
        let on = vec![0.1, 0.7, 1.3, 2.9];
        let off = vec![0.9, 2.0, 3.5];
        let before = calibrate_eer(&on, &off).unwrap();
        let squash = |v: f64| crate::num::exp(v * 0.5) + 3.0;
        let on_t: Vec<f64> = on.iter().map(|&v| squash(v)).collect();
        let off_t: Vec<f64> = off.iter().map(|&v| squash(v)).collect();
        let after = calibrate_eer(&on_t, &off_t).unwrap();
        assert_eq!(before.fpr, after.fpr);
        assert_eq!(before.fnr, after.fnr);
    }

    #[test]
    fn quantile_is_the_interpolated_order_statistic() {
        let t = calibrate_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap();
        assert_eq!(t.delta, 3.0);
        let t = calibrate_quantile(&[4.0], 0.9).unwrap();
        assert_eq!(t.delta, 4.0);
        assert!(matches!(
            calibrate_quantile(&[], 0.5),
            Err(CalibrateError::EmptyInput)
        ));
        assert!(matches!(
            calibrate_quantile(&[1.0], 1.0),
            Err(CalibrateError::BadQuantile(_))
        ));
    }

    #[test]
    fn quantile_tracks_the_underlying_distribution() {
        // 0.95-quantile of ~uniform(0,1) draws lands near 0.95.
        let mut rng = crate::seed::rng(4242);
        use rand::Rng;
        let draws: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
        let t = calibrate_quantile(&draws, 0.95).unwrap();
        assert!((t.delta - 0.95).abs() < 0.03, "delta {}", t.delta);
    }

    fn prompt() -> Prompt {
        Prompt { id: "p".into(), topic_keywords: vec![], score_min: 0, score_max: 10 }
    }

    #[test]
    fn boundary_score_stays_on_topic() {
        let t = Threshold { delta: 5.0, method: ThresholdMethod::Eer };
        let d = decide("e1", 5.0, 0.62, &t, &prompt());
        assert_eq!(d.predicted_class, TopicClass::OnTopic);
        assert_eq!(d.final_score, 6);
        let d = decide("e1", 5.0 + 1e-9, 0.62, &t, &prompt());
        assert_eq!(d.predicted_class, TopicClass::OffTopic);
        assert_eq!(d.final_score, 0);
    }

    #[test]
    fn flagged_essays_always_score_zero() {
        let t = Threshold { delta: 1.0, method: ThresholdMethod::Eer };
        for y_s in [0.0, 0.5, 1.0, 4.2] {
            let d = decide("e", 2.0, y_s, &t, &prompt());
            assert_eq!(d.final_score, 0);
            assert_eq!(d.predicted_class, TopicClass::OffTopic);
        }
    }

    #[test]
    fn raising_the_threshold_never_flags_more() {
        let scores = [0.3, 0.9, 1.7, 2.4, 3.3];
        let p = prompt();
        for window in [(0.5, 1.8), (1.8, 2.5), (0.0, 10.0)] {
            let low = Threshold { delta: window.0, method: ThresholdMethod::Eer };
            let high = Threshold { delta: window.1, method: ThresholdMethod::Eer };
            for &s in &scores {
                let d_low = decide("e", s, 0.5, &low, &p);
                let d_high = decide("e", s, 0.5, &high, &p);
                // Monotone: on-topic under the low threshold stays on-topic
                // under the higher one.
                if d_low.predicted_class == TopicClass::OnTopic {
                    assert_eq!(d_high.predicted_class, TopicClass::OnTopic);
                }
            }
        }
    }
}
