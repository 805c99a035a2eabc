//! Property tests for the cross-module invariants: score round-trips,
//! metric symmetries, threshold monotonicity, distance positivity and
//! perturbation conservation laws.

use proptest::prelude::*;

use ontopic_core::adversary;
use ontopic_core::calibrate::{self, ThresholdMethod, TopicClass};
use ontopic_core::corpus::{self, Essay, Prompt, Split};
use ontopic_core::metrics;
use ontopic_core::oodstats;
use ontopic_core::trm::{Affine, TrmHead, head_forward};

fn prompt(min: i32, max: i32) -> Prompt {
    Prompt { id: "p".into(), topic_keywords: vec![], score_min: min, score_max: max }
}

fn arb_range() -> impl Strategy<Value = (i32, i32)> {
    (-5i32..=20, 1i32..=60).prop_map(|(min, span)| (min, min + span))
}

proptest! {
    #[test]
    fn normalize_then_denormalize_is_identity((min, max) in arb_range(), frac in 0.0f64..1.0) {
        let p = prompt(min, max);
        let grade = min + ((max - min) as f64 * frac) as i32;
        let y = corpus::normalize_score(grade, &p).unwrap();
        prop_assert_eq!(corpus::denormalize_score(y, &p), grade);
    }

    #[test]
    fn denormalize_always_lands_in_range(y in -3.0f64..4.0, (min, max) in arb_range()) {
        let p = prompt(min, max);
        let g = corpus::denormalize_score(y, &p);
        prop_assert!(g >= min && g <= max);
    }

    #[test]
    fn qwk_is_symmetric_and_shift_invariant(
        grades in proptest::collection::vec((0i32..6, 0i32..6), 2..40),
        shift in -10i32..10,
    ) {
        let pred: Vec<i32> = grades.iter().map(|g| g.0).collect();
        let gold: Vec<i32> = grades.iter().map(|g| g.1).collect();
        if let Ok(ab) = metrics::qwk(&pred, &gold, 0, 5) {
            let ba = metrics::qwk(&gold, &pred, 0, 5).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            let pred_s: Vec<i32> = pred.iter().map(|v| v + shift).collect();
            let gold_s: Vec<i32> = gold.iter().map(|v| v + shift).collect();
            let shifted = metrics::qwk(&pred_s, &gold_s, shift, 5 + shift).unwrap();
            prop_assert!((ab - shifted).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_survives_positive_affine_maps(
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
        a in 0.01f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(r) = metrics::pearson(&xs, &ys) {
            let xs_t: Vec<f64> = xs.iter().map(|&x| a * x + b).collect();
            let r_t = metrics::pearson(&xs_t, &ys).unwrap();
            prop_assert!((r - r_t).abs() < 1e-8, "{} vs {}", r, r_t);
        }
    }

    #[test]
    fn f1_is_bounded_by_the_arithmetic_mean(
        tp in 0usize..30, fp in 0usize..30, fnn in 0usize..30, tn in 0usize..30,
    ) {
        let mut pairs = Vec::new();
        pairs.extend((0..tp).map(|_| (TopicClass::OffTopic, TopicClass::OffTopic)));
        pairs.extend((0..fp).map(|_| (TopicClass::OffTopic, TopicClass::OnTopic)));
        pairs.extend((0..fnn).map(|_| (TopicClass::OnTopic, TopicClass::OffTopic)));
        pairs.extend((0..tn).map(|_| (TopicClass::OnTopic, TopicClass::OnTopic)));
        let report = metrics::detection_metrics(&pairs);
        prop_assert!(report.f1 <= 0.5 * (report.precision + report.recall) + 1e-15);
        prop_assert!(report.f1 >= 0.0 && report.f1 <= 1.0);
    }

    #[test]
    fn raising_the_threshold_never_flags_more_essays(
        scores in proptest::collection::vec(0.0f64..100.0, 1..40),
        d1 in 0.0f64..100.0,
        d2 in 0.0f64..100.0,
    ) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let p = prompt(0, 10);
        let t_lo = calibrate::Threshold { delta: lo, method: ThresholdMethod::Eer };
        let t_hi = calibrate::Threshold { delta: hi, method: ThresholdMethod::Eer };
        for &s in &scores {
            let d_lo = calibrate::decide("e", s, 0.5, &t_lo, &p);
            let d_hi = calibrate::decide("e", s, 0.5, &t_hi, &p);
            if d_lo.predicted_class == TopicClass::OnTopic {
                prop_assert_eq!(d_hi.predicted_class, TopicClass::OnTopic);
            }
        }
    }

    #[test]
    fn eer_gap_is_minimal_and_order_invariant(
        on in proptest::collection::vec(0.0f64..10.0, 1..20),
        off in proptest::collection::vec(0.0f64..10.0, 1..20),
    ) {
        let Ok(report) = calibrate::calibrate_eer(&on, &off) else {
            return Ok(());
        };
        let winning = (report.fpr - report.fnr).abs();
        // Exhaustive check over every candidate threshold.
        let mut merged: Vec<f64> = on.iter().chain(&off).copied().collect();
        merged.sort_by(f64::total_cmp);
        merged.dedup();
        let mut candidates: Vec<f64> = merged.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        candidates.push(f64::NEG_INFINITY);
        candidates.push(f64::INFINITY);
        for delta in candidates {
            let fpr = on.iter().filter(|&&s| s > delta).count() as f64 / on.len() as f64;
            let fnr = off.iter().filter(|&&s| s <= delta).count() as f64 / off.len() as f64;
            prop_assert!((fpr - fnr).abs() >= winning - 1e-12);
        }
        // Only score order matters: a strictly increasing transform keeps
        // the achieved rates.
        let squash = |v: f64| (v * 0.3).exp() + 1.0;
        let on_t: Vec<f64> = on.iter().map(|&v| squash(v)).collect();
        let off_t: Vec<f64> = off.iter().map(|&v| squash(v)).collect();
        let report_t = calibrate::calibrate_eer(&on_t, &off_t).unwrap();
        prop_assert_eq!(report.fpr, report_t.fpr);
        prop_assert_eq!(report.fnr, report_t.fnr);
    }

    #[test]
    fn gated_score_identity_holds_everywhere(
        w_s in proptest::collection::vec(-2.0f64..2.0, 5),
        w_g in proptest::collection::vec(-2.0f64..2.0, 5),
        b_s in -2.0f64..2.0,
        b_g in -2.0f64..2.0,
        x in proptest::collection::vec(-1.0f64..1.0, 5),
    ) {
        let head = TrmHead {
            score: Affine { w: w_s, b: b_s },
            gate: Affine { w: w_g, b: b_g },
        };
        let out = head_forward(&head, &x);
        prop_assert_eq!(out.y_s, out.y_t * out.y_h);
        prop_assert!(out.y_t > 0.0 && out.y_t < 1.0);
    }

    #[test]
    fn distances_are_nonnegative_and_zero_at_the_mean(
        samples in proptest::collection::vec(
            proptest::collection::vec(-1.0f64..1.0, 3),
            4..25,
        ),
        query in proptest::collection::vec(-2.0f64..2.0, 3),
    ) {
        let features: Vec<Vec<Vec<f64>>> = samples.iter().map(|s| vec![s.clone()]).collect();
        let stats = oodstats::fit(&features).unwrap();
        let d = stats.distance(&[query]).unwrap();
        prop_assert!(d.total >= 0.0);
        let at_mean = stats.distance(&[stats.layers[0].mean.clone()]).unwrap();
        prop_assert!(at_mean.total.abs() < 1e-9);
    }

    #[test]
    fn perturbations_preserve_the_original_sentences(
        n_sentences in 1usize..8,
        n_repeats in 1usize..4,
        n_targets in 1usize..4,
        seed in 0u64..1000,
    ) {
        let text: Vec<String> = (0..n_sentences)
            .map(|i| format!("sentence number {i} with content."))
            .collect();
        let essay = Essay {
            id: "e".into(),
            prompt_id: "p1".into(),
            text: text.join(" "),
            gold_score: Some(1),
            split: Split::Test,
        };
        // repeat_sent: output multiset contains the input multiset.
        let repeated = adversary::repeat_sent(&essay, n_repeats, n_targets, seed).unwrap();
        let out = ontopic_core::text::sentences(&repeated.text);
        for s in &text {
            prop_assert!(out.contains(s));
        }
        let expected = n_sentences + n_repeats * n_targets.min(n_sentences);
        prop_assert_eq!(out.len(), expected);

        // add_speech: originals survive in order.
        let speech = adversary::default_speech_sentences();
        let k = 1 + (seed as usize % 3);
        let added = adversary::add_speech(&essay, &speech, k, seed).unwrap();
        let added_sents = ontopic_core::text::sentences(&added.text);
        let mut it = added_sents.iter();
        for s in &text {
            prop_assert!(it.any(|h| h == s), "lost original sentence");
        }
        prop_assert_eq!(added_sents.len(), n_sentences + k);

        // Determinism: same inputs and seed give identical outputs.
        prop_assert_eq!(
            adversary::repeat_sent(&essay, n_repeats, n_targets, seed).unwrap().text,
            repeated.text
        );
        prop_assert_eq!(
            adversary::add_speech(&essay, &speech, k, seed).unwrap().text,
            added.text
        );
    }

    #[test]
    fn replaced_bodies_keep_no_interior_sentence(
        n_body in 1usize..6,
        seed in 0u64..500,
    ) {
        let mut sentences = vec!["opening line stays put.".to_string()];
        sentences.extend((0..n_body).map(|i| format!("unique interior sentence {i}.")));
        sentences.push("closing line stays put.".to_string());
        let essay = Essay {
            id: "e".into(),
            prompt_id: "p1".into(),
            text: sentences.join(" "),
            gold_score: None,
            split: Split::Test,
        };
        let donors = vec![Essay {
            id: "d".into(),
            prompt_id: "p2".into(),
            text: (0..12).map(|i| format!("donor material {i}.")).collect::<Vec<_>>().join(" "),
            gold_score: None,
            split: Split::Train,
        }];
        let out = adversary::replace_sents(&essay, &donors, seed).unwrap();
        let got = ontopic_core::text::sentences(&out.text);
        prop_assert_eq!(got.first(), sentences.first());
        prop_assert_eq!(got.last(), sentences.last());
        for s in &got[1..got.len() - 1] {
            prop_assert!(!s.contains("interior"), "body sentence survived: {}", s);
            prop_assert!(s.contains("donor"));
        }
        let body = got.len() - 2;
        let lo = ((n_body as f64) * 0.5).ceil() as usize;
        let hi = ((n_body as f64) * 1.5).floor() as usize;
        prop_assert!(body >= lo.max(1) && body <= hi.max(lo.max(1)));
    }
}
