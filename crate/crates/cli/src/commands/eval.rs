use std::collections::BTreeMap;
use std::io::Write;

use ontopic_core::calibrate::TopicClass;
use ontopic_core::corpus::denormalize_score;
use ontopic_core::metrics;

use crate::args::EvalArgs;
use crate::formats::{decisions, fmt_f64, jsonl, manifest};
use crate::{CliError, CliResult, resolve_out_dir};

/// Joins decisions with their labeled input rows and emits the metric
/// table, a JSON summary and histogram data. An input row counts as
/// off-topic truth when it belongs to another prompt or carries a
/// perturbation tag.
pub fn run(args: &EvalArgs) -> CliResult {
    let corpus = manifest::read_corpus_dir(&args.corpus)?;
    let prompt = corpus
        .prompt(&args.prompt)
        .ok_or_else(|| CliError::Data(anyhow::anyhow!("prompt '{}' not in corpus", args.prompt)))?
        .clone();

    let rows = decisions::read(&args.decisions)?;
    let (input_rows, rejects) = jsonl::read_rows(&args.input)?;
    if let Some(first) = rejects.first() {
        return Err(CliError::Data(anyhow::anyhow!(
            "input line {}: {}",
            first.row,
            first.error
        )));
    }
    let inputs: BTreeMap<String, jsonl::EssayRow> =
        input_rows.into_iter().map(|(_, r)| (r.id.clone(), r)).collect();

    let mut pairs: Vec<(TopicClass, TopicClass)> = Vec::new();
    let mut on_scores = Vec::new();
    let mut off_scores = Vec::new();
    let mut pred_grades = Vec::new();
    let mut joint_grades = Vec::new();
    let mut gold_grades = Vec::new();
    for row in &rows {
        let input = inputs.get(&row.essay_id).ok_or_else(|| {
            CliError::Data(anyhow::anyhow!(
                "decision for '{}' has no matching input row",
                row.essay_id
            ))
        })?;
        let truly_off = input.prompt_id != args.prompt || input.perturbation.is_some();
        let truth = if truly_off { TopicClass::OffTopic } else { TopicClass::OnTopic };
        pairs.push((row.predicted_class, truth));
        if truly_off {
            off_scores.push(row.d_total);
        } else {
            on_scores.push(row.d_total);
            if let Some(gold) = input.score {
                gold_grades.push(gold);
                pred_grades.push(denormalize_score(row.y_s, &prompt));
                joint_grades.push(row.final_score);
            }
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no decisions to evaluate")));
    }

    let detection = metrics::detection_metrics(&pairs);
    let agreement_of = |pred: &[i32], label: &str| {
        if gold_grades.len() < 2 {
            return None;
        }
        match metrics::agreement(pred, &gold_grades, prompt.score_min, prompt.score_max) {
            Ok(a) => Some(a),
            Err(e) => {
                eprintln!("note: {label} agreement unavailable: {e}");
                None
            }
        }
    };
    let scoring = agreement_of(&pred_grades, "scoring");
    let joint = agreement_of(&joint_grades, "joint");
    let histogram = if !on_scores.is_empty() && !off_scores.is_empty() {
        Some(metrics::histogram_report(&on_scores, &off_scores, args.bins)?)
    } else {
        None
    };

    let out = resolve_out_dir(args.out.as_deref(), "eval");
    std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;

    // Metric table: dataset,model,prompt,metric,value rows.
    let mut metric_rows: Vec<(String, f64)> = vec![
        ("precision".into(), detection.precision),
        ("recall".into(), detection.recall),
        ("f1".into(), detection.f1),
        ("n_on".into(), on_scores.len() as f64),
        ("n_off".into(), off_scores.len() as f64),
    ];
    if let Some(s) = &scoring {
        metric_rows.push(("qwk".into(), s.qwk));
        metric_rows.push(("pearson".into(), s.pearson));
    }
    if let Some(j) = &joint {
        metric_rows.push(("qwk_joint".into(), j.qwk));
    }
    if let Some(h) = &histogram {
        metric_rows.push(("overlap".into(), h.overlap));
    }
    let mut csv = String::from("dataset,model,prompt,metric,value\n");
    for (metric, value) in &metric_rows {
        csv.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            args.dataset, args.model, args.prompt, metric, value
        ));
    }
    std::fs::write(out.join("metrics.csv"), csv).map_err(anyhow::Error::from)?;

    let summary = serde_json::json!({
        "dataset": args.dataset,
        "model": args.model,
        "prompt": args.prompt,
        "detection": {
            "precision": detection.precision,
            "recall": detection.recall,
            "f1": detection.f1,
            "tp": detection.counts.true_pos,
            "fp": detection.counts.false_pos,
            "fn": detection.counts.false_neg,
            "tn": detection.counts.true_neg,
        },
        "scoring": scoring.as_ref().map(|s| serde_json::json!({
            "qwk": s.qwk, "pearson": s.pearson, "n": s.n,
        })),
        "joint_qwk": joint.as_ref().map(|j| j.qwk),
        "overlap": histogram.as_ref().map(|h| h.overlap),
    });
    let mut summary_text =
        serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?;
    summary_text.push('\n');
    std::fs::write(out.join("summary.json"), summary_text).map_err(anyhow::Error::from)?;

    if let Some(h) = &histogram {
        let mut hist_out = std::io::BufWriter::new(
            std::fs::File::create(out.join("histogram.csv")).map_err(anyhow::Error::from)?,
        );
        writeln!(hist_out, "bin_low,bin_high,count_on,count_off").map_err(anyhow::Error::from)?;
        for bin in &h.bins {
            writeln!(
                hist_out,
                "{},{},{},{}",
                fmt_f64(bin.low),
                fmt_f64(bin.high),
                bin.count_on,
                bin.count_off
            )
            .map_err(anyhow::Error::from)?;
        }
        hist_out.flush().map_err(anyhow::Error::from)?;
    }

    eprintln!(
        "evaluated {} decisions: F1 {:.3}, outputs in {}",
        pairs.len(),
        detection.f1,
        out.display()
    );
    Ok(())
}
