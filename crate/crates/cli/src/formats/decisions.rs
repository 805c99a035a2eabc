//! Decisions CSV: one row per essay with the detection score, per-layer
//! distances (when the model detects via layer statistics), head outputs
//! and the joint decision. Floats round-trip exactly through the text form.

use std::io::{BufRead, Write};
use std::path::Path;

use ontopic_core::calibrate::TopicClass;

use super::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub essay_id: String,
    pub d_total: f64,
    /// Per-layer Mahalanobis distances; empty for models whose detection
    /// score comes from the head.
    pub per_layer: Vec<f64>,
    pub y_h: f64,
    /// Gate value; only gated heads have one.
    pub y_t: Option<f64>,
    pub y_s: f64,
    pub predicted_class: TopicClass,
    pub final_score: i32,
}

pub fn header(n_layers: usize) -> String {
    let mut cols = vec!["essay_id".to_string(), "d_total".to_string()];
    for l in 1..=n_layers {
        cols.push(format!("d_l{l}"));
    }
    cols.extend(
        ["y_h", "y_t", "y_s", "predicted_class", "final_score"].map(str::to_string),
    );
    cols.join(",")
}

pub fn write(path: &Path, rows: &[DecisionRow], n_layers: usize) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header(n_layers))?;
    for row in rows {
        debug_assert_eq!(row.per_layer.len(), n_layers);
        let mut fields = vec![row.essay_id.clone(), fmt_f64(row.d_total)];
        fields.extend(row.per_layer.iter().map(|&d| fmt_f64(d)));
        fields.push(fmt_f64(row.y_h));
        fields.push(row.y_t.map(fmt_f64).unwrap_or_default());
        fields.push(fmt_f64(row.y_s));
        fields.push(row.predicted_class.as_str().to_string());
        fields.push(row.final_score.to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<Vec<DecisionRow>> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open decisions {}: {e}", path.display()))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| anyhow::anyhow!("decisions file is empty"))??;
    let cols: Vec<&str> = header_line.split(',').collect();
    let n_layers = cols.iter().filter(|c| c.starts_with("d_l")).count();
    let expected = 7 + n_layers;
    if cols.len() != expected {
        anyhow::bail!("unexpected decisions header: {header_line}");
    }

    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            anyhow::bail!("row {idx}: expected {expected} fields, got {}", fields.len());
        }
        let parse_f64 = |s: &str, what: &str| -> anyhow::Result<f64> {
            s.parse::<f64>()
                .map_err(|e| anyhow::anyhow!("row {idx}: bad {what} '{s}': {e}"))
        };
        let per_layer = fields[2..2 + n_layers]
            .iter()
            .map(|s| parse_f64(s, "layer distance"))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        let base = 2 + n_layers;
        let y_t = if fields[base + 1].is_empty() {
            None
        } else {
            Some(parse_f64(fields[base + 1], "y_t")?)
        };
        let predicted_class = TopicClass::parse(fields[base + 3])
            .ok_or_else(|| anyhow::anyhow!("row {idx}: bad class '{}'", fields[base + 3]))?;
        rows.push(DecisionRow {
            essay_id: fields[0].to_string(),
            d_total: parse_f64(fields[1], "d_total")?,
            per_layer,
            y_h: parse_f64(fields[base], "y_h")?,
            y_t,
            y_s: parse_f64(fields[base + 2], "y_s")?,
            predicted_class,
            final_score: fields[base + 4]
                .parse()
                .map_err(|e| anyhow::anyhow!("row {idx}: bad final_score: {e}"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.csv");
        let rows = vec![
            DecisionRow {
                essay_id: "e1".into(),
                d_total: 12.345678901234567,
                per_layer: vec![1.1, 2.2, 9.045678901234567],
                y_h: 0.71,
                y_t: Some(0.93),
                y_s: 0.6603,
                predicted_class: TopicClass::OnTopic,
                final_score: 7,
            },
            DecisionRow {
                essay_id: "e2".into(),
                d_total: 1e-17,
                per_layer: vec![0.0, 0.0, 1e-17],
                y_h: -0.2,
                y_t: None,
                y_s: -0.2,
                predicted_class: TopicClass::OffTopic,
                final_score: 0,
            },
        ];
        write(&path, &rows, 3).unwrap();
        assert_eq!(read(&path).unwrap(), rows);
    }

    #[test]
    fn empty_input_still_writes_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.csv");
        write(&path, &[], 2).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "essay_id,d_total,d_l1,d_l2,y_h,y_t,y_s,predicted_class,final_score\n");
        assert!(read(&path).unwrap().is_empty());
    }
}
