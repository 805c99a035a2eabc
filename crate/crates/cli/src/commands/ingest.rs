//! Dataset ingestion. JSONL is the canonical format; the TSV path maps
//! ASAP-style exports (essay_id, essay_set, essay, domain1_score columns).

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use ontopic_core::corpus::{Prompt, RawEssayRow, RowError, RowReject, ingest_rows};

use crate::args::{IngestArgs, IngestFormat};
use crate::formats::{jsonl, manifest};
use crate::{CliError, CliResult, resolve_out_dir};

pub fn run(args: &IngestArgs) -> CliResult {
    let (rows, mut rejects) = match args.format {
        IngestFormat::Jsonl => {
            let (rows, rejects) = jsonl::read_rows(&args.input)?;
            (rows.into_iter().map(|(i, r)| (i, r.raw())).collect(), rejects)
        }
        IngestFormat::Tsv => read_tsv_rows(&args.input)?,
    };

    let prompts = match &args.prompts {
        Some(path) => manifest::read_prompts(path)?,
        None => infer_prompts(&rows),
    };

    let outcome = ingest_rows(prompts, rows, args.seed)?;
    rejects.extend(outcome.rejects);
    rejects.sort_by_key(|r| r.row);

    for reject in &rejects {
        eprintln!("row {}: rejected: {}", reject.row, reject.error);
    }
    if args.strict && !rejects.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "{} rows rejected in strict mode",
            rejects.len()
        )));
    }
    if outcome.corpus.essays.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no valid essays ingested")));
    }

    let out = resolve_out_dir(args.out.as_deref(), "corpus");
    manifest::write_corpus_dir(&out, &outcome.corpus)?;
    eprintln!(
        "ingested {} essays ({} rejected) across {} prompts into {}",
        outcome.corpus.essays.len(),
        rejects.len(),
        outcome.corpus.prompts.len(),
        out.display()
    );
    Ok(())
}

/// ASAP-style TSV: a header line naming at least essay_id, essay_set and
/// essay, with the grade in domain1_score (or score).
fn read_tsv_rows(path: &Path) -> anyhow::Result<(Vec<(usize, RawEssayRow)>, Vec<RowReject>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open {}: {e}", path.display()))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| anyhow::anyhow!("empty TSV file"))??;
    let cols: Vec<&str> = header.split('\t').collect();
    let col = |name: &str| cols.iter().position(|c| c.trim() == name);
    let id_col = col("essay_id")
        .ok_or_else(|| anyhow::anyhow!("TSV header missing essay_id column"))?;
    let set_col = col("essay_set")
        .ok_or_else(|| anyhow::anyhow!("TSV header missing essay_set column"))?;
    let text_col =
        col("essay").ok_or_else(|| anyhow::anyhow!("TSV header missing essay column"))?;
    let score_col = col("domain1_score").or_else(|| col("score"));

    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row_idx = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let needed = [Some(id_col), Some(set_col), Some(text_col), score_col]
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0);
        if fields.len() <= needed {
            rejects.push(RowReject {
                row: row_idx,
                error: RowError::Malformed(format!("expected > {needed} columns")),
            });
            continue;
        }
        let score = match score_col {
            None => None,
            Some(c) => {
                let raw = fields[c].trim();
                if raw.is_empty() {
                    None
                } else {
                    match raw.parse::<i32>() {
                        Ok(v) => Some(v),
                        Err(e) => {
                            rejects.push(RowReject {
                                row: row_idx,
                                error: RowError::Malformed(format!("bad score '{raw}': {e}")),
                            });
                            continue;
                        }
                    }
                }
            }
        };
        rows.push((
            row_idx,
            RawEssayRow {
                id: fields[id_col].trim().to_string(),
                prompt_id: fields[set_col].trim().to_string(),
                text: fields[text_col].to_string(),
                score,
                split: None,
            },
        ));
    }
    Ok((rows, rejects))
}

/// With no manifest, each prompt's score range comes from the observed
/// scores; scoreless prompts fall back to 0..=1.
fn infer_prompts(rows: &[(usize, RawEssayRow)]) -> BTreeMap<String, Prompt> {
    let mut ranges: BTreeMap<String, (i32, i32)> = BTreeMap::new();
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    for (_, row) in rows {
        seen.entry(row.prompt_id.clone()).or_default();
        if let Some(score) = row.score {
            let entry = ranges.entry(row.prompt_id.clone()).or_insert((score, score));
            entry.0 = entry.0.min(score);
            entry.1 = entry.1.max(score);
        }
    }
    seen.keys()
        .map(|id| {
            let (min, max) = ranges.get(id).copied().unwrap_or((0, 1));
            let max = if max > min { max } else { min + 1 };
            (
                id.clone(),
                Prompt {
                    id: id.clone(),
                    topic_keywords: Vec::new(),
                    score_min: min,
                    score_max: max,
                },
            )
        })
        .collect()
}
