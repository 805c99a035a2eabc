//! Essay JSONL: one object per line with fields `id`, `prompt_id`, `text`,
//! optional `score`, `split` and `perturbation`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use ontopic_core::corpus::{Corpus, Essay, RawEssayRow, RowReject};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EssayRow {
    pub id: String,
    pub prompt_id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<String>,
}

impl EssayRow {
    pub fn from_essay(e: &Essay) -> Self {
        Self {
            id: e.id.clone(),
            prompt_id: e.prompt_id.clone(),
            text: e.text.clone(),
            score: e.gold_score,
            split: Some(e.split.as_str().to_string()),
            perturbation: None,
        }
    }

    pub fn with_perturbation(mut self, kind: &str) -> Self {
        self.perturbation = Some(kind.to_string());
        self
    }

    pub fn raw(&self) -> RawEssayRow {
        RawEssayRow {
            id: self.id.clone(),
            prompt_id: self.prompt_id.clone(),
            text: self.text.clone(),
            score: self.score,
            split: self.split.clone(),
        }
    }
}

/// Parses a JSONL file into rows; unparseable lines come back as rejects
/// with their zero-based line index. Blank lines are skipped.
pub fn read_rows(path: &Path) -> anyhow::Result<(Vec<(usize, EssayRow)>, Vec<RowReject>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EssayRow>(&line) {
            Ok(row) => rows.push((idx, row)),
            Err(e) => rejects.push(RowReject {
                row: idx,
                error: ontopic_core::corpus::RowError::Malformed(format!("bad json: {e}")),
            }),
        }
    }
    Ok((rows, rejects))
}

pub fn write_rows(path: &Path, rows: &[EssayRow]) -> anyhow::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_corpus_essays(path: &Path, corpus: &Corpus) -> anyhow::Result<()> {
    let rows: Vec<EssayRow> = corpus.essays.iter().map(EssayRow::from_essay).collect();
    write_rows(path, &rows)
}
