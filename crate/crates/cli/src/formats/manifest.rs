//! Prompt manifest: a JSON array of prompt descriptors with score ranges.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ontopic_core::corpus::{Corpus, Prompt};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptEntry {
    pub id: String,
    pub score_min: i32,
    pub score_max: i32,
    #[serde(default)]
    pub topic_keywords: Vec<String>,
}

pub fn read_prompts(path: &Path) -> anyhow::Result<BTreeMap<String, Prompt>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let entries: Vec<PromptEntry> = serde_json::from_str(&text)?;
    let mut out = BTreeMap::new();
    for e in entries {
        if e.score_min >= e.score_max {
            anyhow::bail!("prompt {}: score_min must be below score_max", e.id);
        }
        out.insert(
            e.id.clone(),
            Prompt {
                id: e.id,
                topic_keywords: e.topic_keywords,
                score_min: e.score_min,
                score_max: e.score_max,
            },
        );
    }
    Ok(out)
}

pub fn write_prompts(path: &Path, corpus: &Corpus) -> anyhow::Result<()> {
    let entries: Vec<PromptEntry> = corpus
        .prompts
        .values()
        .map(|p| PromptEntry {
            id: p.id.clone(),
            score_min: p.score_min,
            score_max: p.score_max,
            topic_keywords: p.topic_keywords.clone(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&entries)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a corpus directory: `prompts.json` plus `corpus.jsonl`.
pub fn read_corpus_dir(dir: &Path) -> anyhow::Result<Corpus> {
    let prompts = read_prompts(&dir.join("prompts.json"))?;
    let (rows, rejects) = super::jsonl::read_rows(&dir.join("corpus.jsonl"))?;
    if !rejects.is_empty() {
        anyhow::bail!("corpus.jsonl has {} malformed lines", rejects.len());
    }
    let raw: Vec<_> = rows.into_iter().map(|(i, r)| (i, r.raw())).collect();
    let outcome = ontopic_core::corpus::ingest_rows(prompts, raw, 0)?;
    if !outcome.rejects.is_empty() {
        let first = &outcome.rejects[0];
        anyhow::bail!(
            "corpus.jsonl has {} invalid rows (first: row {}: {})",
            outcome.rejects.len(),
            first.row,
            first.error
        );
    }
    Ok(outcome.corpus)
}

pub fn write_corpus_dir(dir: &Path, corpus: &Corpus) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_prompts(&dir.join("prompts.json"), corpus)?;
    super::jsonl::write_corpus_essays(&dir.join("corpus.jsonl"), corpus)?;
    Ok(())
}
