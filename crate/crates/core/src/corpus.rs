//! Essay corpus data model: prompts with score ranges, essays with splits,
//! deterministic synthetic corpus generation and score normalization.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::{num, seed, text};

/// Default split proportions: 70% train, 10% dev, 20% test. The dev slice
/// exists so detection thresholds can be calibrated without touching the
/// test split.
pub const SPLIT_FRACTIONS: (f64, f64) = (0.7, 0.8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// A question prompt: essays are scored on the prompt's integer range.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub id: String,
    pub topic_keywords: Vec<String>,
    pub score_min: i32,
    pub score_max: i32,
}

impl Prompt {
    pub fn grade_count(&self) -> i32 {
        self.score_max - self.score_min + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Essay {
    pub id: String,
    pub prompt_id: String,
    pub text: String,
    pub gold_score: Option<i32>,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Ingested,
    Synthetic,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub prompts: BTreeMap<String, Prompt>,
    pub essays: Vec<Essay>,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn prompt(&self, id: &str) -> Option<&Prompt> {
        self.prompts.get(id)
    }

    /// Essays of one prompt in one split, in corpus order.
    pub fn essays_in(&self, prompt_id: &str, split: Split) -> Vec<&Essay> {
        self.essays
            .iter()
            .filter(|e| e.prompt_id == prompt_id && e.split == split)
            .collect()
    }

    /// All essays of one prompt, any split.
    pub fn essays_of(&self, prompt_id: &str) -> Vec<&Essay> {
        self.essays.iter().filter(|e| e.prompt_id == prompt_id).collect()
    }
}

/// Configuration for the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_prompts: usize,
    pub essays_per_prompt: usize,
    /// Size of the vocabulary shared by every prompt.
    pub vocab_shared: usize,
    /// Size of each prompt's private topic vocabulary.
    pub vocab_per_topic: usize,
    /// Half-width of the uniform noise added to the normalized quality
    /// before it is mapped to a grade.
    pub quality_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_prompts: 3,
            essays_per_prompt: 400,
            vocab_shared: 120,
            vocab_per_topic: 40,
            quality_noise: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n_prompts == 0
            || self.essays_per_prompt == 0
            || self.vocab_shared == 0
            || self.vocab_per_topic == 0
        {
            return Err(CorpusError::InvalidConfig("all counts must be positive"));
        }
        if !(self.quality_noise >= 0.0) {
            return Err(CorpusError::InvalidConfig("quality_noise must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(&'static str),
    #[error("score {score} outside prompt range {min}..={max}")]
    OutOfRange { score: i32, min: i32, max: i32 },
    #[error("no rows in input")]
    EmptyFile,
}

/// Why a row was rejected during ingestion. Collected per row so a single
/// bad line does not abort a large import.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RowError {
    #[error("malformed row: {0}")]
    Malformed(String),
    #[error("unknown prompt '{0}'")]
    UnknownPrompt(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReject {
    /// Zero-based row index in the source file.
    pub row: usize,
    pub error: RowError,
}

/// A parsed-but-unvalidated essay row, as read from JSONL or TSV.
#[derive(Debug, Clone)]
pub struct RawEssayRow {
    pub id: String,
    pub prompt_id: String,
    pub text: String,
    pub score: Option<i32>,
    pub split: Option<String>,
}

pub struct IngestOutcome {
    pub corpus: Corpus,
    pub rejects: Vec<RowReject>,
}

/// Validates raw rows against a prompt manifest and assembles a corpus.
///
/// Row-level problems (empty text, unknown prompt, score outside the
/// prompt's range, unparseable split) reject just that row; the rejects come
/// back with row indices for diagnostics. `split_seed` drives the stable
/// split assignment for rows without an explicit split tag.
pub fn ingest_rows(
    prompts: BTreeMap<String, Prompt>,
    rows: Vec<(usize, RawEssayRow)>,
    split_seed: u64,
) -> Result<IngestOutcome, CorpusError> {
    if rows.is_empty() {
        return Err(CorpusError::EmptyFile);
    }
    let mut essays = Vec::new();
    let mut rejects = Vec::new();
    for (row_idx, raw) in rows {
        let normalized = text::normalize(&raw.text);
        if normalized.is_empty() {
            rejects.push(RowReject {
                row: row_idx,
                error: RowError::Malformed("text empty after trim".to_string()),
            });
            continue;
        }
        let Some(prompt) = prompts.get(&raw.prompt_id) else {
            rejects.push(RowReject {
                row: row_idx,
                error: RowError::UnknownPrompt(raw.prompt_id.clone()),
            });
            continue;
        };
        if let Some(score) = raw.score {
            if score < prompt.score_min || score > prompt.score_max {
                rejects.push(RowReject {
                    row: row_idx,
                    error: RowError::Malformed(format!(
                        "score {score} outside range {}..={}",
                        prompt.score_min, prompt.score_max
                    )),
                });
                continue;
            }
        }
        let split = match raw.split.as_deref() {
            None | Some("") => assign_split(&raw.id, split_seed),
            Some(s) => match Split::parse(s) {
                Some(sp) => sp,
                None => {
                    rejects.push(RowReject {
                        row: row_idx,
                        error: RowError::Malformed(format!("unknown split '{s}'")),
                    });
                    continue;
                }
            },
        };
        essays.push(Essay {
            id: raw.id,
            prompt_id: raw.prompt_id,
            text: normalized,
            gold_score: raw.score,
            split,
        });
    }
    Ok(IngestOutcome {
        corpus: Corpus { prompts, essays, provenance: Provenance::Ingested },
        rejects,
    })
}

/// Stable split assignment: hash the essay id with the corpus seed, bucket
/// by the 70/10/20 fractions. Independent of row order.
pub fn assign_split(essay_id: &str, split_seed: u64) -> Split {
    let u = seed::unit_hash(split_seed, essay_id);
    if u < SPLIT_FRACTIONS.0 {
        Split::Train
    } else if u < SPLIT_FRACTIONS.1 {
        Split::Dev
    } else {
        Split::Test
    }
}

/// Maps a gold score onto `[0, 1]` over the prompt's range.
pub fn normalize_score(gold_score: i32, prompt: &Prompt) -> Result<f64, CorpusError> {
    if gold_score < prompt.score_min || gold_score > prompt.score_max {
        return Err(CorpusError::OutOfRange {
            score: gold_score,
            min: prompt.score_min,
            max: prompt.score_max,
        });
    }
    Ok(f64::from(gold_score - prompt.score_min)
        / f64::from(prompt.score_max - prompt.score_min))
}

/// Maps a (possibly out-of-range) normalized prediction back to an integer
/// grade: clamp to `[0, 1]`, scale, round half away from zero.
pub fn denormalize_score(y: f64, prompt: &Prompt) -> i32 {
    let clamped = y.clamp(0.0, 1.0);
    let span = f64::from(prompt.score_max - prompt.score_min);
    num::round_half_away(clamped * span) as i32 + prompt.score_min
}

// Score ranges assigned to synthetic prompts, cycled in order. Mixed widths
// so normalization and kappa run over more than one grade count.
const SYNTH_RANGES: &[(i32, i32)] = &[(0, 5), (1, 6), (0, 10), (2, 13), (0, 4), (0, 8)];

const CONSONANTS: &[char] = &[
    'b', 'd', 'f', 'g', 'h', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

/// Deterministic pronounceable word list: every index yields a distinct word,
/// so vocabulary slices for different prompts are disjoint by construction.
fn synth_word(index: usize) -> String {
    let n_syll = CONSONANTS.len() * VOWELS.len();
    let syllable = |i: usize| {
        let mut s = String::new();
        s.push(CONSONANTS[i / VOWELS.len()]);
        s.push(VOWELS[i % VOWELS.len()]);
        s
    };
    let mut word = syllable(index % n_syll);
    word.push_str(&syllable((index / n_syll) % n_syll));
    if index >= n_syll * n_syll {
        word.push_str(&syllable((index / (n_syll * n_syll)) % n_syll));
    }
    word
}

/// A synthetic corpus plus the latent quality of each essay, index-aligned
/// with `corpus.essays`. The qualities are diagnostics only; they never
/// reach the model.
pub struct SynthOutcome {
    pub corpus: Corpus,
    pub qualities: Vec<f64>,
}

/// Generates a deterministic prompt-conditioned corpus.
///
/// Each prompt owns a private topic vocabulary disjoint from every other
/// prompt's, on top of a shared vocabulary. Each essay draws a latent
/// quality `q ~ U(0,1)`; sentence count, topic-word ratio and vocabulary
/// richness all increase with `q`, and the gold grade is `q` plus bounded
/// uniform noise mapped onto the prompt's score range.
pub fn synthesize(config: &SynthConfig) -> Result<Corpus, CorpusError> {
    synthesize_detailed(config).map(|o| o.corpus)
}

/// [`synthesize`] with the latent qualities exposed.
pub fn synthesize_detailed(config: &SynthConfig) -> Result<SynthOutcome, CorpusError> {
    config.validate()?;

    let shared: Vec<String> = (0..config.vocab_shared).map(synth_word).collect();
    let topic_base = config.vocab_shared;

    let mut prompts = BTreeMap::new();
    let mut topics: Vec<Vec<String>> = Vec::with_capacity(config.n_prompts);
    for p in 0..config.n_prompts {
        let words: Vec<String> = (0..config.vocab_per_topic)
            .map(|i| synth_word(topic_base + p * config.vocab_per_topic + i))
            .collect();
        let (score_min, score_max) = SYNTH_RANGES[p % SYNTH_RANGES.len()];
        let id = format!("p{}", p + 1);
        prompts.insert(
            id.clone(),
            Prompt {
                id,
                topic_keywords: words.iter().take(10).cloned().collect(),
                score_min,
                score_max,
            },
        );
        topics.push(words);
    }

    let corpus_seed = seed::derive(config.seed, "corpus");
    let split_seed = seed::derive(config.seed, "split");
    let mut essays = Vec::with_capacity(config.n_prompts * config.essays_per_prompt);
    let mut qualities = Vec::with_capacity(essays.capacity());

    for p in 0..config.n_prompts {
        let prompt_id = format!("p{}", p + 1);
        let prompt = &prompts[&prompt_id];
        let topic = &topics[p];
        let mut rng = seed::rng(seed::derive_indexed(corpus_seed, "prompt", p as u64));
        for e in 0..config.essays_per_prompt {
            let q: f64 = rng.random_range(0.0..1.0);
            let n_sentences = 3 + num::round_half_away(q * 5.0) as usize;
            // Richness: low-quality essays draw from a narrow prefix of each
            // vocabulary, high-quality ones from (almost) all of it.
            let k_shared =
                ((config.vocab_shared as f64 * (0.25 + 0.75 * q)) as usize).max(5).min(config.vocab_shared);
            let k_topic =
                ((config.vocab_per_topic as f64 * (0.25 + 0.75 * q)) as usize).max(3).min(config.vocab_per_topic);
            let p_topic = 0.2 + 0.5 * q;

            let mut sentences = Vec::with_capacity(n_sentences);
            for _ in 0..n_sentences {
                let n_words = 5 + rng.random_range(0..3) + num::round_half_away(q * 4.0) as usize;
                let mut sentence = String::new();
                for w in 0..n_words {
                    if w > 0 {
                        sentence.push(' ');
                    }
                    let word = if rng.random_range(0.0..1.0) < p_topic {
                        &topic[rng.random_range(0..k_topic)]
                    } else {
                        &shared[rng.random_range(0..k_shared)]
                    };
                    sentence.push_str(word);
                }
                sentence.push('.');
                sentences.push(sentence);
            }

            let noise: f64 = rng.random_range(-1.0..1.0) * config.quality_noise;
            let span = f64::from(prompt.score_max - prompt.score_min);
            let gold = (prompt.score_min + num::round_half_away((q + noise) * span) as i32)
                .clamp(prompt.score_min, prompt.score_max);

            let id = format!("{prompt_id}-e{e:04}");
            essays.push(Essay {
                split: assign_split(&id, split_seed),
                id,
                prompt_id: prompt_id.clone(),
                text: text::join_sentences(&sentences),
                gold_score: Some(gold),
            });
            qualities.push(q);
        }
    }

    Ok(SynthOutcome {
        corpus: Corpus { prompts, essays, provenance: Provenance::Synthetic },
        qualities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn prompt(min: i32, max: i32) -> Prompt {
        Prompt {
            id: "p".to_string(),
            topic_keywords: vec!["k".to_string()],
            score_min: min,
            score_max: max,
        }
    }

    #[test]
    fn normalize_hits_bounds_and_midpoint() {
        assert_eq!(normalize_score(2, &prompt(2, 13)).unwrap(), 0.0);
        assert_eq!(normalize_score(13, &prompt(2, 13)).unwrap(), 1.0);
        assert_eq!(normalize_score(5, &prompt(0, 10)).unwrap(), 0.5);
        assert!(matches!(
            normalize_score(14, &prompt(2, 13)),
            Err(CorpusError::OutOfRange { .. })
        ));
    }

    #[test]
    fn denormalize_rounds_and_clamps() {
        assert_eq!(denormalize_score(0.5, &prompt(0, 4)), 2);
        assert_eq!(denormalize_score(1.3, &prompt(0, 4)), 4);
        assert_eq!(denormalize_score(-0.2, &prompt(0, 4)), 0);
        // 0.37 * 11 = 4.07 -> 4, plus the range floor of 2.
        assert_eq!(denormalize_score(0.37, &prompt(2, 13)), 6);
    }

    #[test]
    fn denormalize_agrees_with_rounding_oracle() {
        // Oracle: explicit clamp/scale/round-half-away pipeline on a grid.
        let p = prompt(2, 13);
        for i in -20..=120 {
            let y = i as f64 / 100.0;
            let clamped = y.clamp(0.0, 1.0);
            let scaled = clamped * 11.0;
            let floor = scaled as i32;
            let frac = scaled - f64::from(floor);
            let rounded = if frac >= 0.5 { floor + 1 } else { floor };
            assert_eq!(denormalize_score(y, &p), rounded + 2, "y={y}");
        }
    }

    #[test]
    fn normalize_then_denormalize_is_identity_on_every_grade() {
        for (min, max) in [(0, 1), (2, 13), (0, 60), (-3, 4)] {
            let p = prompt(min, max);
            for g in min..=max {
                let y = normalize_score(g, &p).unwrap();
                assert_eq!(denormalize_score(y, &p), g, "grade {g} on {min}..={max}");
            }
        }
    }

    #[test]
    fn synthesis_is_a_pure_function_of_config() {
        let config = SynthConfig { essays_per_prompt: 40, ..SynthConfig::default() };
        let a = synthesize(&config).unwrap();
        let b = synthesize(&config).unwrap();
        assert_eq!(a.essays, b.essays);
        assert_eq!(a.prompts, b.prompts);
        let c = synthesize(&SynthConfig { seed: 1, ..config }).unwrap();
        assert_ne!(a.essays, c.essays);
    }

    #[test]
    fn synthesis_counts_and_disjoint_topic_vocabularies() {
        let config = SynthConfig { essays_per_prompt: 400, ..SynthConfig::default() };
        let corpus = synthesize(&config).unwrap();
        assert_eq!(corpus.essays.len(), 1200);
        assert_eq!(corpus.prompts.len(), 3);

        let keyword_sets: Vec<BTreeSet<&String>> = corpus
            .prompts
            .values()
            .map(|p| p.topic_keywords.iter().collect())
            .collect();
        for i in 0..keyword_sets.len() {
            for j in 0..keyword_sets.len() {
                if i != j {
                    assert!(keyword_sets[i].is_disjoint(&keyword_sets[j]));
                }
            }
        }
    }

    #[test]
    fn quality_correlates_with_gold_score() {
        let config = SynthConfig {
            n_prompts: 1,
            essays_per_prompt: 400,
            quality_noise: 0.05,
            ..SynthConfig::default()
        };
        let outcome = synthesize_detailed(&config).unwrap();
        let golds: Vec<f64> = outcome
            .corpus
            .essays
            .iter()
            .map(|e| f64::from(e.gold_score.unwrap()))
            .collect();
        let r = metrics::pearson(&outcome.qualities, &golds).unwrap();
        assert!(r > 0.9, "corr(q, gold) = {r}");
    }

    #[test]
    fn topic_ratio_separates_prompts() {
        // Mean topic-word ratio of prompt-A essays against A's vocabulary
        // must strictly exceed the ratio against any other prompt's.
        let config = SynthConfig { essays_per_prompt: 60, ..SynthConfig::default() };
        let corpus = synthesize(&config).unwrap();
        let vocabs: BTreeMap<String, BTreeSet<String>> = corpus
            .prompts
            .values()
            .map(|p| (p.id.clone(), p.topic_keywords.iter().cloned().collect()))
            .collect();
        let ratio = |essay: &Essay, vocab: &BTreeSet<String>| {
            let ws = text::words(&essay.text);
            let hits = ws.iter().filter(|w| vocab.contains(*w)).count();
            hits as f64 / ws.len() as f64
        };
        for a in corpus.prompts.keys() {
            let essays = corpus.essays_of(a);
            let own = num::mean(
                &essays.iter().map(|e| ratio(e, &vocabs[a])).collect::<Vec<_>>(),
            );
            for b in corpus.prompts.keys() {
                if a == b {
                    continue;
                }
                let other = num::mean(
                    &essays.iter().map(|e| ratio(e, &vocabs[b])).collect::<Vec<_>>(),
                );
                assert!(own > other, "prompt {a} vs {b}: {own} <= {other}");
            }
        }
    }

    #[test]
    fn split_fractions_roughly_hold() {
        let config = SynthConfig { essays_per_prompt: 1000, n_prompts: 1, ..SynthConfig::default() };
        let corpus = synthesize(&config).unwrap();
        let train = corpus.essays.iter().filter(|e| e.split == Split::Train).count();
        let dev = corpus.essays.iter().filter(|e| e.split == Split::Dev).count();
        let test = corpus.essays.iter().filter(|e| e.split == Split::Test).count();
        assert_eq!(train + dev + test, 1000);
        assert!((650..=750).contains(&train), "train {train}");
        assert!((60..=140).contains(&dev), "dev {dev}");
        assert!((150..=250).contains(&test), "test {test}");
    }

    #[test]
    fn ingest_validates_rows() {
        let mut prompts = BTreeMap::new();
        prompts.insert(
            "p1".to_string(),
            Prompt {
                id: "p1".to_string(),
                topic_keywords: vec![],
                score_min: 0,
                score_max: 5,
            },
        );
        let rows = vec![
            (
                0,
                RawEssayRow {
                    id: "e1".to_string(),
                    prompt_id: "p1".to_string(),
                    text: "A fine essay.".to_string(),
                    score: Some(3),
                    split: None,
                },
            ),
            (
                1,
                RawEssayRow {
                    id: "e2".to_string(),
                    prompt_id: "p1".to_string(),
                    text: "Too good.".to_string(),
                    score: Some(7),
                    split: None,
                },
            ),
            (
                2,
                RawEssayRow {
                    id: "e3".to_string(),
                    prompt_id: "p9".to_string(),
                    text: "Wrong prompt.".to_string(),
                    score: None,
                    split: None,
                },
            ),
        ];
        let outcome = ingest_rows(prompts, rows, 0).unwrap();
        assert_eq!(outcome.corpus.essays.len(), 1);
        assert_eq!(outcome.corpus.essays[0].gold_score, Some(3));
        assert_eq!(outcome.corpus.essays[0].text, "a fine essay.");
        assert_eq!(outcome.rejects.len(), 2);
        assert!(matches!(outcome.rejects[0].error, RowError::Malformed(_)));
        assert_eq!(outcome.rejects[0].row, 1);
        assert!(matches!(outcome.rejects[1].error, RowError::UnknownPrompt(_)));
    }

    #[test]
    fn ingest_of_nothing_is_an_empty_file_error() {
        assert!(matches!(
            ingest_rows(BTreeMap::new(), vec![], 0),
            Err(CorpusError::EmptyFile)
        ));
    }

    #[test]
    fn explicit_split_tags_are_respected() {
        let mut prompts = BTreeMap::new();
        prompts.insert(
            "p1".to_string(),
            Prompt { id: "p1".to_string(), topic_keywords: vec![], score_min: 0, score_max: 5 },
        );
        let rows = vec![(
            0,
            RawEssayRow {
                id: "e1".to_string(),
                prompt_id: "p1".to_string(),
                text: "text here.".to_string(),
                score: None,
                split: Some("dev".to_string()),
            },
        )];
        let outcome = ingest_rows(prompts, rows, 0).unwrap();
        assert_eq!(outcome.corpus.essays[0].split, Split::Dev);
    }
}
