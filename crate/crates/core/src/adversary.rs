//! Deterministic perturbation generators: turn held-out on-topic essays
//! into adversarial off-topic test samples.
//!
//! Every generator is a pure function of its inputs and a seed. All of them
//! share the sentence segmentation from [`crate::text::sentences`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Essay, Split};
use crate::{seed, text};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdversaryError {
    #[error("{0}")]
    InvalidParam(&'static str),
    #[error("resource too small: {0}")]
    InsufficientResource(&'static str),
    #[error("essay has {got} sentences, need at least {need}")]
    TooShortEssay { got: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    AddSpeech,
    BabelGenerate,
    RepeatSent,
    ReplaceSents,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 4] = [
        PerturbKind::AddSpeech,
        PerturbKind::BabelGenerate,
        PerturbKind::RepeatSent,
        PerturbKind::ReplaceSents,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbKind::AddSpeech => "add_speech",
            PerturbKind::BabelGenerate => "babel_generate",
            PerturbKind::RepeatSent => "repeat_sent",
            PerturbKind::ReplaceSents => "replace_sents",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Bundled irrelevant-speech resource (Lincoln's Gettysburg Address, public
/// domain). Callers may substitute any text; only the sentence segmentation
/// matters.
pub const DEFAULT_SPEECH: &str = "Four score and seven years ago our fathers brought forth on this continent a new nation, conceived in liberty, and dedicated to the proposition that all men are created equal. Now we are engaged in a great civil war, testing whether that nation, or any nation so conceived and so dedicated, can long endure. We are met on a great battlefield of that war. We have come to dedicate a portion of that field, as a final resting place for those who here gave their lives that that nation might live. It is altogether fitting and proper that we should do this. But, in a larger sense, we can not dedicate, we can not consecrate, we can not hallow this ground. The brave men, living and dead, who struggled here, have consecrated it, far above our poor power to add or detract. The world will little note, nor long remember what we say here, but it can never forget what they did here. It is for us the living, rather, to be dedicated here to the unfinished work which they who fought here have thus far so nobly advanced. It is rather for us to be here dedicated to the great task remaining before us, that from these honored dead we take increased devotion to that cause for which they gave the last full measure of devotion, and that government of the people, by the people, for the people, shall not perish from the earth.";

/// Normalized, segmented form of [`DEFAULT_SPEECH`].
pub fn default_speech_sentences() -> Vec<String> {
    text::sentences(&text::normalize(DEFAULT_SPEECH))
}

/// Bundled obscure-word inventory for gibberish generation.
pub const OBSCURE_WORDS: &[&str] = &[
    "absquatulate", "anfractuous", "apophthegm", "batrachian", "blatherskite",
    "borborygmus", "brobdingnagian", "callipygian", "cantankerous", "circumlocution",
    "clepsydra", "concupiscent", "crepuscular", "defenestration", "deliquescent",
    "dithyrambic", "ebullient", "effulgent", "eleemosynary", "emolument",
    "epistemology", "eructation", "farrago", "flibbertigibbet", "floccinaucinihilipilification",
    "fuliginous", "funambulist", "galimatias", "gallimaufry", "gasconade",
    "hebetude", "hobbledehoy", "ineluctable", "insouciant", "jejune",
    "lachrymose", "logorrhea", "lucubration", "mellifluous", "mendacious",
    "nugatory", "obstreperous", "oleaginous", "opsimath", "panjandrum",
    "perspicacious", "pettifogger", "pneumonoultramicroscopic", "pulchritudinous", "quockerwodger",
    "rebarbative", "recalcitrant", "rodomontade", "saturnine", "sesquipedalian",
    "slubberdegullion", "snollygoster", "sphygmomanometer", "tatterdemalion", "tergiversation",
    "ultracrepidarian", "vituperative", "widdershins", "zeugma",
];

fn rng_for(kind: PerturbKind, seed_value: u64) -> ChaCha8Rng {
    seed::rng(seed::derive(seed_value, kind.as_str()))
}

fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    // Partial Fisher-Yates over the index range.
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

fn perturbed(essay: &Essay, kind: PerturbKind, sentences: &[String]) -> Essay {
    Essay {
        id: format!("{}-{}", essay.id, kind.as_str()),
        prompt_id: essay.prompt_id.clone(),
        text: text::join_sentences(sentences),
        gold_score: None,
        split: Split::Test,
    }
}

/// Inserts `k` sentences sampled from a speech resource at seeded-random
/// sentence boundaries. The original sentences survive in their original
/// order.
pub fn add_speech(
    essay: &Essay,
    speech_sentences: &[String],
    k: usize,
    seed_value: u64,
) -> Result<Essay, AdversaryError> {
    if k == 0 {
        return Err(AdversaryError::InvalidParam("k must be >= 1"));
    }
    if speech_sentences.len() < k {
        return Err(AdversaryError::InsufficientResource("speech has fewer sentences than k"));
    }
    let mut out = text::sentences(&essay.text);
    if out.is_empty() {
        return Err(AdversaryError::TooShortEssay { got: 0, need: 1 });
    }
    let mut rng = rng_for(PerturbKind::AddSpeech, seed_value);
    let chosen = sample_distinct(&mut rng, speech_sentences.len(), k);
    for idx in chosen {
        let slot = rng.random_range(0..=out.len());
        out.insert(slot, speech_sentences[idx].clone());
    }
    Ok(perturbed(essay, PerturbKind::AddSpeech, &out))
}

/// Generates an incoherent passage of obscure words salted with prompt
/// keywords: each sentence is 8-20 words with a keyword share between 10%
/// and 30%, so the passage stays keyword-laced but meaningless.
pub fn babel_generate(
    keywords: &[String],
    obscure_vocab: &[String],
    n_sentences: usize,
    seed_value: u64,
) -> Result<String, AdversaryError> {
    if keywords.is_empty() {
        return Err(AdversaryError::InvalidParam("keywords must be nonempty"));
    }
    if obscure_vocab.len() < 50 {
        return Err(AdversaryError::InsufficientResource("need at least 50 obscure words"));
    }
    if n_sentences == 0 {
        return Err(AdversaryError::InvalidParam("n_sentences must be >= 1"));
    }
    let mut rng = rng_for(PerturbKind::BabelGenerate, seed_value);
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let len = rng.random_range(8..=20);
        let k_lo = crate::num::ceil(len as f64 * 0.1) as usize;
        let k_hi = crate::num::floor(len as f64 * 0.3) as usize;
        let k = rng.random_range(k_lo.max(1)..=k_hi.max(1));
        let keyword_slots = sample_distinct(&mut rng, len, k);
        let mut words = Vec::with_capacity(len);
        for pos in 0..len {
            let word = if keyword_slots.contains(&pos) {
                keywords[rng.random_range(0..keywords.len())].clone()
            } else {
                obscure_vocab[rng.random_range(0..obscure_vocab.len())].clone()
            };
            words.push(word);
        }
        let mut sentence = words.join(" ");
        sentence.push('.');
        sentences.push(sentence);
    }
    Ok(text::join_sentences(&sentences))
}

/// Duplicates seeded-randomly chosen sentences in place: each of
/// `n_targets` sentences gains `n_repeats` adjacent copies. More targets
/// than sentences clamps to every sentence.
pub fn repeat_sent(
    essay: &Essay,
    n_repeats: usize,
    n_targets: usize,
    seed_value: u64,
) -> Result<Essay, AdversaryError> {
    if n_repeats == 0 || n_targets == 0 {
        return Err(AdversaryError::InvalidParam("repeat counts must be >= 1"));
    }
    let sentences = text::sentences(&essay.text);
    if sentences.is_empty() {
        return Err(AdversaryError::TooShortEssay { got: 0, need: 1 });
    }
    let mut rng = rng_for(PerturbKind::RepeatSent, seed_value);
    let k = n_targets.min(sentences.len());
    let mut chosen = sample_distinct(&mut rng, sentences.len(), k);
    // Insert from the back so earlier indices stay valid.
    chosen.sort_unstable_by(|a, b| b.cmp(a));
    let mut out = sentences;
    for idx in chosen {
        for _ in 0..n_repeats {
            out.insert(idx + 1, out[idx].clone());
        }
    }
    Ok(perturbed(essay, PerturbKind::RepeatSent, &out))
}

/// Replaces the essay body with a contiguous sentence span from one donor
/// essay of a different prompt, keeping the first and last sentences
/// verbatim. The span length stays within half to one-and-a-half times the
/// replaced body.
pub fn replace_sents(
    essay: &Essay,
    donor_essays: &[Essay],
    seed_value: u64,
) -> Result<Essay, AdversaryError> {
    let sentences = text::sentences(&essay.text);
    if sentences.len() < 3 {
        return Err(AdversaryError::TooShortEssay { got: sentences.len(), need: 3 });
    }
    let body = sentences.len() - 2;
    let lo = crate::num::ceil(body as f64 * 0.5) as usize;
    let lo = lo.max(1);
    let hi = (crate::num::floor(body as f64 * 1.5) as usize).max(lo);

    let candidates: Vec<(&Essay, Vec<String>)> = donor_essays
        .iter()
        .filter(|d| d.prompt_id != essay.prompt_id)
        .map(|d| (d, text::sentences(&d.text)))
        .filter(|(_, s)| s.len() >= lo)
        .collect();
    if candidates.is_empty() {
        return Err(AdversaryError::InsufficientResource(
            "no donor essay from another prompt is long enough",
        ));
    }
    let mut rng = rng_for(PerturbKind::ReplaceSents, seed_value);
    let (_, donor_sentences) = &candidates[rng.random_range(0..candidates.len())];
    let span = rng.random_range(lo..=hi.min(donor_sentences.len()));
    let start = rng.random_range(0..=donor_sentences.len() - span);

    let mut out = Vec::with_capacity(2 + span);
    out.push(sentences[0].clone());
    out.extend_from_slice(&donor_sentences[start..start + span]);
    out.push(sentences[sentences.len() - 1].clone());
    Ok(perturbed(essay, PerturbKind::ReplaceSents, &out))
}
