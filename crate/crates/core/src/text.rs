//! Shared text primitives: normalization, word tokenization and the single
//! sentence segmentation rule used by the corpus and every perturbation
//! generator.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

/// Canonical text form used throughout: NFC-normalized, lowercase, trimmed.
/// Applied once at ingestion; synthetic text is generated in this form.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.trim().nfc() {
        for lc in c.to_lowercase() {
            out.push(lc);
        }
    }
    out
}

/// Splits text into lowercase word and punctuation tokens.
///
/// Alphanumeric runs form words; every other non-whitespace character is a
/// single-character token, so "The cat sat." becomes
/// `["the", "cat", "sat", "."]`.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                current.push(lc);
            }
        } else {
            if !current.is_empty() {
                out.push(core::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                let mut p = String::new();
                p.push(c);
                out.push(p);
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Splits text into sentences on `.`, `!` or `?` followed by whitespace or
/// end of text. Terminators stay attached to their sentence; empty segments
/// are dropped. This is the one segmentation rule in the project: generators
/// and the synthesizer must agree on sentence boundaries.
pub fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|n| n.is_whitespace());
            if at_boundary {
                let s = current.trim();
                if !s.is_empty() {
                    out.push(String::from(s));
                }
                current.clear();
            }
        }
    }
    let tail = current.trim();
    if !tail.is_empty() {
        out.push(String::from(tail));
    }
    out
}

/// Inverse of [`sentences`] up to whitespace: joins with single spaces.
pub fn join_sentences(sents: &[String]) -> String {
    sents.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn normalize_is_nfc_lowercase_trimmed() {
        // e + combining acute composes to a single code point.
        assert_eq!(normalize("  CafE\u{301}  "), "café");
    }

    #[test]
    fn words_split_punctuation_off() {
        assert_eq!(words("The cat sat."), vec!["the", "cat", "sat", "."]);
        assert_eq!(words("a,b"), vec!["a", ",", "b"]);
        assert!(words("   ").is_empty());
    }

    #[test]
    fn sentences_split_on_terminators_at_boundaries() {
        let s = sentences("One two. Three four! Five?");
        assert_eq!(s, vec!["One two.", "Three four!", "Five?"]);
    }

    #[test]
    fn sentences_ignore_interior_dots() {
        // No whitespace after the dot: not a boundary.
        let s = sentences("version 1.5 shipped. done");
        assert_eq!(s, vec!["version 1.5 shipped.", "done"]);
    }

    #[test]
    fn sentences_round_trip_through_join() {
        let text = "alpha beta. gamma delta. epsilon.";
        let sents = sentences(text);
        assert_eq!(join_sentences(&sents), text);
    }

    #[test]
    fn trailing_text_without_terminator_is_kept() {
        assert_eq!(sentences("no terminator"), vec!["no terminator".to_string()]);
    }
}
