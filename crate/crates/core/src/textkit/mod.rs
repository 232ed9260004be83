//! Text normalization, rule-based sentence segmentation and a trainable
//! character n-gram language identifier.

mod lid;
mod segment;

pub use lid::{train_lid, LidError, LidModel, UNKNOWN_LANG};
pub use segment::{segment_sentences, Script};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Sentences shorter than this (in characters) are dropped before alignment.
pub const MIN_SENTENCE_CHARS: usize = 3;

/// Default confidence required by [`filter_by_lang`].
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.6;

/// A single normalized sentence and its position in the source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub index: usize,
    pub char_len: usize,
}

impl Sentence {
    /// Builds a sentence, trimming surrounding whitespace and folding any
    /// line breaks into spaces.
    pub fn new(text: &str, index: usize) -> Self {
        let text: String = text
            .trim()
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        let char_len = text.chars().count();
        Sentence {
            text,
            index,
            char_len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.char_len == 0
    }
}

/// NFKC normalization: fullwidth forms become halfwidth, compatibility
/// characters are decomposed and canonical composition is reapplied.
pub fn normalize_text(raw: &str) -> String {
    raw.nfkc().collect()
}

/// Keeps the sentences classified as `lang` with at least `min_conf`
/// confidence. Order and indices are preserved.
pub fn filter_by_lang(
    model: &LidModel,
    sentences: &[Sentence],
    lang: &str,
    min_conf: f64,
) -> Vec<Sentence> {
    sentences
        .iter()
        .filter(|s| {
            let (label, conf) = model.classify(s);
            label == lang && conf >= min_conf
        })
        .cloned()
        .collect()
}

/// Normalizes, segments and drops sentences shorter than
/// [`MIN_SENTENCE_CHARS`]. Indices are renumbered consecutively.
pub fn prepare_document(raw: &str, lang: &str) -> Vec<Sentence> {
    let normalized = normalize_text(raw);
    segment_sentences(&normalized, lang)
        .into_iter()
        .filter(|s| s.char_len >= MIN_SENTENCE_CHARS)
        .enumerate()
        .map(|(i, mut s)| {
            s.index = i;
            s
        })
        .collect()
}

/// Renumbers sentence indices from zero, keeping order.
pub fn reindex(sentences: Vec<Sentence>) -> Vec<Sentence> {
    sentences
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            s.index = i;
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nfkc_fullwidth() {
        assert_eq!(normalize_text("Ｔｅｓｔ１２"), "Test12");
        assert_eq!(normalize_text("abc def"), "abc def");
        assert_eq!(normalize_text(""), "");
    }

    #[test]
    fn nfkc_circled_digit() {
        // U+2460 CIRCLED DIGIT ONE has compatibility decomposition <circle> 0031.
        assert_eq!(normalize_text("\u{2460}"), "1");
    }

    #[test]
    fn nfkc_halfwidth_katakana_composes() {
        // ｶﾞ (halfwidth ka + voiced mark) composes to ガ.
        assert_eq!(normalize_text("\u{FF76}\u{FF9E}"), "\u{30AC}");
    }

    #[test]
    fn sentence_folds_newlines() {
        let s = Sentence::new("  a\nb  ", 3);
        assert_eq!(s.text, "a b");
        assert_eq!(s.char_len, 3);
        assert_eq!(s.index, 3);
    }

    #[test]
    fn prepare_drops_short() {
        let doc = prepare_document("Ok.\nA.\nThis stays here.", "en");
        let texts: Vec<_> = doc.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["Ok.", "This stays here."]);
        assert_eq!(doc[1].index, 1);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(s in "\\PC*") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }
    }
}
