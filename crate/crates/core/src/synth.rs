//! Seeded synthetic bilingual corpora for tests and benchmarks.
//!
//! The two toy languages share a random syllabic lexicon. The "translation"
//! of a sentence is a fixed character transform, so aligned sentences share
//! part of their character n-grams while the two languages stay easy to tell
//! apart by their letters.

use rand::seq::SliceRandom;
use rand::Rng;

/// Language code of the untransformed side.
pub const LANG_E: &str = "en";
/// Language code of the transformed side.
pub const LANG_F: &str = "de";

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "st", "tr", "pl", "gr", "sh", "ch"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "t", "l", "nd", "ck"];

pub fn random_word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.gen_range(1..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
        w.push_str(CODAS.choose(rng).unwrap());
    }
    w
}

/// `n` distinct words.
pub fn lexicon<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = random_word(rng);
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// A capitalized sentence of `min_words..=max_words` words drawn from
/// `words`, ending in a period.
pub fn sentence<R: Rng>(rng: &mut R, words: &[String], min_words: usize, max_words: usize) -> String {
    let n = rng.gen_range(min_words..=max_words);
    let body: Vec<&str> = (0..n).map(|_| words.choose(rng).unwrap().as_str()).collect();
    let mut s = body.join(" ");
    if let Some(first) = s.get(..1) {
        let upper = first.to_uppercase();
        s.replace_range(..1, &upper);
    }
    s.push('.');
    s
}

/// The character transform standing in for translation.
pub fn translate(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + s.len() / 4);
    for c in s.chars() {
        match c {
            'a' => out.push('ä'),
            'A' => out.push('Ä'),
            other => out.push(other),
        }
    }
    out
}

/// A synthetic document pair with its gold 1-1 sentence links.
#[derive(Debug, Clone)]
pub struct DocPair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    /// `(src index, tgt index)` of every translated sentence.
    pub gold: Vec<(usize, usize)>,
}

impl DocPair {
    pub fn src_text(&self) -> String {
        self.src.join(" ")
    }

    pub fn tgt_text(&self) -> String {
        self.tgt.join(" ")
    }
}

/// `n` translated sentences, with each side additionally receiving an
/// untranslated sentence after any position with probability `noise`.
pub fn doc_pair<R: Rng>(rng: &mut R, words: &[String], n: usize, noise: f64) -> DocPair {
    let mut pair = DocPair {
        src: Vec::new(),
        tgt: Vec::new(),
        gold: Vec::new(),
    };
    for _ in 0..n {
        let s = sentence(rng, words, 5, 14);
        pair.gold.push((pair.src.len(), pair.tgt.len()));
        pair.tgt.push(translate(&s));
        pair.src.push(s);
        if rng.gen_bool(noise) {
            pair.src.push(sentence(rng, words, 5, 14));
        }
        if rng.gen_bool(noise) {
            pair.tgt.push(translate(&sentence(rng, words, 5, 14)));
        }
    }
    pair
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_for_a_seed() {
        let a = lexicon(&mut ChaCha8Rng::seed_from_u64(3), 50);
        let b = lexicon(&mut ChaCha8Rng::seed_from_u64(3), 50);
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = doc_pair(&mut rng, &a, 20, 0.2);
        assert_eq!(d.gold.len(), 20);
        for &(i, j) in &d.gold {
            assert_eq!(translate(&d.src[i]), d.tgt[j]);
        }
    }

    #[test]
    fn transform() {
        assert_eq!(translate("Ocean saw us. All"), "Oceän säw us. Äll");
    }
}
