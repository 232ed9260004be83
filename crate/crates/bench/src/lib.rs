//! Shared inputs for the benchmarks.

use crowdmine::synth::{doc_pair, lexicon, sentence, DocPair};
use crowdmine::Sentence;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn sentences(lines: &[String]) -> Vec<Sentence> {
    lines.iter().enumerate().map(|(i, l)| Sentence::new(l, i)).collect()
}

/// A document pair with `n` translated sentences and some noise.
pub fn documents(seed: u64, n: usize) -> DocPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = lexicon(&mut rng, 400);
    doc_pair(&mut rng, &words, n, 0.1)
}

pub fn corpus(seed: u64, n: usize) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = lexicon(&mut rng, 2000);
    let lines: Vec<String> = (0..n).map(|_| sentence(&mut rng, &words, 6, 20)).collect();
    sentences(&lines)
}
