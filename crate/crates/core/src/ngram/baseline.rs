use std::collections::HashMap;

use super::TokenizerMode;
use crate::textkit::Sentence;

/// Add-one smoothed unigram model, a reference point for perplexity.
#[derive(Debug, Clone)]
pub struct AddOneUnigram {
    mode: TokenizerMode,
    counts: HashMap<String, u64>,
    total: u64,
}

impl AddOneUnigram {
    pub fn train(corpus: &[Sentence], mode: TokenizerMode) -> Self {
        let mut counts = HashMap::new();
        let mut total = 0;
        for s in corpus {
            for tok in mode.tokenize(&s.text).into_iter().chain([super::EOS.to_string()]) {
                *counts.entry(tok).or_insert(0) += 1;
                total += 1;
            }
        }
        AddOneUnigram { mode, counts, total }
    }

    /// Seen types plus one bucket for unknown tokens.
    fn support(&self) -> f64 {
        (self.counts.len() + 1) as f64
    }

    pub fn log_prob(&self, token: &str) -> f64 {
        let c = self.counts.get(token).copied().unwrap_or(0);
        ((c as f64 + 1.0) / (self.total as f64 + self.support())).ln()
    }

    pub fn perplexity(&self, corpus: &[Sentence]) -> f64 {
        let (mut nll, mut n) = (0.0, 0usize);
        for s in corpus {
            let toks = self.mode.tokenize(&s.text);
            if toks.is_empty() {
                continue;
            }
            for tok in toks.iter().map(String::as_str).chain([super::EOS]) {
                nll -= self.log_prob(tok);
                n += 1;
            }
        }
        (nll / n.max(1) as f64).exp()
    }
}
