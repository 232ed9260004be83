use serde::{Deserialize, Serialize};

use super::{LmError, LmModel};
use crate::textkit::Sentence;

/// Cross-entropy difference of a sentence under an in-domain and a general
/// model. Lower scores are more in-domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlScore {
    pub index: usize,
    pub h_in: f64,
    pub h_gen: f64,
    pub score: f64,
}

pub fn ml_score(in_model: &LmModel, gen_model: &LmModel, s: &Sentence) -> Result<MlScore, LmError> {
    if in_model.tokenizer_mode() != gen_model.tokenizer_mode() {
        return Err(LmError::TokenizerMismatch(
            in_model.tokenizer_mode(),
            gen_model.tokenizer_mode(),
        ));
    }
    let h_in = in_model.cross_entropy(s)?;
    let h_gen = gen_model.cross_entropy(s)?;
    Ok(MlScore {
        index: s.index,
        h_in,
        h_gen,
        score: h_in - h_gen,
    })
}

/// The `k` lowest-scoring sentences, returned in corpus order. Equal scores
/// favour the earlier sentence.
pub fn select_lowest(corpus: &[Sentence], scores: &[MlScore], k: usize) -> Result<Vec<Sentence>, LmError> {
    if scores.len() != corpus.len() {
        return Err(LmError::LengthMismatch(scores.len(), corpus.len()));
    }
    if k > corpus.len() {
        return Err(LmError::KTooLarge { k, n: corpus.len() });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| scores[a].score.total_cmp(&scores[b].score).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| corpus[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    pub top: Vec<T>,
    pub middle: Vec<T>,
    pub bottom: Vec<T>,
}

/// Splits items into the best, median and worst `fraction` by score
/// (higher is better). Each part holds `floor(fraction * n)` items; the
/// middle part is centred on rank `n / 2`. Ties keep the original order.
pub fn partition_by_score<T: Clone>(items: &[T], scores: &[f64], fraction: f64) -> Result<Partition<T>, LmError> {
    if !(fraction > 0.0 && fraction <= 1.0 / 3.0) {
        return Err(LmError::FractionOutOfRange(fraction));
    }
    if scores.len() != items.len() {
        return Err(LmError::LengthMismatch(scores.len(), items.len()));
    }
    let n = items.len();
    let k = (fraction * n as f64).floor() as usize;
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let pick = |range: std::ops::Range<usize>| ranked[range].iter().map(|&i| items[i].clone()).collect();
    let mid_start = (n / 2).saturating_sub(k / 2);
    Ok(Partition {
        top: pick(0..k),
        middle: pick(mid_start..mid_start + k),
        bottom: pick(n - k..n),
    })
}
