//! From two page texts to scored parallel pairs and a reward.
//!
//! This is the whole extraction step minus the network: the service fetches
//! and extracts the two pages, then hands the texts to [`Extractor::run`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align_documents, extract_pairs, AlignError, AlignParams, AlignmentPath, Span};
use crate::embed::{embed_overlaps_with, EmbedError, Embedder};
use crate::ngram::{ml_score, LmError, LmModel};
use crate::reward::{compute_reward, pair_terms, RewardBreakdown, RewardError, RewardParams};
use crate::textkit::{filter_by_lang, prepare_document, reindex, LidModel, Sentence};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Campaign-level models and parameters.
pub struct Extractor<'a> {
    pub lid: &'a LidModel,
    pub in_domain: &'a LmModel,
    pub general: &'a LmModel,
    pub embedder: &'a dyn Embedder,
    pub lang_e: &'a str,
    pub lang_f: &'a str,
    pub min_lid_confidence: f64,
    pub align: &'a AlignParams,
    pub reward: &'a RewardParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    /// Text on the `lang_e` side.
    pub src: String,
    /// Text on the `lang_f` side.
    pub tgt: String,
    pub cost: f64,
    pub s_a: f64,
    pub s_d: f64,
    pub h_in: f64,
    pub h_gen: f64,
    pub src_span: Span,
    pub tgt_span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    /// True when page B turned out to be the `lang_e` page.
    pub swapped: bool,
    pub src_sentences: usize,
    pub tgt_sentences: usize,
    pub path: Option<AlignmentPath>,
    pub pairs: Vec<ScoredPair>,
    pub reward: RewardBreakdown,
}

/// Sentences of `raw` identified as `lang`.
pub fn language_sentences(lid: &LidModel, raw: &str, lang: &str, min_conf: f64) -> Vec<Sentence> {
    reindex(filter_by_lang(lid, &prepare_document(raw, lang), lang, min_conf))
}

impl Extractor<'_> {
    /// Aligns the two texts, keeps pairs under the cost threshold and scores
    /// them. Workers may submit the pages in either order; whichever
    /// language assignment keeps more sentences wins, page A being `lang_e`
    /// on ties.
    pub fn run(&self, text_a: &str, text_b: &str) -> Result<Extraction, PipelineError> {
        let conf = self.min_lid_confidence;
        let a_e = language_sentences(self.lid, text_a, self.lang_e, conf);
        let b_f = language_sentences(self.lid, text_b, self.lang_f, conf);
        let b_e = language_sentences(self.lid, text_b, self.lang_e, conf);
        let a_f = language_sentences(self.lid, text_a, self.lang_f, conf);
        let (swapped, src, tgt) = if b_e.len() + a_f.len() > a_e.len() + b_f.len() {
            (true, b_e, a_f)
        } else {
            (false, a_e, b_f)
        };

        if src.is_empty() || tgt.is_empty() {
            return Ok(Extraction {
                swapped,
                src_sentences: src.len(),
                tgt_sentences: tgt.len(),
                path: None,
                pairs: Vec::new(),
                reward: compute_reward(&[], self.reward),
            });
        }

        let group = self.align.max_group();
        let src_table = embed_overlaps_with(self.embedder, &src, group)?;
        let tgt_table = embed_overlaps_with(self.embedder, &tgt, group)?;
        let path = align_documents(&src_table, &tgt_table, src.len(), tgt.len(), self.align)?;
        let raw_pairs = extract_pairs(&path, &src, &tgt, self.align.cost_threshold);

        let mut pairs = Vec::with_capacity(raw_pairs.len());
        let mut terms = Vec::with_capacity(raw_pairs.len());
        for p in raw_pairs {
            let ml = ml_score(self.in_domain, self.general, &Sentence::new(&p.src, 0))?;
            let t = pair_terms(p.cost, ml.h_in, ml.h_gen, self.reward)?;
            terms.push(t);
            pairs.push(ScoredPair {
                src: p.src,
                tgt: p.tgt,
                cost: p.cost,
                s_a: t.s_a,
                s_d: t.s_d,
                h_in: ml.h_in,
                h_gen: ml.h_gen,
                src_span: p.src_span,
                tgt_span: p.tgt_span,
            });
        }
        Ok(Extraction {
            swapped,
            src_sentences: src.len(),
            tgt_sentences: tgt.len(),
            path: Some(path),
            pairs,
            reward: compute_reward(&terms, self.reward),
        })
    }
}
