//! Building blocks for mining parallel sentences from crowd-reported URL
//! pairs: text cleanup and language identification, sentence embeddings,
//! monotone sentence alignment, n-gram language models for domain scoring,
//! worker reward computation and URL/HTML handling.

pub mod align;
pub mod embed;
pub mod textkit;
pub mod ngram;
pub mod pipeline;
pub mod reward;
pub mod synth;
pub mod web;

pub use align::{AlignParams, AlignmentPath, Bead, BeadShape, ParallelPair, Span};
pub use embed::{EmbedderConfig, EmbeddingVector, OverlapTable};
pub use ngram::{LmModel, MlScore, TokenizerMode};
pub use pipeline::{Extraction, Extractor, ScoredPair};
pub use reward::{PairTerms, RewardBreakdown, RewardMode, RewardParams};
pub use textkit::{LidModel, Sentence};
pub use web::{CanonicalUrl, FetchPolicy};
