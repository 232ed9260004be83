//! Sentence embeddings for alignment.
//!
//! The builtin embedder hashes character n-grams into a fixed number of
//! signed buckets. Vectors from a real multilingual encoder can be supplied
//! through the external table format instead.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textkit::Sentence;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid embedder config: {0}")]
    InvalidConfig(String),
    #[error("max_overlap must be in [1, 3], got {0}")]
    InvalidOverlap(usize),
    #[error("embedder is in external-table mode; vectors must be loaded from file")]
    ExternalMode,
    #[error("expected {expected} vectors, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("line {line}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedMode {
    BuiltinHashed,
    ExternalTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub dimension: usize,
    pub ngram_orders: Vec<usize>,
    pub seed: u64,
    pub mode: EmbedMode,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            dimension: 256,
            ngram_orders: vec![2, 3, 4],
            seed: 0,
            mode: EmbedMode::BuiltinHashed,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension < 16 {
            return Err(EmbedError::InvalidConfig(format!(
                "dimension must be >= 16, got {}",
                self.dimension
            )));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(EmbedError::InvalidConfig(
                "ngram_orders must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl EmbeddingVector {
    /// Scales `values` to unit length. A zero vector stays zero with norm 0.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return EmbeddingVector { values, norm: 0.0 };
        }
        for v in &mut values {
            *v /= norm;
        }
        EmbeddingVector { values, norm: 1.0 }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, clamped to [-1, 1]. Zero vectors have similarity 0.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.euclidean_norm();
    let nb = b.euclidean_norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    // FNV-1a followed by the splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn padded_chars(text: &str) -> Vec<char> {
    let mut out = vec![' '];
    let mut last_space = true;
    for c in text.trim().chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            if !last_space {
                out.push(' ');
            }
            last_space = true;
        } else {
            out.push(c);
            last_space = false;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

/// Hashed character n-gram embedding of a raw string.
pub fn embed_text(cfg: &EmbedderConfig, text: &str) -> Result<EmbeddingVector, EmbedError> {
    cfg.validate()?;
    if cfg.mode == EmbedMode::ExternalTable {
        return Err(EmbedError::ExternalMode);
    }
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    let chars = padded_chars(text);
    let mut counts = vec![0.0f64; cfg.dimension];
    let mut buf = String::new();
    for &order in &cfg.ngram_orders {
        if chars.len() < order {
            continue;
        }
        for window in chars.windows(order) {
            buf.clear();
            buf.extend(window);
            let h = seeded_hash(buf.as_bytes(), cfg.seed ^ order as u64);
            let bucket = (h % cfg.dimension as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            counts[bucket] += sign;
        }
    }
    Ok(EmbeddingVector::normalized(counts))
}

pub fn embed_sentence(cfg: &EmbedderConfig, s: &Sentence) -> Result<EmbeddingVector, EmbedError> {
    embed_text(cfg, &s.text)
}

/// Anything that can turn text into a vector. The builtin hashed embedder
/// implements it through its config; a real multilingual encoder can be
/// plugged in the same way.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

impl Embedder for EmbedderConfig {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        embed_text(self, text)
    }
}

/// Embeddings of every run of consecutive sentences, keyed by
/// `(start index, run length)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverlapTable {
    entries: BTreeMap<(usize, usize), EmbeddingVector>,
}

impl OverlapTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, start: usize, len: usize, v: EmbeddingVector) {
        self.entries.insert((start, len), v);
    }

    pub fn get(&self, start: usize, len: usize) -> Option<&EmbeddingVector> {
        self.entries.get(&(start, len))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &EmbeddingVector)> {
        self.entries.iter()
    }

    /// Applies `f` to every vector; used to check scale invariance.
    pub fn map_vectors(&self, f: impl Fn(&EmbeddingVector) -> EmbeddingVector) -> OverlapTable {
        OverlapTable {
            entries: self.entries.iter().map(|(k, v)| (*k, f(v))).collect(),
        }
    }
}

pub fn embed_overlaps(
    cfg: &EmbedderConfig,
    sentences: &[Sentence],
    max_overlap: usize,
) -> Result<OverlapTable, EmbedError> {
    embed_overlaps_with(cfg, sentences, max_overlap)
}

/// Like [`embed_overlaps`] with any [`Embedder`].
pub fn embed_overlaps_with(
    embedder: &dyn Embedder,
    sentences: &[Sentence],
    max_overlap: usize,
) -> Result<OverlapTable, EmbedError> {
    if !(1..=3).contains(&max_overlap) {
        return Err(EmbedError::InvalidOverlap(max_overlap));
    }
    let mut table = OverlapTable::new();
    for len in 1..=max_overlap.min(sentences.len()) {
        for start in 0..=sentences.len() - len {
            let joined = sentences[start..start + len]
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            table.insert(start, len, embedder.embed(&joined)?);
        }
    }
    Ok(table)
}

/// Reads an external vector table.
///
/// Format: a header line `EMB v1 <dimension>`, then one vector per line as
/// `start<TAB>length<TAB>f1 f2 ... fD`. Vectors are re-normalized on load.
pub fn load_external_vectors(path: &Path, expected_count: usize) -> Result<OverlapTable, EmbedError> {
    let file = File::open(path)?;
    parse_external_vectors(BufReader::new(file), expected_count)
}

pub fn parse_external_vectors<R: BufRead>(
    reader: R,
    expected_count: usize,
) -> Result<OverlapTable, EmbedError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(EmbedError::Malformed {
        line: 1,
        msg: "missing header".into(),
    })??;
    let dimension: usize = header
        .strip_prefix("EMB v1 ")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| EmbedError::Malformed {
            line: 1,
            msg: "header must be `EMB v1 <dimension>`".into(),
        })?;
    let mut table = OverlapTable::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| EmbedError::Malformed { line: line_no, msg };
        let mut parts = line.splitn(3, '\t');
        let (start, len, body) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(malformed("expected start<TAB>length<TAB>values".into())),
        };
        let start: usize = start
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad start {start:?}")))?;
        let len: usize = len
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad length {len:?}")))?;
        let values = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| malformed(format!("bad float {t:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != dimension {
            return Err(EmbedError::DimensionMismatch {
                line: line_no,
                expected: dimension,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(malformed("non-finite value".into()));
        }
        table.insert(start, len, EmbeddingVector::normalized(values));
    }
    if table.len() != expected_count {
        return Err(EmbedError::CountMismatch {
            expected: expected_count,
            found: table.len(),
        });
    }
    Ok(table)
}
