//! Monotone sentence alignment over embedding costs.
//!
//! Documents are aligned by a banded dynamic program over "beads", groups of
//! up to two consecutive sentences on each side. A bead's cost is the cosine
//! distance of its two sides scaled by the bead size and divided by a
//! per-document-pair normalizer, so that a single threshold can separate good
//! pairs from noise regardless of the embedder.

pub mod oracle;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine, OverlapTable};
use crate::textkit::Sentence;

/// Lower bound of the cost normalizer.
pub const NORM_FLOOR: f64 = 1e-3;
/// Pairs whose alignment cost exceeds this are discarded.
pub const DEFAULT_COST_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("no embedding for span ({start}, {len}) on the {side} side")]
    MissingEmbedding {
        side: &'static str,
        start: usize,
        len: usize,
    },
    #[error("no feasible path")]
    NoFeasiblePath,
    #[error("documents too large for exhaustive search ({0} x {1}, max 8)")]
    TooLarge(usize, usize),
    #[error("invalid alignment parameters: {0}")]
    InvalidParams(String),
    #[error("empty document")]
    EmptyDocument,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Number of source and target sentences covered by a bead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeadShape {
    pub src: usize,
    pub tgt: usize,
}

impl BeadShape {
    pub const fn new(src: usize, tgt: usize) -> Self {
        BeadShape { src, tgt }
    }

    pub fn is_skip(self) -> bool {
        self.src == 0 || self.tgt == 0
    }

    pub fn transposed(self) -> Self {
        BeadShape::new(self.tgt, self.src)
    }
}

impl fmt::Display for BeadShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.src, self.tgt)
    }
}

/// Every shape the aligner knows, in tie-break order: 1:1 first, then
/// smaller beads, then the bead that starts earlier in the source.
pub const SHAPE_PRIORITY: [BeadShape; 6] = [
    BeadShape::new(1, 1),
    BeadShape::new(1, 0),
    BeadShape::new(0, 1),
    BeadShape::new(2, 1),
    BeadShape::new(1, 2),
    BeadShape::new(2, 2),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(self) -> usize {
        self.start + self.len
    }

    pub fn indices(self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    pub src: Span,
    pub tgt: Span,
    pub cost: f64,
}

impl Bead {
    pub fn shape(&self) -> BeadShape {
        BeadShape::new(self.src.len, self.tgt.len)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub beads: Vec<Bead>,
    pub total_cost: f64,
}

impl AlignmentPath {
    fn from_beads(beads: Vec<Bead>) -> Self {
        let total_cost = beads.iter().fold(0.0, |acc, b| acc + b.cost);
        AlignmentPath { beads, total_cost }
    }

    /// Checks monotonicity and exact coverage of both documents.
    pub fn covers(&self, n_src: usize, n_tgt: usize) -> bool {
        let (mut i, mut j) = (0, 0);
        for b in &self.beads {
            if b.src.start != i || b.tgt.start != j || (b.src.len == 0 && b.tgt.len == 0) {
                return false;
            }
            i = b.src.end();
            j = b.tgt.end();
        }
        i == n_src && j == n_tgt
    }

    /// (source index, target index) links implied by non-skip beads.
    pub fn links(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for b in self.beads.iter().filter(|b| !b.shape().is_skip()) {
            for i in b.src.indices() {
                for j in b.tgt.indices() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Default bead set: everything except 2:2. Concatenating two sentences
/// raises the cosine of hashed n-gram vectors enough that a 2:2 bead
/// usually undercuts the two 1:1 beads it replaces.
pub const DEFAULT_SHAPES: [BeadShape; 5] = [
    BeadShape::new(1, 1),
    BeadShape::new(1, 0),
    BeadShape::new(0, 1),
    BeadShape::new(2, 1),
    BeadShape::new(1, 2),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub allowed_beads: Vec<BeadShape>,
    /// Cost per sentence left unaligned.
    pub skip_penalty: f64,
    /// Number of random cross-document pairs used for the normalizer.
    pub norm_sample: usize,
    pub norm_seed: u64,
    pub cost_threshold: f64,
    /// Half-width of the search band around the diagonal; `None` searches
    /// the full grid.
    pub band_width: Option<usize>,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            allowed_beads: DEFAULT_SHAPES.to_vec(),
            skip_penalty: 1.0,
            norm_sample: 128,
            norm_seed: 0,
            cost_threshold: DEFAULT_COST_THRESHOLD,
            band_width: Some(100),
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<(), AlignError> {
        if !self.allowed_beads.contains(&BeadShape::new(1, 1)) {
            return Err(AlignError::InvalidParams("1:1 beads must be allowed".into()));
        }
        if let Some(s) = self.allowed_beads.iter().find(|s| !SHAPE_PRIORITY.contains(s)) {
            return Err(AlignError::InvalidParams(format!("unsupported bead {s}")));
        }
        if !(self.cost_threshold > 0.0) {
            return Err(AlignError::InvalidParams("cost_threshold must be > 0".into()));
        }
        if !(self.skip_penalty >= 0.0) || !self.skip_penalty.is_finite() {
            return Err(AlignError::InvalidParams("skip_penalty must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Allowed shapes in tie-break order.
    pub fn shapes(&self) -> Vec<BeadShape> {
        SHAPE_PRIORITY
            .iter()
            .copied()
            .filter(|s| self.allowed_beads.contains(s))
            .collect()
    }

    pub fn transposed(&self) -> AlignParams {
        AlignParams {
            allowed_beads: self.allowed_beads.iter().map(|s| s.transposed()).collect(),
            ..self.clone()
        }
    }

    /// Largest group size on either side, i.e. the overlap the embedding
    /// tables must provide.
    pub fn max_group(&self) -> usize {
        self.allowed_beads
            .iter()
            .map(|s| s.src.max(s.tgt))
            .max()
            .unwrap_or(1)
    }
}

fn lookup<'a>(
    table: &'a OverlapTable,
    side: &'static str,
    start: usize,
    len: usize,
) -> Result<&'a crate::embed::EmbeddingVector, AlignError> {
    table
        .get(start, len)
        .ok_or(AlignError::MissingEmbedding { side, start, len })
}

/// Cost of the bead covering `shape.src` source sentences from `i` and
/// `shape.tgt` target sentences from `j`.
pub fn bead_cost(
    src: &OverlapTable,
    tgt: &OverlapTable,
    shape: BeadShape,
    i: usize,
    j: usize,
    norm: f64,
    params: &AlignParams,
) -> Result<f64, AlignError> {
    if shape.is_skip() {
        return Ok(params.skip_penalty * (shape.src + shape.tgt) as f64);
    }
    let a = lookup(src, "source", i, shape.src)?;
    let b = lookup(tgt, "target", j, shape.tgt)?;
    let distance = (1.0 - cosine(a, b)).max(0.0);
    Ok(distance * shape.src.max(shape.tgt) as f64 / norm)
}

/// Mean cosine distance between single sentences of the two documents,
/// floored at [`NORM_FLOOR`].
///
/// Uses every pair when there are at most `sample_size` of them, otherwise
/// `sample_size` seeded random pairs. Distances are summed in sorted order
/// so the result does not depend on which document is the source.
pub fn compute_norm(
    src: &OverlapTable,
    tgt: &OverlapTable,
    n_src: usize,
    n_tgt: usize,
    sample_size: usize,
    seed: u64,
) -> Result<f64, AlignError> {
    if n_src == 0 || n_tgt == 0 {
        return Err(AlignError::EmptyDocument);
    }
    let mut pairs = Vec::new();
    if n_src * n_tgt <= sample_size.max(1) {
        for i in 0..n_src {
            for j in 0..n_tgt {
                pairs.push((i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..sample_size {
            pairs.push((rng.gen_range(0..n_src), rng.gen_range(0..n_tgt)));
        }
    }
    let mut distances = pairs
        .into_iter()
        .map(|(i, j)| {
            let a = lookup(src, "source", i, 1)?;
            let b = lookup(tgt, "target", j, 1)?;
            Ok((1.0 - cosine(a, b)).max(0.0))
        })
        .collect::<Result<Vec<f64>, AlignError>>()?;
    distances.sort_by(f64::total_cmp);
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(mean.max(NORM_FLOOR))
}

/// Normalizer for a document pair; 1.0 when either side is empty (only skip
/// beads are possible then, and they do not use it).
pub fn document_norm(
    src: &OverlapTable,
    tgt: &OverlapTable,
    n_src: usize,
    n_tgt: usize,
    params: &AlignParams,
) -> Result<f64, AlignError> {
    if n_src == 0 || n_tgt == 0 {
        return Ok(1.0);
    }
    compute_norm(src, tgt, n_src, n_tgt, params.norm_sample, params.norm_seed)
}

fn in_band(i: usize, j: usize, n_src: usize, n_tgt: usize, band: Option<usize>) -> bool {
    match band {
        None => true,
        Some(w) => {
            let lhs = (i * n_tgt).abs_diff(j * n_src);
            lhs <= w.saturating_mul(n_src.max(n_tgt))
        }
    }
}

fn run_dp(
    src: &OverlapTable,
    tgt: &OverlapTable,
    n_src: usize,
    n_tgt: usize,
    params: &AlignParams,
    norm: f64,
    band: Option<usize>,
) -> Result<Option<AlignmentPath>, AlignError> {
    let shapes = params.shapes();
    let width = n_tgt + 1;
    let mut cost = vec![f64::INFINITY; (n_src + 1) * width];
    let mut back: Vec<Option<(BeadShape, f64)>> = vec![None; (n_src + 1) * width];
    cost[0] = 0.0;
    for i in 0..=n_src {
        for j in 0..=n_tgt {
            if (i == 0 && j == 0) || !in_band(i, j, n_src, n_tgt, band) {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_back = None;
            for &shape in &shapes {
                if shape.src > i || shape.tgt > j {
                    continue;
                }
                let (pi, pj) = (i - shape.src, j - shape.tgt);
                let prev = cost[pi * width + pj];
                if prev.is_infinite() {
                    continue;
                }
                let c = bead_cost(src, tgt, shape, pi, pj, norm, params)?;
                let total = prev + c;
                if total < best {
                    best = total;
                    best_back = Some((shape, c));
                }
            }
            cost[i * width + j] = best;
            back[i * width + j] = best_back;
        }
    }
    if cost[n_src * width + n_tgt].is_infinite() {
        return Ok(None);
    }
    let mut beads = Vec::new();
    let (mut i, mut j) = (n_src, n_tgt);
    while i > 0 || j > 0 {
        let (shape, c) = back[i * width + j].expect("finite cell has a back pointer");
        i -= shape.src;
        j -= shape.tgt;
        beads.push(Bead {
            src: Span { start: i, len: shape.src },
            tgt: Span { start: j, len: shape.tgt },
            cost: c,
        });
    }
    beads.reverse();
    Ok(Some(AlignmentPath::from_beads(beads)))
}

/// Minimum-cost monotone alignment of two documents.
///
/// If the band admits no complete path the search is repeated once over the
/// full grid before giving up.
pub fn align_documents(
    src: &OverlapTable,
    tgt: &OverlapTable,
    n_src: usize,
    n_tgt: usize,
    params: &AlignParams,
) -> Result<AlignmentPath, AlignError> {
    params.validate()?;
    let norm = document_norm(src, tgt, n_src, n_tgt, params)?;
    align_with_norm(src, tgt, n_src, n_tgt, params, norm)
}

pub fn align_with_norm(
    src: &OverlapTable,
    tgt: &OverlapTable,
    n_src: usize,
    n_tgt: usize,
    params: &AlignParams,
    norm: f64,
) -> Result<AlignmentPath, AlignError> {
    if let Some(path) = run_dp(src, tgt, n_src, n_tgt, params, norm, params.band_width)? {
        return Ok(path);
    }
    if params.band_width.is_some() {
        if let Some(path) = run_dp(src, tgt, n_src, n_tgt, params, norm, None)? {
            return Ok(path);
        }
    }
    Err(AlignError::NoFeasiblePath)
}

/// One aligned sentence pair. Multi-sentence sides are joined by a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub src: String,
    pub tgt: String,
    pub cost: f64,
    pub src_span: Span,
    pub tgt_span: Span,
}

fn join(sentences: &[Sentence], span: Span) -> String {
    sentences[span.indices()]
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Turns non-skip beads into pairs, keeping those with cost <= `threshold`.
pub fn extract_pairs(
    path: &AlignmentPath,
    src: &[Sentence],
    tgt: &[Sentence],
    threshold: f64,
) -> Vec<ParallelPair> {
    path.beads
        .iter()
        .filter(|b| !b.shape().is_skip() && b.cost <= threshold)
        .map(|b| ParallelPair {
            src: join(src, b.src),
            tgt: join(tgt, b.tgt),
            cost: b.cost,
            src_span: b.src,
            tgt_span: b.tgt,
        })
        .collect()
}

/// Writes one `srcStart:len<TAB>tgtStart:len<TAB>cost` line per bead.
pub fn format_beads(path: &AlignmentPath) -> String {
    let mut out = String::new();
    for b in &path.beads {
        out.push_str(&format!(
            "{}:{}\t{}:{}\t{:.6}\n",
            b.src.start, b.src.len, b.tgt.start, b.tgt.len, b.cost
        ));
    }
    out
}

pub fn parse_beads(text: &str) -> Result<Vec<Bead>, AlignError> {
    fn span(s: &str) -> Option<Span> {
        let (a, b) = s.split_once(':')?;
        Some(Span {
            start: a.trim().parse().ok()?,
            len: b.trim().parse().ok()?,
        })
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let bad = || AlignError::Format {
                line: n + 1,
                msg: format!("malformed bead line {l:?}"),
            };
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            Ok(Bead {
                src: span(fields[0]).ok_or_else(bad)?,
                tgt: span(fields[1]).ok_or_else(bad)?,
                cost: fields[2].trim().parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
