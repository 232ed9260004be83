//! Exhaustive alignment search, used as a reference for the dynamic program.

use super::{
    bead_cost, document_norm, AlignError, AlignParams, AlignmentPath, Bead, BeadShape, Span,
};
use crate::embed::OverlapTable;

/// Largest document the exhaustive search accepts.
pub const MAX_SENTENCES: usize = 8;

struct Search<'a> {
    src: &'a OverlapTable,
    tgt: &'a OverlapTable,
    n_src: usize,
    n_tgt: usize,
    shapes: Vec<BeadShape>,
    params: &'a AlignParams,
    norm: f64,
    stack: Vec<Bead>,
    best: Option<(f64, Vec<Bead>)>,
}

impl Search<'_> {
    fn walk(&mut self, i: usize, j: usize, acc: f64) -> Result<(), AlignError> {
        if i == self.n_src && j == self.n_tgt {
            if self.best.as_ref().is_none_or(|(b, _)| acc < *b) {
                self.best = Some((acc, self.stack.clone()));
            }
            return Ok(());
        }
        for k in 0..self.shapes.len() {
            let shape = self.shapes[k];
            if i + shape.src > self.n_src || j + shape.tgt > self.n_tgt {
                continue;
            }
            let c = bead_cost(self.src, self.tgt, shape, i, j, self.norm, self.params)?;
            self.stack.push(Bead {
                src: Span { start: i, len: shape.src },
                tgt: Span { start: j, len: shape.tgt },
                cost: c,
            });
            self.walk(i + shape.src, j + shape.tgt, acc + c)?;
            self.stack.pop();
        }
        Ok(())
    }
}

/// Enumerates every monotone bead sequence and returns the cheapest.
/// Ignores the band; documents are limited to [`MAX_SENTENCES`] each.
pub fn brute_force_align(
    src: &OverlapTable,
    tgt: &OverlapTable,
    n_src: usize,
    n_tgt: usize,
    params: &AlignParams,
) -> Result<AlignmentPath, AlignError> {
    if n_src > MAX_SENTENCES || n_tgt > MAX_SENTENCES {
        return Err(AlignError::TooLarge(n_src, n_tgt));
    }
    params.validate()?;
    let norm = document_norm(src, tgt, n_src, n_tgt, params)?;
    let mut search = Search {
        src,
        tgt,
        n_src,
        n_tgt,
        shapes: params.shapes(),
        params,
        norm,
        stack: Vec::new(),
        best: None,
    };
    search.walk(0, 0, 0.0)?;
    let (total_cost, beads) = search.best.ok_or(AlignError::NoFeasiblePath)?;
    Ok(AlignmentPath { beads, total_cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_large_documents() {
        let t = OverlapTable::new();
        assert_eq!(
            brute_force_align(&t, &t, 9, 1, &AlignParams::default()),
            Err(AlignError::TooLarge(9, 1))
        );
    }

    #[test]
    fn empty_documents() {
        let t = OverlapTable::new();
        let p = brute_force_align(&t, &t, 0, 0, &AlignParams::default()).unwrap();
        assert!(p.beads.is_empty());
        assert_eq!(p.total_cost, 0.0);
    }

    #[test]
    fn source_only() {
        let t = OverlapTable::new();
        let p = brute_force_align(&t, &t, 2, 0, &AlignParams::default()).unwrap();
        assert_eq!(p.total_cost, 2.0);
    }
}
