//! Temporal distance between coded points of the natural extension.

use super::SuspensionSemiflow;
use crate::error::{Error, Result};

/// A base point together with a past coding `a₁ a₂ …` (most recent symbol
/// first). The past is repeated cyclically when a deeper one is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPoint {
    pub x: f64,
    pub past: Vec<usize>,
}

impl CodedPoint {
    pub fn new(x: f64, past: Vec<usize>) -> Self {
        CodedPoint { x, past }
    }

    #[inline]
    fn symbol(&self, k: usize) -> usize {
        self.past[k % self.past.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalDistance {
    pub value: f64,
    /// `2K·|x − y|·λⁿ/(1 − λ)`.
    pub error_bound: f64,
    pub depth: usize,
}

impl SuspensionSemiflow {
    fn backward_roofs(&self, x: f64, cell: usize, past: &CodedPoint, depth: usize) -> Result<Vec<f64>> {
        let map = self.base();
        let mut out = Vec::with_capacity(depth);
        let mut y = x;
        let mut to = cell;
        for k in 0..depth {
            let a = past.symbol(k);
            if a >= map.len() || !map.allowed(a, to) {
                return Err(Error::BracketUndefined(format!(
                    "past symbol {a} at depth {} cannot precede cell {to}",
                    k + 1
                )));
            }
            y = map.branch(a).inverse(y);
            out.push(self.roof().value_on_branch(y, a));
            to = a;
        }
        Ok(out)
    }

    /// `φ(p, q) = Σ_{k=1}^{n} [r(h_a^k y) − r(h_a^k x)] − [r(h_c^k y) − r(h_c^k x)]`
    /// for `p = (x, a)` and `q = (y, c)`, where `h_a^k` follows the past `a`.
    ///
    /// The four corners `(x, a)`, `(y, a)`, `(x, c)`, `(y, c)` must all be
    /// admissible, which is the common product chart of `p` and `q`.
    pub fn temporal_distance(&self, p: &CodedPoint, q: &CodedPoint, depth: usize) -> Result<TemporalDistance> {
        if p.past.is_empty() || q.past.is_empty() {
            return Err(Error::BracketUndefined("empty past coding".into()));
        }
        let map = self.base();
        let cx = map.cell_of(p.x)?;
        let cy = map.cell_of(q.x)?;
        let ax = self.backward_roofs(p.x, cx, p, depth)?;
        let ay = self.backward_roofs(q.x, cy, p, depth)?;
        let cxs = self.backward_roofs(p.x, cx, q, depth)?;
        let cys = self.backward_roofs(q.x, cy, q, depth)?;
        let value = (0..depth).map(|k| (ay[k] - ax[k]) - (cys[k] - cxs[k])).sum();
        let lambda = map.expansion_bound();
        let k = self.roof().branch_lipschitz();
        let error_bound = 2.0 * k * (q.x - p.x).abs() * lambda.powi(depth as i32) / (1.0 - lambda);
        Ok(TemporalDistance {
            value,
            error_bound,
            depth,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_maps::ExpandingMarkovMap;
    use crate::rational::qi;
    use crate::roof::{RoofFunction, RoofKind};
    use crate::transfer_operator::InvariantDensity;
    use std::sync::Arc;

    fn flow(kind: RoofKind, map: ExpandingMarkovMap) -> SuspensionSemiflow {
        let f = Arc::new(map);
        let r = Arc::new(RoofFunction::new(f, kind).unwrap());
        SuspensionSemiflow::new(r, Arc::new(InvariantDensity::uniform(0.0, 1.0, 6)))
    }

    #[test]
    fn xsq_closed_form() {
        let s = flow(
            RoofKind::Polynomial(vec![qi(1), qi(0), qi(1)]),
            ExpandingMarkovMap::doubling(),
        );
        let (x, y) = (0.2, 0.7);
        let p = CodedPoint::new(x, vec![0]);
        let q = CodedPoint::new(y, vec![1]);
        let d = s.temporal_distance(&p, &q, 50).unwrap();
        // h₀ᵏ t = t/2ᵏ and h₁ᵏ t = 1 − (1 − t)/2ᵏ.
        let mut oracle = 0.0;
        for k in 1..=50 {
            let s = 0.5f64.powi(k);
            let a = (y * s).powi(2) - (x * s).powi(2);
            let c = (1.0 - (1.0 - y) * s).powi(2) - (1.0 - (1.0 - x) * s).powi(2);
            oracle += a - c;
        }
        assert!((d.value - oracle).abs() < 1e-14);
        assert!(d.value.abs() > 0.1);
    }

    #[test]
    fn locally_constant_and_coboundary_roofs_vanish() {
        let s = flow(
            RoofKind::PiecewiseConstant(vec![qi(1), qi(2)]),
            ExpandingMarkovMap::doubling(),
        );
        let d = s
            .temporal_distance(&CodedPoint::new(0.1, vec![0, 1]), &CodedPoint::new(0.8, vec![1]), 30)
            .unwrap();
        assert_eq!(d.value, 0.0);
        let s = flow(RoofKind::Polynomial(vec![qi(1), qi(1)]), ExpandingMarkovMap::doubling());
        let d = s
            .temporal_distance(&CodedPoint::new(0.1, vec![0]), &CodedPoint::new(0.8, vec![1]), 30)
            .unwrap();
        assert!(d.value.abs() < 1e-15);
    }

    #[test]
    fn inadmissible_past() {
        // Cell 0 of the three-branch map cannot be followed by cell 0.
        let s = flow(RoofKind::Constant(qi(1)), ExpandingMarkovMap::three_branch());
        let err = s
            .temporal_distance(&CodedPoint::new(0.1, vec![0]), &CodedPoint::new(0.5, vec![1]), 5)
            .unwrap_err();
        assert!(matches!(err, Error::BracketUndefined(_)));
    }
}
