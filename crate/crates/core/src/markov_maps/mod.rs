//! Uniformly expanding Markov maps of an interval or circle.
//!
//! Cells are half-open `[left, right)`. Evaluation at an interior partition
//! breakpoint is an error; the caller decides which side it meant.

mod induce;
mod validate;

pub use induce::{InducedBranch, InducedMap, TailPoint, TailStatistics};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, q, qi, Q};

/// Whether the domain endpoints are identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Circle,
}

/// A non-affine branch supplied by the caller.
pub trait SmoothBranch: Send + Sync + fmt::Debug {
    fn forward(&self, x: f64) -> f64;
    fn inverse(&self, y: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// `x ↦ slope·x + intercept` with exact rational data.
#[derive(Debug, Clone)]
pub struct AffineBranch {
    slope: Q,
    intercept: Q,
    s: f64,
    c: f64,
}

impl AffineBranch {
    pub fn new(slope: Q, intercept: Q) -> Self {
        let s = rational::to_f64(&slope);
        let c = rational::to_f64(&intercept);
        AffineBranch { slope, intercept, s, c }
    }

    pub fn slope(&self) -> &Q {
        &self.slope
    }

    pub fn intercept(&self) -> &Q {
        &self.intercept
    }
}

#[derive(Debug, Clone)]
pub enum BranchMap {
    Affine(AffineBranch),
    Smooth(Arc<dyn SmoothBranch>),
}

#[derive(Debug, Clone)]
pub struct Branch {
    left: f64,
    right: f64,
    exact: Option<(Q, Q)>,
    map: BranchMap,
}

impl Branch {
    pub fn affine(left: Q, right: Q, slope: Q, intercept: Q) -> Self {
        Branch {
            left: rational::to_f64(&left),
            right: rational::to_f64(&right),
            exact: Some((left, right)),
            map: BranchMap::Affine(AffineBranch::new(slope, intercept)),
        }
    }

    pub fn smooth(left: f64, right: f64, map: Arc<dyn SmoothBranch>) -> Self {
        Branch {
            left,
            right,
            exact: None,
            map: BranchMap::Smooth(map),
        }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn exact_cell(&self) -> Option<(&Q, &Q)> {
        self.exact.as_ref().map(|(a, b)| (a, b))
    }

    pub fn map(&self) -> &BranchMap {
        &self.map
    }

    pub fn as_affine(&self) -> Option<&AffineBranch> {
        match &self.map {
            BranchMap::Affine(a) => Some(a),
            BranchMap::Smooth(_) => None,
        }
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        match &self.map {
            BranchMap::Affine(a) => a.s * x + a.c,
            BranchMap::Smooth(s) => s.forward(x),
        }
    }

    #[inline]
    pub fn inverse(&self, y: f64) -> f64 {
        match &self.map {
            BranchMap::Affine(a) => (y - a.c) / a.s,
            BranchMap::Smooth(s) => s.inverse(y),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.map {
            BranchMap::Affine(a) => a.s,
            BranchMap::Smooth(s) => s.derivative(x),
        }
    }

    /// |h'(y)| for the inverse branch h at a point `y` of the image.
    #[inline]
    pub fn inverse_jacobian(&self, y: f64) -> f64 {
        match &self.map {
            BranchMap::Affine(a) => 1.0 / a.s.abs(),
            BranchMap::Smooth(s) => 1.0 / s.derivative(s.inverse(y)).abs(),
        }
    }

    pub fn exact_forward(&self, x: &Q) -> Option<Q> {
        self.as_affine().map(|a| &a.slope * x + &a.intercept)
    }

    pub fn exact_inverse(&self, y: &Q) -> Option<Q> {
        self.as_affine().map(|a| (y - &a.intercept) / &a.slope)
    }

    /// Image `f(Δ_k)` as a sorted pair.
    pub fn image(&self) -> (f64, f64) {
        sorted(self.forward(self.left), self.forward(self.right))
    }

    /// Preimage of `[a, b]` inside this branch's cell.
    pub fn pull(&self, a: f64, b: f64) -> (f64, f64) {
        sorted(self.inverse(a), self.inverse(b))
    }

    pub fn exact_pull(&self, a: &Q, b: &Q) -> Option<(Q, Q)> {
        let u = self.exact_inverse(a)?;
        let v = self.exact_inverse(b)?;
        Some(if u <= v { (u, v) } else { (v, u) })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x < self.right
    }
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A piecewise expanding Markov map with claimed expansion and distortion bounds.
#[derive(Debug, Clone)]
pub struct ExpandingMarkovMap {
    name: String,
    kind: DomainKind,
    branches: Vec<Branch>,
    transitions: Vec<Vec<bool>>,
    expansion_bound: f64,
    distortion_bound: f64,
}

impl ExpandingMarkovMap {
    pub fn new(
        name: impl Into<String>,
        kind: DomainKind,
        branches: Vec<Branch>,
        transitions: Vec<Vec<bool>>,
        expansion_bound: f64,
        distortion_bound: f64,
    ) -> Result<Self> {
        let n = branches.len();
        if n == 0 {
            return Err(Error::InvalidModel("map has no branches".into()));
        }
        if transitions.len() != n || transitions.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel(format!("transition matrix must be {n}x{n}")));
        }
        if let Some(k) = transitions.iter().position(|row| !row.iter().any(|&a| a)) {
            return Err(Error::InvalidModel(format!("branch {k} has an empty image")));
        }
        for (k, b) in branches.iter().enumerate() {
            if !(b.left < b.right) {
                return Err(Error::InvalidModel(format!("branch {k} has an empty cell")));
            }
        }
        for w in branches.windows(2) {
            if (w[0].right - w[1].left).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "cells are not contiguous at {} / {}",
                    w[0].right, w[1].left
                )));
            }
        }
        if !(expansion_bound > 0.0 && expansion_bound < 1.0) {
            return Err(Error::InvalidModel(format!(
                "expansion bound {expansion_bound} outside (0, 1)"
            )));
        }
        Ok(ExpandingMarkovMap {
            name: name.into(),
            kind,
            branches,
            transitions,
            expansion_bound,
            distortion_bound,
        })
    }

    /// Piecewise-affine map from exact breakpoints, slopes and intercepts.
    #[allow(clippy::too_many_arguments)]
    pub fn affine(
        name: impl Into<String>,
        kind: DomainKind,
        breakpoints: &[Q],
        slopes: &[Q],
        intercepts: &[Q],
        transitions: Vec<Vec<bool>>,
        expansion_bound: f64,
        distortion_bound: f64,
    ) -> Result<Self> {
        let n = slopes.len();
        if breakpoints.len() != n + 1 || intercepts.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} breakpoints, {} slopes and {} intercepts do not describe the same branches",
                breakpoints.len(),
                n,
                intercepts.len()
            )));
        }
        if slopes.iter().any(|s| s.is_zero()) {
            return Err(Error::InvalidModel("zero slope".into()));
        }
        let branches = (0..n)
            .map(|k| {
                Branch::affine(
                    breakpoints[k].clone(),
                    breakpoints[k + 1].clone(),
                    slopes[k].clone(),
                    intercepts[k].clone(),
                )
            })
            .collect();
        Self::new(name, kind, branches, transitions, expansion_bound, distortion_bound)
    }

    /// `x ↦ d·x mod 1` on the circle.
    pub fn circle(degree: usize) -> Self {
        assert!(degree >= 2, "degree must be at least 2");
        let d = degree as i64;
        let breaks: Vec<Q> = (0..=d).map(|k| q(k, d)).collect();
        let slopes = vec![qi(d); degree];
        let intercepts: Vec<Q> = (0..d).map(|k| qi(-k)).collect();
        let name = match degree {
            2 => "doubling".to_string(),
            3 => "tripling".to_string(),
            _ => format!("circle{degree}"),
        };
        Self::affine(
            name,
            DomainKind::Circle,
            &breaks,
            &slopes,
            &intercepts,
            vec![vec![true; degree]; degree],
            1.0 / degree as f64,
            0.0,
        )
        .expect("circle map is well formed")
    }

    /// `2x mod 1` with cells `[0, 1/2)`, `[1/2, 1)`.
    pub fn doubling() -> Self {
        Self::circle(2)
    }

    /// `2x + 1/3` on `[0,1/3)`, `3x − 1` on `[1/3,2/3)`, `3x − 2` on `[2/3,1)`.
    /// Transitive but not full branch: the first cell never maps to itself.
    pub fn three_branch() -> Self {
        Self::affine(
            "three_branch",
            DomainKind::Interval,
            &[qi(0), q(1, 3), q(2, 3), qi(1)],
            &[qi(2), qi(3), qi(3)],
            &[q(1, 3), qi(-1), qi(-2)],
            vec![vec![false, true, true], vec![true, true, true], vec![true, true, true]],
            0.5,
            0.0,
        )
        .expect("three-branch map is well formed")
    }

    /// Looks up a built-in model by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "doubling" => Some(Self::doubling()),
            "tripling" => Some(Self::circle(3)),
            "three_branch" => Some(Self::three_branch()),
            _ => None,
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["doubling", "tripling", "three_branch"]
    }

    /// Same map with a different claimed expansion bound.
    pub fn with_expansion_bound(mut self, lambda: f64) -> Self {
        self.expansion_bound = lambda;
        self
    }

    pub fn with_distortion_bound(mut self, d: f64) -> Self {
        self.distortion_bound = d;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.branches[0].left, self.branches[self.branches.len() - 1].right)
    }

    pub fn exact_domain(&self) -> Option<(Q, Q)> {
        let (a, _) = self.branches[0].exact_cell()?;
        let (_, b) = self.branches[self.branches.len() - 1].exact_cell()?;
        Some((a.clone(), b.clone()))
    }

    pub fn domain_length(&self) -> f64 {
        let (a, b) = self.domain();
        b - a
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branch(&self, k: usize) -> &Branch {
        &self.branches[k]
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn transitions(&self) -> &[Vec<bool>] {
        &self.transitions
    }

    #[inline]
    pub fn allowed(&self, from: usize, to: usize) -> bool {
        self.transitions[from][to]
    }

    pub fn expansion_bound(&self) -> f64 {
        self.expansion_bound
    }

    pub fn distortion_bound(&self) -> f64 {
        self.distortion_bound
    }

    pub fn is_affine(&self) -> bool {
        self.branches
            .iter()
            .all(|b| b.exact.is_some() && b.as_affine().is_some())
    }

    pub fn is_full_branch(&self) -> bool {
        self.transitions.iter().all(|row| row.iter().all(|&a| a))
    }

    /// Interior partition breakpoints (excluding the domain endpoints).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.branches[1..].iter().map(|b| b.left).collect()
    }

    /// True when every cell reaches every other cell.
    pub fn is_transitive(&self) -> bool {
        (0..self.len()).all(|i| {
            let seen = self.reachable_from(i);
            seen.iter().all(|&s| s)
        })
    }

    /// Cells reachable from `start` in one or more steps.
    pub(crate) fn reachable_from(&self, start: usize) -> Vec<bool> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for (j, s) in seen.iter_mut().enumerate() {
                if self.transitions[i][j] && !*s {
                    *s = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// Distance on the domain, wrapping around for circle maps.
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.kind {
            DomainKind::Interval => d,
            DomainKind::Circle => {
                let len = self.domain_length();
                let d = d.rem_euclid(len);
                d.min(len - d)
            }
        }
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x < hi) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let k = self.branches.partition_point(|b| b.left <= x) - 1;
        if k > 0 && x == self.branches[k].left {
            return Err(Error::BoundaryPoint { x });
        }
        Ok(k)
    }

    /// `f(x)` together with the branch index of `x`.
    pub fn evaluate(&self, x: f64) -> Result<(f64, usize)> {
        let k = self.cell_of(x)?;
        Ok((self.branches[k].forward(x), k))
    }

    /// Inverse-branch images `(k, h_k(x))` over every branch whose image contains `x`.
    pub fn preimages(&self, x: f64) -> Result<Vec<(usize, f64)>> {
        let j = self.cell_of(x)?;
        Ok((0..self.len())
            .filter(|&k| self.transitions[k][j])
            .map(|k| (k, self.branches[k].inverse(x)))
            .collect())
    }

    /// Checks an itinerary against the transition matrix, cyclically if asked.
    pub fn check_admissible(&self, itinerary: &[usize], cyclic: bool) -> Result<()> {
        let n = self.len();
        if let Some(&bad) = itinerary.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidModel(format!("symbol {bad} out of range")));
        }
        for w in itinerary.windows(2) {
            if !self.allowed(w[0], w[1]) {
                return Err(Error::InadmissibleItinerary { from: w[0], to: w[1] });
            }
        }
        if cyclic && !itinerary.is_empty() {
            let (a, b) = (itinerary[itinerary.len() - 1], itinerary[0]);
            if !self.allowed(a, b) {
                return Err(Error::InadmissibleItinerary { from: a, to: b });
            }
        }
        Ok(())
    }

    /// The periodic point realising `itinerary`, found as the fixed point of the
    /// composed inverse branches.
    pub fn periodic_point(&self, itinerary: &[usize]) -> Result<f64> {
        if itinerary.is_empty() {
            return Err(Error::InvalidModel("empty itinerary".into()));
        }
        self.check_admissible(itinerary, true)?;
        let first = &self.branches[itinerary[0]];
        let mut y = 0.5 * (first.left + first.right);
        for _ in 0..10_000 {
            let z = itinerary.iter().rev().fold(y, |acc, &k| self.branches[k].inverse(acc));
            if z == y {
                break;
            }
            y = z;
        }
        Ok(y)
    }

    /// Exact periodic point for affine maps; `None` when a branch is not affine.
    pub fn periodic_point_exact(&self, itinerary: &[usize]) -> Result<Option<Q>> {
        if itinerary.is_empty() {
            return Err(Error::InvalidModel("empty itinerary".into()));
        }
        self.check_admissible(itinerary, true)?;
        let mut a = Q::one();
        let mut b = Q::zero();
        for &k in itinerary.iter().rev() {
            let Some(br) = self.branches[k].as_affine() else {
                return Ok(None);
            };
            a /= br.slope();
            b = (b - br.intercept()) / br.slope();
        }
        Ok(Some(b / (Q::one() - a)))
    }

    /// Orbit of `x` following the given branches (no cell lookup).
    pub fn orbit_along(&self, x: f64, itinerary: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(itinerary.len() + 1);
        let mut y = x;
        out.push(y);
        for &k in itinerary {
            y = self.branches[k].forward(y);
            out.push(y);
        }
        out
    }

    /// `|f^n(x) − x|` along the itinerary.
    pub fn periodic_residual(&self, x: f64, itinerary: &[usize]) -> f64 {
        let orbit = self.orbit_along(x, itinerary);
        (orbit[orbit.len() - 1] - x).abs()
    }

    /// Markov refinement into cylinders of `level + 1` symbols. Level 0 is the map itself.
    pub fn refine(&self, level: usize) -> Result<Self> {
        if level == 0 {
            return Ok(self.clone());
        }
        let mut words: Vec<Vec<usize>> = (0..self.len()).map(|k| vec![k]).collect();
        for _ in 0..level {
            let mut next = Vec::new();
            for w in &words {
                let last = w[w.len() - 1];
                for j in 0..self.len() {
                    if self.allowed(last, j) {
                        let mut v = w.clone();
                        v.push(j);
                        next.push(v);
                    }
                }
            }
            if next.len() > 1_000_000 {
                return Err(Error::DepthOverflow {
                    depth: level,
                    nodes: next.len() as f64,
                    budget: 1_000_000,
                });
            }
            words = next;
        }
        let exact = self.is_affine();
        let mut cells: Vec<(Vec<usize>, Branch)> = words
            .into_iter()
            .map(|w| {
                let last = &self.branches[w[w.len() - 1]];
                let mut iv = (last.left, last.right);
                let mut ex = last.exact.clone();
                for &k in w[..w.len() - 1].iter().rev() {
                    let br = &self.branches[k];
                    iv = br.pull(iv.0, iv.1);
                    if exact {
                        ex = ex.and_then(|(a, b)| br.exact_pull(&a, &b));
                    }
                }
                if let Some((a, b)) = &ex {
                    iv = (rational::to_f64(a), rational::to_f64(b));
                }
                let br = Branch {
                    left: iv.0,
                    right: iv.1,
                    exact: if exact { ex } else { None },
                    map: self.branches[w[0]].map.clone(),
                };
                (w, br)
            })
            .collect();
        cells.sort_by(|a, b| a.1.left.total_cmp(&b.1.left));
        let mut by_prefix: HashMap<&[usize], Vec<usize>> = HashMap::new();
        for (i, (w, _)) in cells.iter().enumerate() {
            by_prefix.entry(&w[..level]).or_default().push(i);
        }
        let n = cells.len();
        let mut transitions = vec![vec![false; n]; n];
        for (i, (w, _)) in cells.iter().enumerate() {
            if let Some(targets) = by_prefix.get(&w[1..]) {
                for &j in targets {
                    transitions[i][j] = true;
                }
            }
        }
        let branches = cells.into_iter().map(|(_, b)| b).collect();
        Self::new(
            format!("{}^{}", self.name, level + 1),
            self.kind,
            branches,
            transitions,
            self.expansion_bound,
            self.distortion_bound,
        )
    }
}

/// Formats an itinerary as a compact symbol string.
pub fn format_itinerary(itinerary: &[usize]) -> String {
    if itinerary.iter().all(|&k| k < 10) {
        itinerary.iter().map(|&k| char::from(b'0' + k as u8)).collect()
    } else {
        itinerary.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_evaluation() {
        let f = ExpandingMarkovMap::doubling();
        assert_eq!(f.evaluate(0.3).unwrap(), (0.6, 0));
        assert_eq!(f.evaluate(0.75).unwrap(), (0.5, 1));
        assert_eq!(f.evaluate(0.0).unwrap(), (0.0, 0));
        assert!(matches!(f.evaluate(0.5), Err(Error::BoundaryPoint { .. })));
        assert!(matches!(f.evaluate(1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn three_branch_evaluation() {
        let f = ExpandingMarkovMap::three_branch();
        let (y, k) = f.evaluate(0.5).unwrap();
        assert_eq!(k, 1);
        assert!((y - 0.5).abs() < 1e-15);
        assert!(matches!(f.evaluate(1.0 / 3.0), Err(Error::BoundaryPoint { .. })));
    }

    #[test]
    fn periodic_points_of_doubling() {
        let f = ExpandingMarkovMap::doubling();
        assert!((f.periodic_point(&[0, 0, 1, 1]).unwrap() - 0.2).abs() < 1e-15);
        assert!((f.periodic_point(&[0, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.periodic_point(&[0]).unwrap(), 0.0);
        assert_eq!(f.periodic_point_exact(&[0, 0, 1, 1]).unwrap(), Some(q(1, 5)));
    }

    #[test]
    fn forbidden_transition_is_reported() {
        let f = ExpandingMarkovMap::three_branch();
        assert_eq!(
            f.periodic_point(&[0, 0, 1]),
            Err(Error::InadmissibleItinerary { from: 0, to: 0 })
        );
        assert!(f.periodic_point(&[1, 0]).is_ok());
    }

    #[test]
    fn refinement_is_markov() {
        let f = ExpandingMarkovMap::three_branch().refine(2).unwrap();
        assert!(f.validate_axioms(200).passed());
        assert!(f.is_transitive());
        let total: f64 = f.branches().iter().map(|b| b.right() - b.left()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn circle_distance_wraps() {
        let f = ExpandingMarkovMap::doubling();
        assert!((f.distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        let g = ExpandingMarkovMap::three_branch();
        assert!((g.distance(0.05, 0.95) - 0.9).abs() < 1e-15);
    }
}
