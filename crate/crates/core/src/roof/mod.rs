//! Roof (return-time) functions over a Markov map.

mod cohomology;

pub use cohomology::{BranchResidual, CoboundaryCertificate, CohomologyReport, Verdict, Witness};

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::markov_maps::ExpandingMarkovMap;
use crate::probe;
use crate::rational::{self, Q};
use crate::report::{AxiomCheck, ValidationReport, Worst};

/// Closed-form description of a roof.
#[derive(Debug, Clone, PartialEq)]
pub enum RoofKind {
    Constant(Q),
    /// One polynomial on the whole domain, ascending coefficients.
    Polynomial(Vec<Q>),
    /// One polynomial per branch.
    PiecewisePolynomial(Vec<Vec<Q>>),
    /// One constant per branch.
    PiecewiseConstant(Vec<Q>),
    /// `c + Σ_k a_k cos(2πkt) + b_k sin(2πkt)` with `t` the normalised coordinate.
    Trigonometric {
        constant: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

/// Compactly supported C² bump `A·(1 − (d/R)²)³` for `d < R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

/// `sup_u 6u(1−u²)²`, attained at `u = 1/√5`.
const BUMP_SLOPE: f64 = 1.717_300_887_556_024_6;

#[derive(Debug, Clone)]
pub struct RoofFunction {
    base: Arc<ExpandingMarkovMap>,
    kind: RoofKind,
    coeffs: Vec<Vec<f64>>,
    bumps: Vec<Bump>,
    lower_bound: f64,
    upper_bound: f64,
    branch_lipschitz: f64,
    lipschitz: f64,
}

impl RoofFunction {
    /// Builds a roof and derives `r₀`, `τ̄` and `K` from a dense probe grid.
    pub fn new(base: Arc<ExpandingMarkovMap>, kind: RoofKind) -> Result<Self> {
        let n = base.len();
        let coeffs: Vec<Vec<f64>> = match &kind {
            RoofKind::Constant(c) => vec![vec![rational::to_f64(c)]; n],
            RoofKind::Polynomial(p) => vec![p.iter().map(rational::to_f64).collect(); n],
            RoofKind::PiecewisePolynomial(ps) => {
                if ps.len() != n {
                    return Err(Error::InvalidRoof(format!(
                        "{} branch polynomials for {n} branches",
                        ps.len()
                    )));
                }
                ps.iter().map(|p| p.iter().map(rational::to_f64).collect()).collect()
            }
            RoofKind::PiecewiseConstant(cs) => {
                if cs.len() != n {
                    return Err(Error::InvalidRoof(format!(
                        "{} branch constants for {n} branches",
                        cs.len()
                    )));
                }
                cs.iter().map(|c| vec![rational::to_f64(c)]).collect()
            }
            RoofKind::Trigonometric { cos, sin, .. } => {
                if cos.len() != sin.len() {
                    return Err(Error::InvalidRoof(
                        "cosine and sine coefficient lists differ in length".into(),
                    ));
                }
                Vec::new()
            }
        };
        let mut roof = RoofFunction {
            base,
            kind,
            coeffs,
            bumps: Vec::new(),
            lower_bound: 0.0,
            upper_bound: 0.0,
            branch_lipschitz: 0.0,
            lipschitz: 0.0,
        };
        roof.derive_bounds();
        if !(roof.lower_bound > 0.0) {
            return Err(Error::InvalidRoof(format!(
                "roof is not bounded below by a positive constant (min ≈ {})",
                roof.lower_bound
            )));
        }
        Ok(roof)
    }

    pub fn constant(base: Arc<ExpandingMarkovMap>, c: Q) -> Result<Self> {
        Self::new(base, RoofKind::Constant(c))
    }

    pub fn polynomial(base: Arc<ExpandingMarkovMap>, coeffs: Vec<Q>) -> Result<Self> {
        Self::new(base, RoofKind::Polynomial(coeffs))
    }

    fn derive_bounds(&mut self) {
        const GRID: usize = 4096;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut k_max: f64 = 0.0;
        let mut lip: f64 = 0.0;
        for (k, br) in self.base.branches().iter().enumerate() {
            let h = (br.right() - br.left()) / GRID as f64;
            let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut slope_max: f64 = 0.0;
            let mut kb: f64 = 0.0;
            let mut dslope: f64 = 0.0;
            let mut prev = self.derivative_on_branch(br.left(), k);
            for i in 0..=GRID {
                let x = br.left() + h * i as f64;
                let v = self.value_on_branch(x, k);
                let d = self.derivative_on_branch(x, k);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
                slope_max = slope_max.max(d.abs());
                kb = kb.max((d / br.derivative(x)).abs());
                dslope = dslope.max((d - prev).abs());
                prev = d;
            }
            // Grid extrema miss the true ones by at most half a step times the slope;
            // the slope itself by at most one step of its increments.
            lo = lo.min(vmin - 0.5 * h * slope_max);
            hi = hi.max(vmax + 0.5 * h * slope_max);
            lip = lip.max(slope_max + dslope);
            k_max = k_max.max(kb + dslope * self.base.expansion_bound());
        }
        self.lower_bound = lo;
        self.upper_bound = hi;
        self.branch_lipschitz = k_max;
        self.lipschitz = lip;
    }

    pub fn base(&self) -> &Arc<ExpandingMarkovMap> {
        &self.base
    }

    pub fn kind(&self) -> &RoofKind {
        &self.kind
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// `r₀`, a positive lower bound.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `τ̄`, an upper bound.
    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    /// `K` with `|D(r∘h)| ≤ K` over inverse branches.
    pub fn branch_lipschitz(&self) -> f64 {
        self.branch_lipschitz
    }

    /// Bound on `|r'|`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Overrides the claimed bounds (for validation experiments).
    pub fn with_claims(mut self, lower_bound: f64, branch_lipschitz: f64) -> Self {
        self.lower_bound = lower_bound;
        self.branch_lipschitz = branch_lipschitz;
        self
    }

    /// True when the roof is constant on every partition cell.
    pub fn is_locally_constant(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
            && match &self.kind {
                RoofKind::Constant(_) | RoofKind::PiecewiseConstant(_) => true,
                RoofKind::Polynomial(_) | RoofKind::PiecewisePolynomial(_) => {
                    self.coeffs.iter().all(|c| c.iter().skip(1).all(|&a| a == 0.0))
                }
                RoofKind::Trigonometric { cos, sin, .. } => cos.iter().chain(sin).all(|&a| a == 0.0),
            }
    }

    /// Exact rational data is available: closed-form polynomial kinds and no bumps.
    pub fn is_exact(&self) -> bool {
        self.bumps.is_empty() && !matches!(self.kind, RoofKind::Trigonometric { .. })
    }

    fn normalised(&self, x: f64) -> f64 {
        let (lo, hi) = self.base.domain();
        (x - lo) / (hi - lo)
    }

    /// `r(x)` evaluated with the formula of branch `k`, without a cell lookup.
    #[inline]
    pub fn value_on_branch(&self, x: f64, k: usize) -> f64 {
        let base = match &self.kind {
            RoofKind::Trigonometric { constant, cos, sin } => {
                let t = self.normalised(x);
                let mut s = *constant;
                for (j, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let w = TAU * (j + 1) as f64 * t;
                    s += a * w.cos() + b * w.sin();
                }
                s
            }
            _ => self.coeffs[k].iter().rev().fold(0.0, |acc, c| acc * x + c),
        };
        if self.bumps.is_empty() {
            return base;
        }
        base + self.bump_value(x)
    }

    #[inline]
    pub fn derivative_on_branch(&self, x: f64, k: usize) -> f64 {
        let base = match &self.kind {
            RoofKind::Trigonometric { cos, sin, .. } => {
                let (lo, hi) = self.base.domain();
                let t = self.normalised(x);
                let mut s = 0.0;
                for (j, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let f = TAU * (j + 1) as f64;
                    let w = f * t;
                    s += f * (b * w.cos() - a * w.sin());
                }
                s / (hi - lo)
            }
            _ => {
                let c = &self.coeffs[k];
                let mut s = 0.0;
                for (i, a) in c.iter().enumerate().skip(1).rev() {
                    s = s * x + i as f64 * a;
                }
                s
            }
        };
        base + self.bumps.iter().map(|b| self.bump_derivative(b, x)).sum::<f64>()
    }

    fn bump_value(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for b in &self.bumps {
            let d = self.base.distance(x, b.center);
            if d < b.radius {
                let u = d / b.radius;
                let w = 1.0 - u * u;
                s += b.amplitude * w * w * w;
            }
        }
        s
    }

    fn bump_derivative(&self, b: &Bump, x: f64) -> f64 {
        let d = self.base.distance(x, b.center);
        if d >= b.radius {
            return 0.0;
        }
        let u = d / b.radius;
        let w = 1.0 - u * u;
        let mut delta = x - b.center;
        if self.base.kind() == crate::markov_maps::DomainKind::Circle {
            let len = self.base.domain_length();
            delta -= len * (delta / len).round();
        }
        -6.0 * b.amplitude * w * w * delta / (b.radius * b.radius)
    }

    /// Exact `r(x)` on branch `k` for rational closed forms.
    pub fn exact_value_on_branch(&self, x: &Q, k: usize) -> Option<Q> {
        if !self.bumps.is_empty() {
            return None;
        }
        match &self.kind {
            RoofKind::Constant(c) => Some(c.clone()),
            RoofKind::Polynomial(p) => Some(rational::poly_eval(p, x)),
            RoofKind::PiecewisePolynomial(ps) => Some(rational::poly_eval(&ps[k], x)),
            RoofKind::PiecewiseConstant(cs) => Some(cs[k].clone()),
            RoofKind::Trigonometric { .. } => None,
        }
    }

    /// `r(x)`; fails on partition boundaries.
    pub fn value(&self, x: f64) -> Result<f64> {
        let k = self.base.cell_of(x)?;
        Ok(self.value_on_branch(x, k))
    }

    /// `Σ_{j<n} r(f^j x)`.
    pub fn birkhoff_sum(&self, x: f64, n: usize) -> Result<f64> {
        let mut s = 0.0;
        let mut y = x;
        for _ in 0..n {
            let (fy, k) = self.base.evaluate(y)?;
            s += self.value_on_branch(y, k);
            y = fy;
        }
        Ok(s)
    }

    /// Birkhoff sum along a prescribed itinerary starting at `x`.
    pub fn birkhoff_along(&self, x: f64, itinerary: &[usize]) -> f64 {
        let mut s = 0.0;
        let mut y = x;
        for &k in itinerary {
            s += self.value_on_branch(y, k);
            y = self.base.branch(k).forward(y);
        }
        s
    }

    /// Exact Birkhoff sum along an itinerary; `None` without exact data.
    pub fn exact_birkhoff_along(&self, x: &Q, itinerary: &[usize]) -> Option<Q> {
        let mut s = rational::qi(0);
        let mut y = x.clone();
        for &k in itinerary {
            s += self.exact_value_on_branch(&y, k)?;
            y = self.base.branch(k).exact_forward(&y)?;
        }
        Some(s)
    }

    /// Adds a C² bump supported in the ball `(center, radius)`.
    ///
    /// `protected` points are followed for `protect_steps` iterates; the
    /// support must avoid all of them.
    pub fn perturb_bump(
        &self,
        center: f64,
        radius: f64,
        amplitude: f64,
        protected: &[f64],
        protect_steps: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidRoof(format!("bump radius {radius} must be positive")));
        }
        if amplitude.abs() >= self.lower_bound {
            return Err(Error::InvalidRoof(format!(
                "bump amplitude {amplitude} would break positivity (r₀ = {})",
                self.lower_bound
            )));
        }
        for &p in protected {
            let mut y = p;
            for step in 0..protect_steps.max(1) {
                if self.base.distance(y, center) <= radius {
                    return Err(Error::ProtectedOrbitHit {
                        origin: p,
                        step,
                        point: y,
                    });
                }
                y = self.base.evaluate(y)?.0;
            }
        }
        let mut out = self.clone();
        if amplitude == 0.0 {
            return Ok(out);
        }
        out.bumps.push(Bump {
            center,
            radius,
            amplitude,
        });
        let slope = amplitude.abs() * BUMP_SLOPE / radius;
        out.lower_bound += amplitude.min(0.0);
        out.upper_bound += amplitude.max(0.0);
        out.lipschitz += slope;
        out.branch_lipschitz += slope * self.base.expansion_bound();
        Ok(out)
    }

    /// Probes the roof axioms: `r ≥ r₀` and `|D(r∘h)| ≤ K`.
    pub fn validate(&self, probes: usize) -> ValidationReport {
        let probes = probes.max(2);
        let mut min = Worst {
            value: f64::INFINITY,
            at: f64::NAN,
        };
        let mut slope = Worst::new();
        for (k, br) in self.base.branches().iter().enumerate() {
            for x in probe::interior(br.left(), br.right(), probes) {
                let v = self.value_on_branch(x, k);
                if v < min.value {
                    min = Worst { value: v, at: x };
                }
            }
            let (a, b) = br.image();
            let step = (b - a) / probes as f64;
            let mut prev = a;
            let mut prev_v = self.value_on_branch(br.inverse(a), k);
            for i in 1..=probes {
                let y = a + step * i as f64;
                let v = self.value_on_branch(br.inverse(y), k);
                slope.see(((v - prev_v) / (y - prev)).abs(), y);
                prev = y;
                prev_v = v;
            }
        }
        let mut report = ValidationReport::default();
        report.checks.push(AxiomCheck::at_least(
            "roof_lower_bound",
            min.value,
            min.at,
            self.lower_bound,
        ));
        let mut lip = AxiomCheck::at_most(
            "roof_branch_lipschitz",
            slope.value,
            slope.at,
            self.branch_lipschitz * (1.0 + 1e-6) + 1e-12,
        );
        lip.tolerance = self.branch_lipschitz;
        report.checks.push(lip);
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn xsq() -> RoofFunction {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        RoofFunction::polynomial(f, vec![qi(1), qi(0), qi(1)]).unwrap()
    }

    #[test]
    fn birkhoff_sums_on_periodic_orbits() {
        let r = xsq();
        assert!((r.birkhoff_sum(0.2, 4).unwrap() - 5.2).abs() < 1e-14);
        assert!((r.birkhoff_sum(1.0 / 3.0, 4).unwrap() - 46.0 / 9.0).abs() < 1e-14);
        assert_eq!(r.birkhoff_sum(0.7, 0).unwrap(), 0.0);
        let exact = r.exact_birkhoff_along(&q(1, 5), &[0, 0, 1, 1]).unwrap();
        assert_eq!(exact, q(26, 5));
    }

    #[test]
    fn bounds_cover_the_roof() {
        let r = xsq();
        assert!(r.lower_bound() <= 1.0 && r.lower_bound() > 0.99);
        assert!(r.upper_bound() >= 2.0 && r.upper_bound() < 2.01);
        // |D(r∘h)| = |2x|/2 ≤ 1
        assert!(r.branch_lipschitz() >= 1.0 && r.branch_lipschitz() < 1.01);
        assert!(r.validate(10_000).passed());
    }

    #[test]
    fn understated_lipschitz_claim_fails() {
        let r = xsq().with_claims(0.5, 0.5);
        let rep = r.validate(1000);
        assert_eq!(rep.get("roof_lower_bound").unwrap().status, crate::Status::Pass);
        assert_eq!(rep.get("roof_branch_lipschitz").unwrap().status, crate::Status::Fail);
    }

    #[test]
    fn nonpositive_roof_is_rejected() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        assert!(matches!(
            RoofFunction::polynomial(f, vec![q(-1, 10), qi(1)]),
            Err(Error::InvalidRoof(_))
        ));
    }

    #[test]
    fn bump_hits_protected_orbit() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let r = RoofFunction::constant(f, qi(1)).unwrap();
        let third = 1.0 / 3.0;
        assert!(matches!(
            r.perturb_bump(third, 0.02, 0.1, &[third], 2),
            Err(Error::ProtectedOrbitHit { .. })
        ));
        let same = r.perturb_bump(0.2, 0.02, 0.0, &[third], 2).unwrap();
        assert!(same.bumps().is_empty());
        assert!(same.is_locally_constant());
    }

    #[test]
    fn bump_is_local_and_smooth() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let r = RoofFunction::constant(f, qi(1)).unwrap();
        let b = r.perturb_bump(0.2, 0.02, 0.1, &[1.0 / 3.0], 2).unwrap();
        assert_eq!(b.value(0.2).unwrap(), 1.1);
        assert_eq!(b.value(0.22).unwrap(), 1.0);
        assert_eq!(b.value(0.7).unwrap(), 1.0);
        assert!(b.validate(10_000).passed(), "{:?}", b.validate(10_000));
        let lip = b.lipschitz();
        assert!((lip - 0.1 * BUMP_SLOPE / 0.02).abs() < 1e-12);
    }

    #[test]
    fn trigonometric_roof_derivative() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let r = RoofFunction::new(
            f,
            RoofKind::Trigonometric {
                constant: 2.0,
                cos: vec![0.5],
                sin: vec![0.25],
            },
        )
        .unwrap();
        let x = 0.3;
        let h = 1e-6;
        let fd = (r.value_on_branch(x + h, 0) - r.value_on_branch(x - h, 0)) / (2.0 * h);
        assert!((fd - r.derivative_on_branch(x, 0)).abs() < 1e-8);
        assert!(!r.is_exact());
    }
}
