//! Suspension semiflows `(x, u) ↦ (x, u + t)` with base resets at the roof.

mod correlation;
mod temporal;

pub use correlation::{fit_rate, fit_rate_windowed, CorrelationSeries, FitVerdict, RateFit, TimeGrid};
pub use temporal::{CodedPoint, TemporalDistance};

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov_maps::ExpandingMarkovMap;
use crate::roof::RoofFunction;
use crate::skew_product::{Fiber, HyperbolicSkewProduct};
use crate::transfer_operator::InvariantDensity;

/// Default depth of the random past used to place fibre coordinates.
pub const FIBER_DEPTH: usize = 40;

/// Roof crossings within this relative distance of the roof are taken.
const CROSSING_SLACK: f64 = 1e-12;

/// Point `(x, z, u)` of the suspension; `z` is unused over a map base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub z: Fiber,
    pub u: f64,
}

impl PhasePoint {
    pub fn new(x: f64, u: f64) -> Self {
        PhasePoint { x, z: [0.0, 0.0], u }
    }
}

type PhaseFn = dyn Fn(&PhasePoint) -> f64 + Send + Sync;

/// Bounded observable on the suspension.
#[derive(Clone)]
pub struct PhaseObservable {
    name: String,
    f: Arc<PhaseFn>,
    sup_abs: f64,
}

impl fmt::Debug for PhaseObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseObservable")
            .field("name", &self.name)
            .field("sup_abs", &self.sup_abs)
            .finish()
    }
}

impl PhaseObservable {
    pub fn new<F>(name: &str, f: F, sup_abs: f64) -> Self
    where
        F: Fn(&PhasePoint) -> f64 + Send + Sync + 'static,
    {
        PhaseObservable {
            name: name.to_string(),
            f: Arc::new(f),
            sup_abs,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new("const", move |_| c, c.abs())
    }

    /// `cos(2πu/period)`.
    pub fn cos_u(period: f64) -> Self {
        let w = std::f64::consts::TAU / period;
        Self::new("cos_u", move |p| (w * p.u).cos(), 1.0)
    }

    /// `cos(2πu/r̄)·(1 + x)` for a base on `[0, 1)`.
    pub fn mixing_default(mean_roof: f64) -> Self {
        let w = std::f64::consts::TAU / mean_roof;
        Self::new("cos_u_times_1px", move |p| (w * p.u).cos() * (1.0 + p.x), 2.0)
    }

    /// `cos(2πu/r̄)·(1 + z_i)` for fibre component `i` on a unit disk.
    pub fn mixing_fiber(mean_roof: f64, component: usize) -> Self {
        let w = std::f64::consts::TAU / mean_roof;
        let name = if component == 0 {
            "cos_u_times_1pre"
        } else {
            "cos_u_times_1pim"
        };
        Self::new(name, move |p| (w * p.u).cos() * (1.0 + p.z[component]), 2.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    #[inline]
    pub fn eval(&self, p: &PhasePoint) -> f64 {
        (self.f)(p)
    }
}

/// Phase point with its current roof value cached.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Walker {
    pub p: PhasePoint,
    pub r: f64,
}

#[derive(Debug, Clone)]
pub struct SuspensionSemiflow {
    roof: Arc<RoofFunction>,
    skew: Option<Arc<HyperbolicSkewProduct>>,
    density: Arc<InvariantDensity>,
    mean_roof: f64,
    fiber_depth: usize,
}

impl SuspensionSemiflow {
    /// Suspension over the base map of `roof`, with `ν = φ·m`.
    pub fn new(roof: Arc<RoofFunction>, density: Arc<InvariantDensity>) -> Self {
        let mean_roof = density.integrate(&|x| roof_at(&roof, x));
        SuspensionSemiflow {
            roof,
            skew: None,
            density,
            mean_roof,
            fiber_depth: FIBER_DEPTH,
        }
    }

    /// Suspension over a skew product; the roof depends on the base coordinate only.
    pub fn over_skew(
        skew: Arc<HyperbolicSkewProduct>,
        roof: Arc<RoofFunction>,
        density: Arc<InvariantDensity>,
    ) -> Result<Self> {
        if !Arc::ptr_eq(skew.base(), roof.base()) && skew.base().name() != roof.base().name() {
            return Err(Error::InvalidModel(format!(
                "roof is defined over {}, skew product over {}",
                roof.base().name(),
                skew.base().name()
            )));
        }
        let mut s = Self::new(roof, density);
        s.skew = Some(skew);
        Ok(s)
    }

    pub fn with_fiber_depth(mut self, depth: usize) -> Self {
        self.fiber_depth = depth.max(1);
        self
    }

    pub fn base(&self) -> &Arc<ExpandingMarkovMap> {
        self.roof.base()
    }

    pub fn roof(&self) -> &Arc<RoofFunction> {
        &self.roof
    }

    pub fn skew(&self) -> Option<&Arc<HyperbolicSkewProduct>> {
        self.skew.as_ref()
    }

    pub fn density(&self) -> &Arc<InvariantDensity> {
        &self.density
    }

    /// `ν(r)`, which equals `η(r)` over a skew base.
    pub fn mean_roof(&self) -> f64 {
        self.mean_roof
    }

    /// `(F)_t` applied to `p`. A crossing within a relative `1e-12` of the roof is taken,
    /// so periodic orbits close up despite rounding.
    pub fn flow_to(&self, p: &PhasePoint, t: f64) -> Result<PhasePoint> {
        if !(t >= 0.0) {
            return Err(Error::InvalidModel(format!("flow time {t} must be non-negative")));
        }
        let mut w = Walker {
            p: *p,
            r: roof_at(&self.roof, p.x),
        };
        self.advance(&mut w, t)?;
        Ok(w.p)
    }

    /// Moves a walker forward by `t`, recomputing the roof only at crossings.
    #[inline]
    fn advance(&self, w: &mut Walker, t: f64) -> Result<()> {
        let map = self.base();
        w.p.u += t;
        while w.p.u >= w.r - CROSSING_SLACK * w.r.max(1.0) {
            let x = w.p.x;
            let (fx, _) = map.evaluate(x)?;
            w.p.u = (w.p.u - w.r).max(0.0);
            if let Some(s) = &self.skew {
                w.p.z = s.fiber_map(x, w.p.z);
            }
            let k = map.cell_of(fx)?;
            w.p.x = fx;
            w.r = self.roof.value_on_branch(fx, k);
        }
        Ok(())
    }

    /// Fibre coordinate over `x` drawn from `η_x` by a random past of
    /// `fiber_depth` inverse branches.
    fn draw_fiber(&self, skew: &HyperbolicSkewProduct, x: f64, rng: &mut ChaCha8Rng) -> Result<Fiber> {
        let map = self.base();
        let mut cell = map.cell_of(x)?;
        let mut y = x;
        let mut path = Vec::with_capacity(self.fiber_depth);
        let mut weights = Vec::with_capacity(map.len());
        for _ in 0..self.fiber_depth {
            weights.clear();
            let phi = self.density.value(y);
            for m in 0..map.len() {
                if map.allowed(m, cell) {
                    let br = map.branch(m);
                    let w = br.inverse_jacobian(y) * self.density.value(br.inverse(y)) / phi;
                    weights.push((m, w));
                }
            }
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            let mut t = rng.random::<f64>() * total;
            let mut pick = weights[weights.len() - 1].0;
            for &(m, w) in &weights {
                if t < w {
                    pick = m;
                    break;
                }
                t -= w;
            }
            y = map.branch(pick).inverse(y);
            cell = pick;
            path.push(y);
        }
        Ok(path.iter().rev().fold(skew.origin(), |z, &y| skew.fiber_map(y, z)))
    }

    /// One draw from `η̂ = (η × Leb)/η(r)`, or `None` when the base draw hits a boundary.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<PhasePoint> {
        let r_max = self.roof.upper_bound();
        loop {
            let x = self.density.inverse_cdf(rng.random::<f64>());
            let r = match self.roof.value(x) {
                Ok(r) => r,
                Err(_) => return None,
            };
            if rng.random::<f64>() * r_max >= r {
                continue;
            }
            let u = rng.random::<f64>() * r;
            let z = match &self.skew {
                Some(s) => self.draw_fiber(s, x, rng).ok()?,
                None => [0.0, 0.0],
            };
            return Some(PhasePoint { x, z, u });
        }
    }

    /// `count` draws from stream `batch` of the generator seeded by `seed`.
    pub fn sample_batch(&self, count: usize, seed: u64, batch: u64) -> Vec<PhasePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if let Some(p) = self.draw(&mut rng) {
                out.push(p);
            }
        }
        out
    }

    /// `n` independent draws from the invariant probability of the semiflow.
    pub fn sample_invariant(&self, n: usize, seed: u64) -> Vec<PhasePoint> {
        self.sample_batch(n, seed, 0)
    }
}

/// `r(x)` at any point of the domain; boundary points use the cell they open.
fn roof_at(roof: &RoofFunction, x: f64) -> f64 {
    let map = roof.base();
    let k = map.branches().partition_point(|b| b.left() <= x).saturating_sub(1);
    roof.value_on_branch(x, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    fn doubling_flow(roof: Vec<crate::rational::Q>) -> SuspensionSemiflow {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let r = Arc::new(RoofFunction::polynomial(f, roof).unwrap());
        SuspensionSemiflow::new(r, Arc::new(InvariantDensity::uniform(0.0, 1.0, 64)))
    }

    #[test]
    fn flow_examples() {
        let s = doubling_flow(vec![qi(1)]);
        let p = s.flow_to(&PhasePoint::new(0.3, 0.3), 0.4).unwrap();
        assert_eq!(p.x, 0.3);
        assert!((p.u - 0.7).abs() < 1e-15);
        let p = s.flow_to(&PhasePoint::new(0.3, 0.9), 0.2).unwrap();
        assert!((p.x - 0.6).abs() < 1e-15 && (p.u - 0.1).abs() < 1e-15);
        let s = doubling_flow(vec![qi(1), qi(0), qi(1)]);
        let p = s.flow_to(&PhasePoint::new(0.2, 0.0), 26.0 / 5.0).unwrap();
        assert!((p.x - 0.2).abs() < 1e-12 && p.u.abs() < 1e-12, "{p:?}");
        assert!((s.mean_roof() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_crossing_is_an_error() {
        let s = doubling_flow(vec![qi(1)]);
        assert!(matches!(
            s.flow_to(&PhasePoint::new(0.25, 0.5), 0.5),
            Err(Error::BoundaryPoint { .. })
        ));
    }

    #[test]
    fn samples_respect_roof() {
        let s = doubling_flow(vec![qi(1), qi(0), qi(1)]);
        let pts = s.sample_invariant(20_000, 3);
        assert!(pts.iter().all(|p| p.u >= 0.0 && p.u < 1.0 + p.x * p.x));
        // Length-biased base mean: ∫x(1+x²)dx / (4/3) = (3/4)/(4/3) = 9/16.
        let m = pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64;
        assert!((m - 9.0 / 16.0).abs() < 0.01, "{m}");
    }
}
