//! The solid-torus solenoid `(θ, z) ↦ (dθ, z/c + ρ·e(θ))`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov_maps::ExpandingMarkovMap;
use crate::par;
use crate::skew_product::{ContractionReport, Fiber, FiberFamily, HyperbolicSkewProduct};

/// Parameters `(d, c, ρ, R)` of a solenoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolenoidParams {
    pub degree: usize,
    pub contraction: f64,
    pub offset: f64,
    pub fiber_radius: f64,
}

impl Default for SolenoidParams {
    fn default() -> Self {
        SolenoidParams {
            degree: 2,
            contraction: 20.0,
            offset: 0.25,
            fiber_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolenoidModel {
    params: SolenoidParams,
    skew: Arc<HyperbolicSkewProduct>,
}

/// Return-map domination product `‖DF̂|fiber‖·sup‖DF̂‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationReport {
    pub fiber_norm: f64,
    /// Upper bound for `sup‖DF̂‖²` over the probe cells.
    pub norm_sq: f64,
    pub product: f64,
    pub probes: usize,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.product < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorPoint {
    pub theta: f64,
    pub z: Fiber,
}

/// Closed interval with outward rounding by a few ulps.
#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn widen(self) -> Self {
        let e = 4.0 * f64::EPSILON;
        Interval {
            lo: self.lo - e * self.lo.abs().max(f64::MIN_POSITIVE),
            hi: self.hi + e * self.hi.abs().max(f64::MIN_POSITIVE),
        }
    }

    fn sq_upper(self) -> f64 {
        self.lo.abs().max(self.hi.abs()).powi(2) * (1.0 + 4.0 * f64::EPSILON)
    }
}

/// Enclosure of `sin` on `[a, b]`, including interior extrema.
fn sin_range(a: f64, b: f64) -> Interval {
    let (sa, sb) = (a.sin(), b.sin());
    let mut lo = sa.min(sb);
    let mut hi = sa.max(sb);
    let first = ((a - PI / 2.0) / PI).ceil() as i64;
    let last = ((b - PI / 2.0) / PI).floor() as i64;
    for k in first..=last {
        if k.rem_euclid(2) == 0 {
            hi = 1.0;
        } else {
            lo = -1.0;
        }
    }
    Interval { lo, hi }.widen()
}

fn cos_range(a: f64, b: f64) -> Interval {
    sin_range(a + PI / 2.0, b + PI / 2.0)
}

impl SolenoidModel {
    /// Checks invariance `R/c + ρ ≤ R` and disjointness of the `d` image disks,
    /// `2ρ·sin(π/d) > 2R/c`.
    pub fn build(params: SolenoidParams) -> Result<Self> {
        let SolenoidParams {
            degree,
            contraction: c,
            offset: rho,
            fiber_radius: r,
        } = params;
        if degree < 2 {
            return Err(Error::GeometryViolation(format!("degree {degree} must be at least 2")));
        }
        if !(c > 1.0) {
            return Err(Error::GeometryViolation(format!("contraction {c} must exceed 1")));
        }
        if !(rho > 0.0 && rho < r) {
            return Err(Error::GeometryViolation(format!("offset {rho} must lie in (0, {r})")));
        }
        if r / c + rho > r {
            return Err(Error::GeometryViolation(format!(
                "invariance: R/c + ρ = {} > R = {r}",
                r / c + rho
            )));
        }
        let gap = 2.0 * rho * (PI / degree as f64).sin();
        if !(gap > 2.0 * r / c) {
            return Err(Error::GeometryViolation(format!(
                "injectivity: 2ρ·sin(π/d) = {gap} ≤ 2R/c = {}",
                2.0 * r / c
            )));
        }
        let skew = HyperbolicSkewProduct::new(
            Arc::new(ExpandingMarkovMap::circle(degree)),
            FiberFamily::Solenoid {
                contraction: c,
                offset: rho,
            },
            r,
            1.0 / c,
        )?;
        Ok(SolenoidModel {
            params,
            skew: Arc::new(skew),
        })
    }

    pub fn params(&self) -> SolenoidParams {
        self.params
    }

    pub fn skew(&self) -> &Arc<HyperbolicSkewProduct> {
        &self.skew
    }

    /// Largest `|z|` any image point can have.
    pub fn image_radius(&self) -> f64 {
        self.params.fiber_radius / self.params.contraction + self.params.offset
    }

    pub fn validate(&self, pairs: usize) -> ContractionReport {
        self.skew.validate_contraction(pairs)
    }

    /// Bounds `‖DF̂‖²` for the block `[[d, 0], [∂G/∂θ, I/c]]` by
    /// `d² + |∂G/∂θ|² + 1/c²`, with `|∂G/∂θ|²` enclosed in interval arithmetic
    /// on `probes` cells of the circle.
    pub fn check_domination(&self, probes: usize) -> DominationReport {
        let probes = probes.max(1);
        let SolenoidParams {
            degree,
            contraction: c,
            offset: rho,
            ..
        } = self.params;
        let d = degree as f64;
        let amp = TAU * rho;
        let mut worst: f64 = 0.0;
        for i in 0..probes {
            let a = TAU * i as f64 / probes as f64;
            let b = TAU * (i + 1) as f64 / probes as f64;
            let g1 = sin_range(a, b);
            let g2 = cos_range(a, b);
            let g_sq = amp * amp * (g1.sq_upper() + g2.sq_upper());
            worst = worst.max(d * d + g_sq + 1.0 / (c * c));
        }
        let norm_sq = worst * (1.0 + 4.0 * f64::EPSILON);
        let fiber_norm = 1.0 / c;
        DominationReport {
            fiber_norm,
            norm_sq,
            product: fiber_norm * norm_sq * (1.0 + 2.0 * f64::EPSILON),
            probes,
        }
    }

    /// `n` points of `F̂^{burn_in}` applied to uniform random points of the
    /// solid torus. Each point is built backwards: a uniform `θ` and a random
    /// past of `burn_in` inverse branches, so the base coordinate never loses
    /// precision to repeated doubling.
    pub fn attractor_sample(&self, n: usize, burn_in: usize, seed: u64) -> Vec<AttractorPoint> {
        let d = self.params.degree;
        let r = self.params.fiber_radius;
        par::map_range(n, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let theta = rng.random::<f64>();
            let mut past = Vec::with_capacity(burn_in);
            let mut t = theta;
            for _ in 0..burn_in {
                t = (t + rng.random_range(0..d) as f64) / d as f64;
                past.push(t);
            }
            let rad = r * rng.random::<f64>().sqrt();
            let ang = TAU * rng.random::<f64>();
            let z0 = [rad * ang.cos(), rad * ang.sin()];
            let z = past.iter().rev().fold(z0, |z, &t| self.skew.fiber_map(t, z));
            AttractorPoint { theta, z }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(degree: usize, contraction: f64, offset: f64) -> SolenoidParams {
        SolenoidParams {
            degree,
            contraction,
            offset,
            fiber_radius: 1.0,
        }
    }

    #[test]
    fn geometry_checks() {
        let m = SolenoidModel::build(SolenoidParams::default()).unwrap();
        assert!((m.image_radius() - 0.3).abs() < 1e-15);
        assert_eq!(m.skew().kappa(), 0.05);
        assert!(matches!(
            SolenoidModel::build(params(2, 2.0, 0.9)),
            Err(Error::GeometryViolation(s)) if s.starts_with("invariance")
        ));
        assert!(matches!(
            SolenoidModel::build(params(2, 5.0, 0.15)),
            Err(Error::GeometryViolation(s)) if s.starts_with("injectivity")
        ));
    }

    #[test]
    fn domination_values() {
        let good = SolenoidModel::build(SolenoidParams::default())
            .unwrap()
            .check_domination(1024);
        let exact = (4.0 + (PI / 2.0).powi(2) + 1.0 / 400.0) / 20.0;
        assert!(good.product >= exact && good.product < exact + 1e-3, "{good:?}");
        assert!(good.passed());
        let bad = SolenoidModel::build(params(2, 10.0, 0.5))
            .unwrap()
            .check_domination(1024);
        assert!(bad.product > 1.38 && !bad.passed());
    }

    #[test]
    fn sin_enclosure_covers_extrema() {
        let i = sin_range(1.0, 2.0);
        assert!(i.hi >= 1.0 && i.lo <= 1.0f64.sin());
        let j = sin_range(4.0, 5.0);
        assert!(j.lo <= -1.0);
        let k = cos_range(-0.1, 0.1);
        assert!(k.hi >= 1.0);
    }

    #[test]
    fn samples_stay_inside_image() {
        let m = SolenoidModel::build(SolenoidParams::default()).unwrap();
        let pts = m.attractor_sample(2000, 30, 5);
        assert!(pts.iter().all(|p| p.z[0].hypot(p.z[1]) <= m.image_radius() + 1e-15));
    }
}
