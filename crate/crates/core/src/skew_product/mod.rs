//! Hyperbolic skew products `F̂(x, z) = (f x, G(x, z))` with contracting
//! two-dimensional disk fibres.

mod disintegration;

pub use disintegration::{Disintegration, EtaIntegral, EtaValue, SandwichEstimate, SkewObservable, SmoothnessReport};

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov_maps::ExpandingMarkovMap;

/// A point of the fibre disk.
pub type Fiber = [f64; 2];

#[inline]
pub(crate) fn dist(a: Fiber, b: Fiber) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// User-supplied fibre map `G(x, z)`.
pub trait FiberMap: Send + Sync + fmt::Debug {
    fn apply(&self, x: f64, z: Fiber) -> Fiber;
}

#[derive(Debug, Clone)]
pub enum FiberFamily {
    /// `z/c + ρ·(cos 2πx, sin 2πx)` with `x` the normalised base coordinate.
    Solenoid {
        contraction: f64,
        offset: f64,
    },
    /// `s·z`.
    Scaled {
        factor: f64,
    },
    Custom(Arc<dyn FiberMap>),
}

impl FiberFamily {
    /// `G(x, z) = scale·z + offset(x)` when the family is affine in `z`.
    #[inline]
    pub fn affine_parts(&self, t: f64) -> Option<(f64, Fiber)> {
        match self {
            FiberFamily::Solenoid { contraction, offset } => {
                let (s, c) = (TAU * t).sin_cos();
                Some((1.0 / contraction, [offset * c, offset * s]))
            }
            FiberFamily::Scaled { factor } => Some((*factor, [0.0, 0.0])),
            FiberFamily::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperbolicSkewProduct {
    base: Arc<ExpandingMarkovMap>,
    fiber: FiberFamily,
    radius: f64,
    origin: Fiber,
    kappa: f64,
}

/// Outcome of [`HyperbolicSkewProduct::validate_contraction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub kappa: f64,
    pub pairs: usize,
    pub worst_ratio: f64,
    pub violations: usize,
    /// Largest `|G(x, z)|` over the probes, relative to the fibre radius.
    pub worst_image_radius: f64,
    pub invariance_violations: usize,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.invariance_violations == 0
    }
}

impl HyperbolicSkewProduct {
    /// Skew product over `base` with fibre disk of `radius` centred at the origin.
    pub fn new(base: Arc<ExpandingMarkovMap>, fiber: FiberFamily, radius: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidModel(format!("κ = {kappa} outside (0, 1)")));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidModel(format!("fiber radius {radius} must be positive")));
        }
        Ok(HyperbolicSkewProduct {
            base,
            fiber,
            radius,
            origin: [0.0, 0.0],
            kappa,
        })
    }

    /// Moves the point `0 ∈ Ω` used to seed fibre orbits. It must lie in the disk.
    pub fn with_origin(mut self, origin: Fiber) -> Result<Self> {
        if origin[0].hypot(origin[1]) > self.radius {
            return Err(Error::InvalidModel("origin outside the fiber disk".into()));
        }
        self.origin = origin;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn base(&self) -> &Arc<ExpandingMarkovMap> {
        &self.base
    }

    pub fn fiber(&self) -> &FiberFamily {
        &self.fiber
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn origin(&self) -> Fiber {
        self.origin
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    fn normalised(&self, x: f64) -> f64 {
        let (lo, hi) = self.base.domain();
        (x - lo) / (hi - lo)
    }

    /// `G(x, z)` without domain checks.
    #[inline]
    pub fn fiber_map(&self, x: f64, z: Fiber) -> Fiber {
        match &self.fiber {
            FiberFamily::Custom(g) => g.apply(x, z),
            fam => {
                let (s, b) = fam.affine_parts(self.normalised(x)).expect("affine family");
                [s * z[0] + b[0], s * z[1] + b[1]]
            }
        }
    }

    /// Affine decomposition of `G(x, ·)` if available.
    #[inline]
    pub(crate) fn affine_parts(&self, x: f64) -> Option<(f64, Fiber)> {
        self.fiber.affine_parts(self.normalised(x))
    }

    /// `F̂(x, z) = (f x, G(x, z))`.
    pub fn apply(&self, x: f64, z: Fiber) -> Result<(f64, Fiber)> {
        let (fx, _) = self.base.evaluate(x)?;
        let w = self.fiber_map(x, z);
        let norm = dist(w, [0.0, 0.0]);
        if norm > self.radius * (1.0 + 1e-12) {
            return Err(Error::FiberEscape {
                norm,
                radius: self.radius,
            });
        }
        Ok((fx, w))
    }

    /// Samples same-fibre pairs and reports the worst contraction ratio in the
    /// product metric, plus fibre invariance on the disk boundary.
    pub fn validate_contraction(&self, pairs: usize) -> ContractionReport {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0_47_ac_75);
        let (lo, hi) = self.base.domain();
        let r = self.radius;
        let disk = |rng: &mut ChaCha8Rng| -> Fiber {
            let rho = r * rng.random::<f64>().sqrt();
            let a = TAU * rng.random::<f64>();
            [rho * a.cos(), rho * a.sin()]
        };
        let mut worst_ratio: f64 = 0.0;
        let mut violations = 0;
        let mut worst_image: f64 = 0.0;
        let mut invariance_violations = 0;
        let mut done = 0;
        while done < pairs {
            let x = lo + (hi - lo) * rng.random::<f64>();
            if self.base.cell_of(x).is_err() {
                continue;
            }
            let z1 = disk(&mut rng);
            let z2 = disk(&mut rng);
            let d0 = dist(z1, z2);
            if d0 == 0.0 {
                continue;
            }
            let ratio = dist(self.fiber_map(x, z1), self.fiber_map(x, z2)) / d0;
            worst_ratio = worst_ratio.max(ratio);
            if ratio > self.kappa * (1.0 + 1e-9) {
                violations += 1;
            }
            let a = TAU * rng.random::<f64>();
            let edge = [r * a.cos(), r * a.sin()];
            for z in [z1, edge] {
                let img = dist(self.fiber_map(x, z), [0.0, 0.0]) / r;
                worst_image = worst_image.max(img);
                if img > 1.0 + 1e-12 {
                    invariance_violations += 1;
                }
            }
            done += 1;
        }
        ContractionReport {
            kappa: self.kappa,
            pairs,
            worst_ratio,
            violations,
            worst_image_radius: worst_image,
            invariance_violations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solenoid() -> HyperbolicSkewProduct {
        HyperbolicSkewProduct::new(
            Arc::new(ExpandingMarkovMap::doubling()),
            FiberFamily::Solenoid {
                contraction: 20.0,
                offset: 0.25,
            },
            1.0,
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn apply_at_zero_and_half() {
        let s = solenoid();
        assert_eq!(s.apply(0.0, [0.0, 0.0]).unwrap(), (0.0, [0.25, 0.0]));
        let (x, z) = s.apply(0.75, [0.0, 0.0]).unwrap();
        assert_eq!(x, 0.5);
        assert!((z[0] - 0.0).abs() < 1e-16 && (z[1] + 0.25).abs() < 1e-16);
        assert!(matches!(s.apply(0.5, [0.0, 0.0]), Err(Error::BoundaryPoint { .. })));
        let z = s.fiber_map(0.5, [0.0, 0.0]);
        assert_eq!(z[0], -0.25);
        assert!(z[1].abs() < 1e-16);
    }

    #[test]
    fn contraction_ratios() {
        let rep = solenoid().validate_contraction(10_000);
        assert!(rep.passed());
        assert!((rep.worst_ratio - 0.05).abs() < 1e-12);
        assert!(rep.worst_image_radius <= 0.3 + 1e-12);
        let tight = solenoid().with_kappa(1.0 / 30.0).validate_contraction(1000);
        assert_eq!(tight.violations, 1000);
        let half = HyperbolicSkewProduct::new(
            Arc::new(ExpandingMarkovMap::doubling()),
            FiberFamily::Scaled { factor: 0.5 },
            1.0,
            0.5,
        )
        .unwrap()
        .validate_contraction(1000);
        assert!((half.worst_ratio - 0.5).abs() < 1e-15);
        assert!(half.passed());
    }

    #[test]
    fn escaping_fiber_is_reported() {
        let s = HyperbolicSkewProduct::new(
            Arc::new(ExpandingMarkovMap::doubling()),
            FiberFamily::Solenoid {
                contraction: 2.0,
                offset: 0.9,
            },
            1.0,
            0.5,
        )
        .unwrap();
        assert!(matches!(s.apply(0.1, [1.0, 0.0]), Err(Error::FiberEscape { .. })));
        assert!(s.validate_contraction(100).invariance_violations > 0);
    }
}
