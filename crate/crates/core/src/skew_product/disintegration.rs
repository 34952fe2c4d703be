//! Fibre measures `η_x(v) = lim (Lⁿ vₙ)(x)` with `vₙ = v∘F̂ⁿ(·, 0)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Fiber, HyperbolicSkewProduct};
use crate::error::{Error, Result};
use crate::par;
use crate::quad;
use crate::transfer_operator::InvariantDensity;

/// Leaf budget for one inverse-branch tree.
pub const LEAF_BUDGET: usize = 2_000_000;

/// Subtrees are handed to the worker pool once the frontier reaches this size.
const FRONTIER: usize = 64;

type ObsFn = dyn Fn(f64, Fiber) -> f64 + Send + Sync;

/// An observable `v(x, z)` on the product together with the constants the
/// error bounds need.
#[derive(Clone)]
pub struct SkewObservable {
    name: String,
    f: Arc<ObsFn>,
    fiber_lipschitz: f64,
    sup_abs: f64,
    sup_grad: f64,
}

impl fmt::Debug for SkewObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SkewObservable")
            .field("name", &self.name)
            .field("fiber_lipschitz", &self.fiber_lipschitz)
            .field("sup_abs", &self.sup_abs)
            .field("sup_grad", &self.sup_grad)
            .finish()
    }
}

impl SkewObservable {
    /// `fiber_lipschitz` bounds `|v(x, z) − v(x, z')| / |z − z'|`; `sup_abs` and
    /// `sup_grad` bound `|v|` and `‖Dv‖` on the product.
    pub fn new<F>(name: &str, f: F, fiber_lipschitz: f64, sup_abs: f64, sup_grad: f64) -> Self
    where
        F: Fn(f64, Fiber) -> f64 + Send + Sync + 'static,
    {
        SkewObservable {
            name: name.to_string(),
            f: Arc::new(f),
            fiber_lipschitz,
            sup_abs,
            sup_grad,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new("const", move |_, _| c, 0.0, c.abs(), 0.0)
    }

    /// `Re z` on a fibre disk of the given radius.
    pub fn re_z(radius: f64) -> Self {
        Self::new("re_z", |_, z| z[0], 1.0, radius, 1.0)
    }

    pub fn im_z(radius: f64) -> Self {
        Self::new("im_z", |_, z| z[1], 1.0, radius, 1.0)
    }

    /// `|z|²` on a fibre disk of the given radius.
    pub fn norm_sq(radius: f64) -> Self {
        Self::new(
            "norm_sq",
            |_, z| z[0] * z[0] + z[1] * z[1],
            2.0 * radius,
            radius * radius,
            2.0 * radius,
        )
    }

    /// `Re(z²)` on a fibre disk of the given radius.
    pub fn re_z_sq(radius: f64) -> Self {
        Self::new(
            "re_z_sq",
            |_, z| z[0] * z[0] - z[1] * z[1],
            2.0 * radius,
            radius * radius,
            2.0 * radius,
        )
    }

    /// `cos 2πkx`, independent of the fibre.
    pub fn base_cos(k: u32) -> Self {
        let w = std::f64::consts::TAU * k as f64;
        Self::new("base_cos", move |x, _| (w * x).cos(), 0.0, 1.0, w)
    }

    /// A fibre-independent observable.
    pub fn base<F>(name: &str, f: F, sup_abs: f64, sup_grad: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, move |x, _| f(x), 0.0, sup_abs, sup_grad)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64, z: Fiber) -> f64 {
        (self.f)(x, z)
    }

    pub fn fiber_lipschitz(&self) -> f64 {
        self.fiber_lipschitz
    }

    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    pub fn sup_grad(&self) -> f64 {
        self.sup_grad
    }

    /// `v∘F̂`. Points on partition boundaries use the branch of the cell they open.
    pub fn compose(&self, skew: &Arc<HyperbolicSkewProduct>) -> Self {
        let v = self.f.clone();
        let s = skew.clone();
        let lip = self.fiber_lipschitz * skew.kappa();
        SkewObservable {
            name: format!("{}∘F", self.name),
            f: Arc::new(move |x, z| {
                let base = s.base();
                let fx = match base.evaluate(x) {
                    Ok((y, _)) => y,
                    Err(_) => base
                        .branches()
                        .iter()
                        .find(|b| b.contains(x))
                        .map_or(f64::NAN, |b| b.forward(x)),
                };
                v(fx, s.fiber_map(x, z))
            }),
            fiber_lipschitz: lip,
            sup_abs: self.sup_abs,
            sup_grad: f64::NAN,
        }
    }
}

/// `(Lⁿ vₙ)(x)` with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaValue {
    pub x: f64,
    pub value: f64,
    /// `(Lⁿ 1)(x)`, equal to 1 when the density is exactly invariant.
    pub mass: f64,
    /// `κⁿ·R·Lip(v)`.
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaIntegral {
    pub value: f64,
    pub truncation_bound: f64,
    /// Difference against the same rule on half as many panels.
    pub quadrature_error: f64,
}

impl EtaIntegral {
    pub fn error_bound(&self) -> f64 {
        self.truncation_bound + self.quadrature_error
    }
}

/// Monte Carlo estimate of `∫(vₙ)₋ dν` and `∫(vₙ)₊ dν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichEstimate {
    pub depth: usize,
    pub samples: usize,
    pub lower: f64,
    pub upper: f64,
    /// Mean of `(vₙ)₊ − (vₙ)₋`, accumulated per sample.
    pub gap: f64,
    pub std_error: f64,
}

impl SandwichEstimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Half-gap plus three standard errors.
    pub fn error_bound(&self) -> f64 {
        0.5 * self.gap + 3.0 * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessReport {
    pub grid: usize,
    pub step: f64,
    pub max_slope: f64,
    pub at: f64,
    /// `sup|v| + sup‖Dv‖`.
    pub scale: f64,
}

impl SmoothnessReport {
    /// Empirical constant `max_slope / scale`.
    pub fn constant(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_slope / self.scale
        } else {
            0.0
        }
    }

    pub fn passes(&self, c: f64) -> bool {
        self.max_slope <= c * self.scale
    }
}

/// Truncated disintegration at a fixed depth.
#[derive(Debug, Clone)]
pub struct Disintegration {
    skew: Arc<HyperbolicSkewProduct>,
    depth: usize,
    density: Arc<InvariantDensity>,
    scale: Option<f64>,
}

#[derive(Clone)]
struct Node {
    y: f64,
    cell: usize,
    level: usize,
    jac: f64,
    acc: Fiber,
    path: Vec<f64>,
}

impl HyperbolicSkewProduct {
    /// Prepares `η_x` at `depth` with the base density `φ` of the acim.
    pub fn disintegrate(self: &Arc<Self>, depth: usize, density: Arc<InvariantDensity>) -> Result<Disintegration> {
        if depth == 0 {
            return Err(Error::InvalidModel("disintegration depth must be at least 1".into()));
        }
        let leaves = max_leaves(self, depth);
        if leaves > LEAF_BUDGET as f64 {
            return Err(Error::DepthOverflow {
                depth,
                nodes: leaves,
                budget: LEAF_BUDGET,
            });
        }
        let scale = match self.fiber() {
            super::FiberFamily::Custom(_) => None,
            fam => fam.affine_parts(0.0).map(|(s, _)| s),
        };
        Ok(Disintegration {
            skew: self.clone(),
            depth,
            density,
            scale,
        })
    }
}

/// Largest number of admissible inverse-branch words of length `depth` ending in one cell.
fn max_leaves(skew: &HyperbolicSkewProduct, depth: usize) -> f64 {
    let map = skew.base();
    let n = map.len();
    let mut count = vec![1.0f64; n];
    for _ in 0..depth {
        count = (0..n)
            .map(|j| (0..n).filter(|&k| map.allowed(k, j)).map(|k| count[k]).sum())
            .collect();
    }
    count.into_iter().fold(0.0, f64::max)
}

impl Disintegration {
    pub fn skew(&self) -> &Arc<HyperbolicSkewProduct> {
        &self.skew
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn density(&self) -> &Arc<InvariantDensity> {
        &self.density
    }

    /// `κⁿ·R·Lip(v)`, or the exact fibre contraction when the family is affine.
    pub fn truncation_bound(&self, v: &SkewObservable) -> f64 {
        let rate = self.scale.map_or(self.skew.kappa(), f64::abs);
        rate.powi(self.depth as i32) * self.skew.radius() * v.fiber_lipschitz()
    }

    fn children(&self, node: &Node) -> impl Iterator<Item = Node> + '_ {
        let map = self.skew.base();
        let (y, cell, level, jac, acc) = (node.y, node.cell, node.level, node.jac, node.acc);
        let generic = self.scale.is_none();
        let path = if generic { node.path.clone() } else { Vec::new() };
        (0..map.len()).filter(move |&m| map.allowed(m, cell)).map(move |m| {
            let br = map.branch(m);
            let y1 = br.inverse(y);
            let mut acc1 = acc;
            if let Some(s) = self.scale {
                let (_, b) = self.skew.affine_parts(y1).expect("affine family");
                let p = s.powi(level as i32);
                acc1 = [acc[0] + p * b[0], acc[1] + p * b[1]];
            }
            let mut path1 = path.clone();
            if generic {
                path1.push(y1);
            }
            Node {
                y: y1,
                cell: m,
                level: level + 1,
                jac: jac * br.inverse_jacobian(y),
                acc: acc1,
                path: path1,
            }
        })
    }

    /// `(Σ weight·v, Σ weight)` over the leaves below `node`.
    fn subtree(&self, node: Node, x: f64, phi_x: f64, v: &SkewObservable) -> (f64, f64) {
        if node.level == self.depth {
            let w = node.jac * self.density.value(node.y) / phi_x;
            let o = self.skew.origin();
            let z = match self.scale {
                Some(s) => {
                    let p = s.powi(self.depth as i32);
                    [node.acc[0] + p * o[0], node.acc[1] + p * o[1]]
                }
                None => node.path.iter().rev().fold(o, |z, &y| self.skew.fiber_map(y, z)),
            };
            return (w * v.eval(x, z), w);
        }
        let mut sum = 0.0;
        let mut mass = 0.0;
        let kids: Vec<Node> = self.children(&node).collect();
        for child in kids {
            let (s, m) = self.subtree(child, x, phi_x, v);
            sum += s;
            mass += m;
        }
        (sum, mass)
    }

    fn root(&self, x: f64) -> Result<(Node, f64)> {
        let cell = self.skew.base().cell_of(x)?;
        let phi_x = self.density.value(x);
        Ok((
            Node {
                y: x,
                cell,
                level: 0,
                jac: 1.0,
                acc: [0.0, 0.0],
                path: Vec::new(),
            },
            phi_x,
        ))
    }

    fn finish(&self, x: f64, sum: f64, mass: f64, v: &SkewObservable) -> EtaValue {
        EtaValue {
            x,
            value: sum,
            mass,
            error_bound: self.truncation_bound(v),
        }
    }

    /// `η_x(v)`, spreading inverse-branch subtrees over the worker pool.
    pub fn eval(&self, x: f64, v: &SkewObservable) -> Result<EtaValue> {
        let (root, phi_x) = self.root(x)?;
        let mut frontier = vec![root];
        while frontier.len() < FRONTIER && frontier[0].level < self.depth {
            frontier = frontier.iter().flat_map(|n| self.children(n)).collect();
        }
        let parts = par::map(&frontier, |n| self.subtree(n.clone(), x, phi_x, v));
        let (sum, mass) = parts.iter().fold((0.0, 0.0), |(s, m), &(a, b)| (s + a, m + b));
        Ok(self.finish(x, sum, mass, v))
    }

    /// `η_x(v)` for many points, parallel over points.
    pub fn eval_many(&self, xs: &[f64], v: &SkewObservable) -> Result<Vec<EtaValue>> {
        par::map(xs, |&x| {
            let (root, phi_x) = self.root(x)?;
            let (sum, mass) = self.subtree(root, x, phi_x, v);
            Ok(self.finish(x, sum, mass, v))
        })
        .into_iter()
        .collect()
    }

    /// `η_x(v)` on `grid` cell midpoints of the base domain.
    pub fn profile(&self, v: &SkewObservable, grid: usize) -> Result<Vec<EtaValue>> {
        let (lo, hi) = self.skew.base().domain();
        let xs: Vec<f64> = (0..grid)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / grid as f64)
            .collect();
        self.eval_many(&xs, v)
    }

    fn quadrature(&self, v: &SkewObservable, panels: usize) -> Result<f64> {
        let map = self.skew.base();
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for br in map.branches() {
            let h = (br.right() - br.left()) / panels as f64;
            for p in 0..panels {
                let a = br.left() + h * p as f64;
                for (x, w) in quad::gauss8_nodes(a, a + h) {
                    xs.push(x);
                    ws.push(w);
                }
            }
        }
        let vals = self.eval_many(&xs, v)?;
        Ok(vals
            .iter()
            .zip(&ws)
            .map(|(e, w)| w * self.density.value(e.x) * e.value)
            .sum())
    }

    /// `η(v) = ∫ η_x(v) dν(x)` by Gauss–Legendre on `panels` panels per cell.
    pub fn eta_integral(&self, v: &SkewObservable, panels: usize) -> Result<EtaIntegral> {
        let panels = panels.max(2);
        let fine = self.quadrature(v, panels)?;
        let coarse = self.quadrature(v, panels / 2)?;
        Ok(EtaIntegral {
            value: fine,
            truncation_bound: self.truncation_bound(v),
            quadrature_error: (fine - coarse).abs(),
        })
    }

    /// Direct estimate of `η(v)` from the ball enclosure of `F̂ⁿ(x, Ω)` for
    /// `x ∼ ν`, without the disintegration.
    pub fn sandwich(&self, v: &SkewObservable, samples: usize, seed: u64) -> SandwichEstimate {
        let skew = &self.skew;
        let map = skew.base();
        let rate = self.scale.map_or(skew.kappa(), f64::abs);
        let radius = rate.powi(self.depth as i32) * skew.radius();
        let half = v.fiber_lipschitz() * radius;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lower = 0.0;
        let mut upper = 0.0;
        let mut gap = 0.0;
        let mut mids = Vec::with_capacity(samples);
        while mids.len() < samples {
            let mut x = self.density.inverse_cdf(rng.random::<f64>());
            let mut c: Fiber = [0.0, 0.0];
            let mut ok = true;
            for _ in 0..self.depth {
                match map.evaluate(x) {
                    Ok((fx, _)) => {
                        c = skew.fiber_map(x, c);
                        x = fx;
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let mid = v.eval(x, c);
            lower += mid - half;
            upper += mid + half;
            gap += 2.0 * half;
            mids.push(mid);
        }
        let n = samples as f64;
        let mean = mids.iter().sum::<f64>() / n;
        let var = mids.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        SandwichEstimate {
            depth: self.depth,
            samples,
            lower: lower / n,
            upper: upper / n,
            gap: gap / n,
            std_error: (var / n).sqrt(),
        }
    }

    /// Largest `|η_{x+h}(v) − η_x(v)|/h` over `grid` points. Each difference is
    /// taken inside one partition cell.
    pub fn smoothness_probe(&self, v: &SkewObservable, grid: usize, h: f64) -> Result<SmoothnessReport> {
        let map = self.skew.base();
        let (lo, hi) = map.domain();
        let mut pts = Vec::with_capacity(2 * grid);
        for i in 0..grid {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / grid as f64;
            let k = map.cell_of(x)?;
            let (a, b) = if map.cell_of(x + h).ok() == Some(k) {
                (x, x + h)
            } else {
                (x - h, x)
            };
            pts.push(a);
            pts.push(b);
        }
        let vals = self.eval_many(&pts, v)?;
        let mut max_slope: f64 = 0.0;
        let mut at = pts[0];
        for pair in vals.chunks(2) {
            let slope = (pair[1].value - pair[0].value).abs() / (pair[1].x - pair[0].x);
            if slope > max_slope {
                max_slope = slope;
                at = pair[0].x;
            }
        }
        Ok(SmoothnessReport {
            grid,
            step: h,
            max_slope,
            at,
            scale: v.sup_abs() + v.sup_grad(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_maps::ExpandingMarkovMap;
    use crate::skew_product::FiberFamily;

    fn solenoid(depth: usize) -> Disintegration {
        let skew = Arc::new(
            HyperbolicSkewProduct::new(
                Arc::new(ExpandingMarkovMap::doubling()),
                FiberFamily::Solenoid {
                    contraction: 20.0,
                    offset: 0.25,
                },
                1.0,
                0.05,
            )
            .unwrap(),
        );
        skew.disintegrate(depth, Arc::new(InvariantDensity::uniform(0.0, 1.0, 1)))
            .unwrap()
    }

    #[test]
    fn probability_and_re_z() {
        let d = solenoid(12);
        for x in [0.1, 0.3, 0.77] {
            let one = d.eval(x, &SkewObservable::constant(1.0)).unwrap();
            assert!((one.value - 1.0).abs() < 1e-12);
            let re = d.eval(x, &SkewObservable::re_z(1.0)).unwrap();
            assert!(re.value.abs() < 1e-12, "{}", re.value);
        }
    }

    #[test]
    fn parallel_and_sequential_paths_agree() {
        let d = solenoid(10);
        let v = SkewObservable::norm_sq(1.0);
        let a = d.eval(0.37, &v).unwrap();
        let b = d.eval_many(&[0.37], &v).unwrap()[0];
        assert!((a.value - b.value).abs() < 1e-15);
        // |z|² averages 1/16 + 1/(16·400) + ... over the two-point tree.
        assert!(a.value > 0.0625 && a.value < 0.0627);
    }

    #[test]
    fn overflow_is_reported() {
        let skew = solenoid(1).skew.clone();
        let err = skew
            .disintegrate(21, Arc::new(InvariantDensity::uniform(0.0, 1.0, 1)))
            .unwrap_err();
        assert!(matches!(err, Error::DepthOverflow { depth: 21, .. }));
        assert!(skew
            .disintegrate(20, Arc::new(InvariantDensity::uniform(0.0, 1.0, 1)))
            .is_ok());
    }
}
