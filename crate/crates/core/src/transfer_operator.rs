//! Transfer operator of the base map, its Ulam discretisation and the
//! absolutely continuous invariant density.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov_maps::ExpandingMarkovMap;
use crate::par;
use crate::quad;

/// `(L_m v)(x) = Σ_h |h'(x)| v(h(x))` over the inverse branches defined at `x`.
pub fn apply_exact(map: &ExpandingMarkovMap, v: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    let j = map.cell_of(x)?;
    let mut s = 0.0;
    for (k, br) in map.branches().iter().enumerate() {
        if map.allowed(k, j) {
            s += br.inverse_jacobian(x) * v(br.inverse(x));
        }
    }
    Ok(s)
}

/// Transfer operator with respect to the invariant measure:
/// `L_ν v = L_m(vφ)/φ`.
pub fn apply_invariant(
    map: &ExpandingMarkovMap,
    density: &InvariantDensity,
    v: &dyn Fn(f64) -> f64,
    x: f64,
) -> Result<f64> {
    let num = apply_exact(map, &|y| v(y) * density.value(y), x)?;
    Ok(num / density.value(x))
}

/// Ulam matrix `M_ij = m(bin_i ∩ f⁻¹ bin_j) / m(bin_i)` in sparse row form.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    map: Arc<ExpandingMarkovMap>,
    lo: f64,
    width: f64,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl UlamOperator {
    /// Assembles the matrix on `bins` equal cells. The bins must refine the
    /// Markov partition; entries come from exact interval intersections
    /// pulled back through the branch inverses.
    pub fn build(map: &Arc<ExpandingMarkovMap>, bins: usize) -> Result<Self> {
        let (lo, hi) = map.domain();
        let len = hi - lo;
        for b in map.breakpoints() {
            let t = (b - lo) / len * bins as f64;
            if bins < map.len() || (t - t.round()).abs() > 1e-9 {
                return Err(Error::BinMisalignment { bins, breakpoint: b });
            }
        }
        if bins < map.len() {
            return Err(Error::BinMisalignment { bins, breakpoint: hi });
        }
        let width = len / bins as f64;
        let edge = |i: usize| lo + width * i as f64;
        let rows: Vec<Vec<(usize, f64)>> = par::map_range(bins, |i| {
            let (a, b) = (edge(i), edge(i + 1));
            let k = map.cell_of(0.5 * (a + b)).expect("bin midpoints lie inside cells");
            let br = map.branch(k);
            let (ya, yb) = {
                let (u, v) = (br.forward(a), br.forward(b));
                if u <= v {
                    (u, v)
                } else {
                    (v, u)
                }
            };
            let j0 = (((ya - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            let j1 = (((yb - lo) / width).ceil().max(1.0) as usize).min(bins);
            let mut row = Vec::with_capacity(j1 - j0);
            for j in j0..j1 {
                let s = ya.max(edge(j));
                let t = yb.min(edge(j + 1));
                if t > s {
                    let (p, q) = br.pull(s, t);
                    let w = (q - p) / width;
                    if w > 0.0 {
                        row.push((j, w));
                    }
                }
            }
            row
        });
        let mut cols = vec![Vec::new(); bins];
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                cols[j].push((i, w));
            }
        }
        Ok(UlamOperator {
            map: Arc::clone(map),
            lo,
            width,
            rows,
            cols,
        })
    }

    pub fn map(&self) -> &Arc<ExpandingMarkovMap> {
        &self.map
    }

    pub fn bins(&self) -> usize {
        self.rows.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.width
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Non-zero entries as `(row, column, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, w)| (i, j, w)))
    }

    /// Dense copy, for small cross-checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.bins();
        let mut m = vec![vec![0.0; n]; n];
        for (i, j, w) in self.triplets() {
            m[i][j] = w;
        }
        m
    }

    /// Row vector times matrix, `(pM)_j = Σ_i p_i M_ij`, summed in row order.
    pub fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        par::map(&self.cols, |col| col.iter().map(|&(i, w)| p[i] * w).sum())
    }

    /// Power iteration on bin masses from the uniform vector.
    pub fn invariant_density(&self, tol: f64) -> Result<InvariantDensity> {
        const CAP: usize = 100_000;
        let n = self.bins();
        let mut p = vec![1.0 / n as f64; n];
        let mut residual = f64::INFINITY;
        for it in 1..=CAP {
            let q = self.push_forward(&p);
            let total: f64 = q.iter().sum();
            let leading = total / p.iter().sum::<f64>();
            let q: Vec<f64> = q.into_iter().map(|x| x / total).collect();
            residual = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
            p = q;
            if residual <= tol {
                return Ok(InvariantDensity {
                    lo: self.lo,
                    width: self.width,
                    values: p.iter().map(|m| m / self.width).collect(),
                    residual,
                    iterations: it,
                    leading_eigenvalue: leading,
                    cdf: cumulative(&p),
                });
            }
        }
        Err(Error::NoConvergence {
            what: "invariant density",
            iterations: CAP,
            residual,
        })
    }

    /// Modulus of the second eigenvalue by power iteration restricted to
    /// zero-sum vectors, the complement of the leading eigenvector.
    pub fn spectral_gap(&self, density: &InvariantDensity) -> Result<SpectralEstimate> {
        const CAP: usize = 100_000;
        const WINDOW: usize = 64;
        let n = self.bins();
        let stationary: Vec<f64> = density.values.iter().map(|v| v * self.width).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        project_zero_sum(&mut q, &stationary);
        normalise(&mut q);
        let mut logs: Vec<f64> = Vec::new();
        let mut prev_est = f64::NAN;
        for it in 1..=CAP {
            let mut next = self.push_forward(&q);
            project_zero_sum(&mut next, &stationary);
            let norm = l1(&next);
            if norm < 1e-13 {
                return Ok(SpectralEstimate {
                    leading: density.leading_eigenvalue,
                    second_modulus: 0.0,
                    iterations: it,
                });
            }
            logs.push(norm.ln());
            next.iter_mut().for_each(|x| *x /= norm);
            q = next;
            if logs.len() % WINDOW == 0 {
                let est = (logs[logs.len() - WINDOW..].iter().sum::<f64>() / WINDOW as f64).exp();
                // Jordan blocks converge like λ(1 + 1/n), so the window-to-window
                // change is only O(λ·WINDOW/n²).
                if (est - prev_est).abs() <= 1e-7 * est.max(1e-12) {
                    return Ok(SpectralEstimate {
                        leading: density.leading_eigenvalue,
                        second_modulus: est,
                        iterations: it,
                    });
                }
                prev_est = est;
            }
        }
        Err(Error::NoConvergence {
            what: "second eigenvalue",
            iterations: CAP,
            residual: prev_est,
        })
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(p.len() + 1);
    out.push(0.0);
    for m in p {
        acc += m;
        out.push(acc);
    }
    out
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn normalise(v: &mut [f64]) {
    let n = l1(v);
    v.iter_mut().for_each(|x| *x /= n);
}

fn project_zero_sum(q: &mut [f64], stationary: &[f64]) {
    let s: f64 = q.iter().sum();
    for (x, p) in q.iter_mut().zip(stationary) {
        *x -= s * p;
    }
}

/// Leading and second eigenvalue moduli of an Ulam matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub leading: f64,
    pub second_modulus: f64,
    pub iterations: usize,
}

impl SpectralEstimate {
    pub fn gap(&self) -> f64 {
        1.0 - self.second_modulus
    }
}

/// Piecewise-constant density `φ = dν/dm` on the Ulam bins.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantDensity {
    lo: f64,
    width: f64,
    values: Vec<f64>,
    residual: f64,
    iterations: usize,
    leading_eigenvalue: f64,
    cdf: Vec<f64>,
}

impl InvariantDensity {
    /// Lebesgue density on `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let p = vec![1.0 / bins as f64; bins];
        InvariantDensity {
            lo,
            width,
            values: vec![1.0 / (hi - lo); bins],
            residual: 0.0,
            iterations: 0,
            leading_eigenvalue: 1.0,
            cdf: cumulative(&p),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.width
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        (self.lo + self.width * i as f64, self.lo + self.width * (i + 1) as f64)
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn leading_eigenvalue(&self) -> f64 {
        self.leading_eigenvalue
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn bin_of(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.width).floor();
        (i.max(0.0) as usize).min(self.values.len() - 1)
    }

    /// `φ(x)`; points outside the domain are clamped to the end bins.
    pub fn value(&self, x: f64) -> f64 {
        self.values[self.bin_of(x)]
    }

    /// `∫ g dν`, Gauss–Legendre on every bin.
    pub fn integrate(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let (a, b) = self.bin_edges(i);
                v * quad::gauss8(a, b, g)
            })
            .sum()
    }

    /// Quantile function of ν.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.values.len();
        let total = self.cdf[n];
        let t = u * total;
        let i = (self.cdf.partition_point(|&c| c <= t).max(1) - 1).min(n - 1);
        let mass = self.cdf[i + 1] - self.cdf[i];
        let frac = if mass > 0.0 {
            ((t - self.cdf[i]) / mass).clamp(0.0, 1.0)
        } else {
            0.5
        };
        self.lo + self.width * (i as f64 + frac)
    }

    /// L¹ distance to another density on a bin grid that refines or is refined by this one.
    pub fn l1_distance(&self, other: &InvariantDensity) -> f64 {
        let (fine, coarse) = if self.bins() >= other.bins() {
            (self, other)
        } else {
            (other, self)
        };
        fine.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (a, b) = fine.bin_edges(i);
                (v - coarse.value(0.5 * (a + b))).abs() * (b - a)
            })
            .sum()
    }
}

/// Both sides of the duality `∫ g∘f · v dν = ∫ g · L_ν v dν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

/// Evaluates both sides by Gauss–Legendre quadrature on `panels` sub-panels of
/// every density bin. The left side composes with `f`; the right side sums
/// over inverse branches.
pub fn duality_check(
    map: &ExpandingMarkovMap,
    density: &InvariantDensity,
    g: &dyn Fn(f64) -> f64,
    v: &dyn Fn(f64) -> f64,
    panels: usize,
) -> DualityCheck {
    let panels = panels.max(1);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..density.bins() {
        let (a, b) = density.bin_edges(i);
        let phi = density.values[i];
        let k = map.cell_of(0.5 * (a + b)).expect("bins refine the partition");
        let br = map.branch(k);
        lhs += phi * quad::composite(a, b, panels, |x| g(br.forward(x)) * v(x));
        rhs += quad::composite(a, b, panels, |y| {
            let mut s = 0.0;
            for (m, bm) in map.branches().iter().enumerate() {
                if map.allowed(m, k) {
                    let x = bm.inverse(y);
                    s += bm.inverse_jacobian(y) * v(x) * density.value(x);
                }
            }
            g(y) * s
        });
    }
    DualityCheck {
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> Arc<ExpandingMarkovMap> {
        Arc::new(ExpandingMarkovMap::doubling())
    }

    #[test]
    fn apply_on_doubling_and_three_branch() {
        let f = doubling();
        assert_eq!(apply_exact(&f, &|_| 1.0, 0.3).unwrap(), 1.0);
        assert!((apply_exact(&f, &|x| x, 0.3).unwrap() - (0.15 + 0.25)).abs() < 1e-15);
        let g = ExpandingMarkovMap::three_branch();
        let v = apply_exact(&g, &|_| 1.0, 0.9).unwrap();
        assert!((v - 7.0 / 6.0).abs() < 1e-15);
        assert!((apply_exact(&g, &|_| 1.0, 0.2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn small_doubling_matrices() {
        let u = UlamOperator::build(&doubling(), 2).unwrap();
        assert_eq!(u.to_dense(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let u = UlamOperator::build(&doubling(), 4).unwrap();
        for i in 0..4 {
            assert_eq!(u.row(i).len(), 2);
            assert!(u.row(i).iter().all(|&(_, w)| w == 0.5));
        }
        assert!(matches!(
            UlamOperator::build(&doubling(), 3),
            Err(Error::BinMisalignment { .. })
        ));
    }

    #[test]
    fn doubling_density_is_uniform() {
        let u = UlamOperator::build(&doubling(), 1024).unwrap();
        let d = u.invariant_density(1e-10).unwrap();
        assert!(d.residual() <= 1e-10);
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let s = u.spectral_gap(&d).unwrap();
        assert_eq!(s.second_modulus, 0.0);
        let two = UlamOperator::build(&doubling(), 2).unwrap();
        let d2 = two.invariant_density(1e-10).unwrap();
        assert_eq!(two.spectral_gap(&d2).unwrap().second_modulus, 0.0);
    }

    #[test]
    fn three_branch_density_is_piecewise_constant() {
        let f = Arc::new(ExpandingMarkovMap::three_branch());
        let u = UlamOperator::build(&f, 3 * 64).unwrap();
        let d = u.invariant_density(1e-12).unwrap();
        assert!(d.min_value() > 0.0);
        assert!((d.value(0.1) - 0.75).abs() < 1e-9);
        assert!((d.value(0.5) - 1.125).abs() < 1e-9);
        assert!((d.value(0.9) - 1.125).abs() < 1e-9);
        let total: f64 = d.values().iter().sum::<f64>() * d.bin_width();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_cdf_of_uniform() {
        let d = InvariantDensity::uniform(0.0, 1.0, 8);
        for u in [0.0, 0.1, 0.37, 0.5, 0.999] {
            assert!((d.inverse_cdf(u) - u).abs() < 1e-15);
        }
    }

    #[test]
    fn duality_for_identity_pair() {
        let f = doubling();
        let d = InvariantDensity::uniform(0.0, 1.0, 2);
        let c = duality_check(&f, &d, &|x| x, &|x| x, 1);
        assert!((c.lhs - 7.0 / 24.0).abs() < 1e-15);
        assert!(c.discrepancy < 1e-15);
    }
}
