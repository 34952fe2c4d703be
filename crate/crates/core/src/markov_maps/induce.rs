//! First-return inducing onto a partition cell and its tail statistics.

use std::sync::Arc;

use num_traits::Zero;

use super::ExpandingMarkovMap;
use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::stats;

const BRANCH_BUDGET: usize = 2_000_000;

/// One first-return branch: the cell of points whose excursion follows `itinerary`.
#[derive(Debug, Clone)]
pub struct InducedBranch {
    pub itinerary: Vec<usize>,
    pub return_time: usize,
    pub left: f64,
    pub right: f64,
    pub exact: Option<(Q, Q)>,
}

impl InducedBranch {
    pub fn length(&self) -> f64 {
        self.right - self.left
    }
}

/// First-return map `F = f^R` to a base cell, enumerated up to a depth cap.
#[derive(Debug, Clone)]
pub struct InducedMap {
    base: Arc<ExpandingMarkovMap>,
    base_cell: usize,
    depth_cap: usize,
    branches: Vec<InducedBranch>,
    /// `tail[n-1] = m(R ≥ n | Δ₀)` for `n = 1..=depth_cap + 1`.
    tail: Vec<f64>,
    exact_tail: Option<Vec<Q>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailPoint {
    pub n: usize,
    pub mass: f64,
    pub exact: Option<Q>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailStatistics {
    /// `m(R ≥ n)` relative to `m(Δ₀)` for every enumerated depth.
    pub points: Vec<TailPoint>,
    /// Fitted exponential rate; `+∞` when there are no excursions.
    pub alpha: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// Half the critical exponent `α / τ̄`.
    pub sigma0: f64,
    pub residual_mass: f64,
}

impl ExpandingMarkovMap {
    /// Enumerates all first-return branches to `base_cell` with return time at most `depth_cap`.
    pub fn induce_first_return(self: &Arc<Self>, base_cell: usize, depth_cap: usize) -> Result<InducedMap> {
        if base_cell >= self.len() {
            return Err(Error::InvalidModel(format!("no cell {base_cell}")));
        }
        if !self.reachable_from(base_cell)[base_cell] {
            return Err(Error::NoReturn { cell: base_cell });
        }
        let depth_cap = depth_cap.max(1);
        let exact = self.is_affine();
        let b = base_cell;
        let base = &self.branches[b];
        let base_len = base.right - base.left;
        let exact_base_len = base.exact.as_ref().map(|(l, r)| r - l);

        // Pulls the interval `cell` back through `path` (last symbol applied first).
        let pull_back = |path: &[usize], target: usize| -> ((f64, f64), Option<(Q, Q)>) {
            let t = &self.branches[target];
            let mut iv = (t.left, t.right);
            let mut ex = if exact { t.exact.clone() } else { None };
            for &k in path.iter().rev() {
                let br = &self.branches[k];
                iv = br.pull(iv.0, iv.1);
                ex = ex.and_then(|(a, c)| br.exact_pull(&a, &c));
            }
            if let Some((a, c)) = &ex {
                iv = (rational::to_f64(a), rational::to_f64(c));
            }
            (iv, ex)
        };

        let mut branches = Vec::new();
        let mut tail = vec![0.0; depth_cap + 1];
        let mut exact_tail: Option<Vec<Q>> = exact.then(|| vec![Q::zero(); depth_cap + 1]);
        let mut stack: Vec<Vec<usize>> = vec![vec![b]];
        while let Some(path) = stack.pop() {
            let n = path.len();
            let last = path[n - 1];
            // Cylinder of the current path: points with R ≥ n.
            let (iv, ex) = pull_back(&path[..n - 1], last);
            tail[n - 1] += (iv.1 - iv.0) / base_len;
            if let (Some(t), Some((a, c)), Some(bl)) = (exact_tail.as_mut(), &ex, &exact_base_len) {
                t[n - 1] += (c - a) / bl;
            }
            for j in (0..self.len()).rev() {
                if !self.allowed(last, j) {
                    continue;
                }
                if j == b {
                    let (civ, cex) = pull_back(&path, b);
                    branches.push(InducedBranch {
                        itinerary: path.clone(),
                        return_time: n,
                        left: civ.0,
                        right: civ.1,
                        exact: cex,
                    });
                    if branches.len() > BRANCH_BUDGET {
                        return Err(Error::DepthOverflow {
                            depth: depth_cap,
                            nodes: branches.len() as f64,
                            budget: BRANCH_BUDGET,
                        });
                    }
                } else if n < depth_cap {
                    let mut next = path.clone();
                    next.push(j);
                    stack.push(next);
                } else {
                    let mut ext = path.clone();
                    ext.push(j);
                    let (eiv, eex) = pull_back(&ext[..n], j);
                    tail[n] += (eiv.1 - eiv.0) / base_len;
                    if let (Some(t), Some((a, c)), Some(bl)) = (exact_tail.as_mut(), &eex, &exact_base_len) {
                        t[n] += (c - a) / bl;
                    }
                }
            }
        }
        branches.sort_by(|a, c| a.return_time.cmp(&c.return_time).then(a.left.total_cmp(&c.left)));
        Ok(InducedMap {
            base: Arc::clone(self),
            base_cell: b,
            depth_cap,
            branches,
            tail,
            exact_tail,
        })
    }
}

impl InducedMap {
    pub fn base(&self) -> &Arc<ExpandingMarkovMap> {
        &self.base
    }

    pub fn base_cell(&self) -> usize {
        self.base_cell
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn branches(&self) -> &[InducedBranch] {
        &self.branches
    }

    /// `m(R ≥ n)` relative to `m(Δ₀)`; `n` ranges over `1..=depth_cap + 1`.
    pub fn tail_mass(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        self.tail.get(n - 1).copied().unwrap_or(f64::NAN)
    }

    pub fn exact_tail_mass(&self, n: usize) -> Option<&Q> {
        self.exact_tail.as_ref()?.get(n.checked_sub(1)?)
    }

    /// Relative mass of points not returning within the depth cap.
    pub fn residual_mass(&self) -> f64 {
        self.tail[self.depth_cap]
    }

    /// Largest endpoint error of `f^R(cell)` against `Δ₀` over all enumerated branches.
    pub fn full_branch_error(&self) -> f64 {
        let target = self.base.branch(self.base_cell);
        let mut worst: f64 = 0.0;
        for br in &self.branches {
            let a = self.base.orbit_along(br.left, &br.itinerary);
            let c = self.base.orbit_along(br.right, &br.itinerary);
            let (u, v) = (a[a.len() - 1], c[c.len() - 1]);
            let (u, v) = if u <= v { (u, v) } else { (v, u) };
            worst = worst.max((u - target.left()).abs()).max((v - target.right()).abs());
        }
        worst
    }

    /// First-return map `F(x) = f^{R(x)}(x)` with the index of the branch used.
    pub fn evaluate(&self, x: f64) -> Result<(f64, usize)> {
        let i = self
            .branches
            .iter()
            .position(|b| b.left < x && x < b.right)
            .ok_or(Error::BoundaryPoint { x })?;
        let br = &self.branches[i];
        let orbit = self.base.orbit_along(x, &br.itinerary);
        Ok((orbit[orbit.len() - 1], i))
    }

    /// Tail histogram and exponential fit of `log m(R ≥ n)` against `n`.
    ///
    /// `roof_upper` is the roof bound τ̄ used to turn the return-time rate
    /// into a roof-time rate; it defaults to 1.
    pub fn tail_statistics(&self, roof_upper: Option<f64>) -> Result<TailStatistics> {
        let points: Vec<TailPoint> = (1..=self.depth_cap)
            .map(|n| TailPoint {
                n,
                mass: self.tail_mass(n),
                exact: self.exact_tail_mass(n).cloned(),
            })
            .collect();
        let residual_mass = self.residual_mass();
        let tau = roof_upper.unwrap_or(1.0);
        // Degenerate when no enumerated branch makes an excursion.
        if self.branches.iter().all(|b| b.return_time == 1) {
            return Ok(TailStatistics {
                points,
                alpha: f64::INFINITY,
                prefactor: 1.0,
                r_squared: 1.0,
                sigma0: f64::INFINITY,
                residual_mass,
            });
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|p| p.mass > 0.0)
            .map(|p| (p.n as f64, p.mass.ln()))
            .unzip();
        if xs.len() < 4 {
            return Err(Error::InsufficientDepth {
                needed: 4,
                found: xs.len(),
            });
        }
        let fit = stats::ols(&xs, &ys).expect("at least four distinct depths");
        let alpha = -fit.slope;
        Ok(TailStatistics {
            points,
            alpha,
            prefactor: fit.intercept.exp(),
            r_squared: fit.r_squared,
            sigma0: alpha / (2.0 * tau),
            residual_mass,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn doubling_left_half_depth_three() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let ind = f.induce_first_return(0, 3).unwrap();
        let cells: Vec<(usize, f64, f64)> = ind
            .branches()
            .iter()
            .map(|b| (b.return_time, b.left, b.right))
            .collect();
        assert_eq!(cells, vec![(1, 0.0, 0.25), (2, 0.25, 0.375), (3, 0.375, 0.4375)]);
        assert_eq!(ind.exact_tail_mass(3), Some(&q(1, 4)));
        assert_eq!(ind.residual_mass(), 0.125);
        assert!(ind.full_branch_error() <= 1e-12);
    }

    #[test]
    fn depth_one_sees_only_immediate_returns() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let ind = f.induce_first_return(0, 1).unwrap();
        assert_eq!(ind.branches().len(), 1);
        assert_eq!(ind.branches()[0].return_time, 1);
        let t = ind.tail_statistics(None).unwrap();
        assert_eq!(t.alpha, f64::INFINITY);
        assert_eq!(t.residual_mass, 0.5);
    }

    #[test]
    fn non_recurrent_cell_has_no_return() {
        let f = Arc::new(
            ExpandingMarkovMap::affine(
                "transient",
                crate::markov_maps::DomainKind::Interval,
                &[q(0, 1), q(1, 3), q(2, 3), q(1, 1)],
                &[q(2, 1), q(2, 1), q(2, 1)],
                &[q(1, 3), q(-1, 3), q(-1, 1)],
                vec![vec![false, true, true]; 3],
                0.5,
                0.0,
            )
            .unwrap(),
        );
        assert_eq!(f.induce_first_return(0, 5).unwrap_err(), Error::NoReturn { cell: 0 });
    }

    #[test]
    fn short_tail_is_rejected() {
        let f = Arc::new(ExpandingMarkovMap::doubling());
        let ind = f.induce_first_return(0, 3).unwrap();
        assert_eq!(
            ind.tail_statistics(None),
            Err(Error::InsufficientDepth { needed: 4, found: 3 })
        );
    }
}
