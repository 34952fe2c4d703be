//! Periodic-orbit test for roofs cohomologous to locally constant functions.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::RoofFunction;
use crate::markov_maps::format_itinerary;
use crate::par;
use crate::probe;
use crate::rational::{self, Q};

/// Floating-point reporting threshold for Birkhoff-sum gaps.
pub const WITNESS_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    WitnessFound,
    /// No witness among the periods searched. This is not a certificate of cohomology.
    NoWitnessUpToPeriod,
}

/// Two distinct periodic orbits with equal visit counts and different Birkhoff sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub period: usize,
    pub itinerary1: Vec<usize>,
    pub itinerary2: Vec<usize>,
    pub point1: f64,
    pub point2: f64,
    pub sum1: f64,
    pub sum2: f64,
    pub gap: f64,
    pub exact_sums: Option<(Q, Q)>,
    pub exact_gap: Option<Q>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohomologyReport {
    pub witness: Option<Witness>,
    pub searched_periods: usize,
    pub verdict: Verdict,
    /// Birkhoff sums were compared in exact rational arithmetic.
    pub exact: bool,
    /// Number of primitive periodic orbits examined.
    pub classes: usize,
    /// Number of orbit pairs that separate.
    pub witness_pairs: usize,
}

/// Oscillation of `r − γ∘f + γ` on one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchResidual {
    pub branch: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    /// `max − min` over the probes.
    pub oscillation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoboundaryCertificate {
    pub branches: Vec<BranchResidual>,
    pub worst_branch: usize,
    /// Largest per-branch oscillation.
    pub deviation: f64,
}

struct OrbitClass {
    word: Vec<usize>,
    visits: Vec<u32>,
    point: f64,
    sum: f64,
    exact: Option<Q>,
}

/// Lyndon words of length at most `n` over `k` symbols, in lexicographic order.
pub(crate) fn lyndon_words(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || n == 0 {
        return out;
    }
    let mut w = vec![0usize];
    loop {
        out.push(w.clone());
        let m = w.len();
        while w.len() < n {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(k - 1)) {
            w.pop();
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out
}

impl RoofFunction {
    /// Searches periodic orbits of period at most `max_period` for a pair with
    /// equal visit counts and different Birkhoff sums.
    ///
    /// A primitive orbit of period `d` also takes part at every multiple of `d`,
    /// traversed `p/d` times. The reported witness is the one of smallest period;
    /// within it the largest gap wins, ties going to the lexicographically
    /// smallest itinerary pair.
    pub fn witness_search(&self, max_period: usize) -> CohomologyReport {
        let map = self.base();
        let exact = map.is_affine() && self.is_exact();
        let words: Vec<Vec<usize>> = lyndon_words(map.len(), max_period)
            .into_iter()
            .filter(|w| map.check_admissible(w, true).is_ok())
            .collect();
        let classes: Vec<OrbitClass> = par::map(&words, |w| {
            let mut visits = vec![0u32; map.len()];
            for &s in w {
                visits[s] += 1;
            }
            let (exact_point, exact_sum) = if exact {
                let x = map.periodic_point_exact(w).expect("admissible").expect("affine");
                let s = self.exact_birkhoff_along(&x, w).expect("exact roof");
                (Some(x), Some(s))
            } else {
                (None, None)
            };
            let point = match &exact_point {
                Some(x) => rational::to_f64(x),
                None => map.periodic_point(w).expect("admissible"),
            };
            let sum = match &exact_sum {
                Some(s) => rational::to_f64(s),
                None => self.birkhoff_along(point, w),
            };
            OrbitClass {
                word: w.clone(),
                visits,
                point,
                sum,
                exact: exact_sum,
            }
        });

        let mut witness = None;
        let mut witness_pairs = 0;
        for p in 1..=max_period {
            let mut groups: BTreeMap<Vec<u32>, Vec<(usize, u32)>> = BTreeMap::new();
            for (i, c) in classes.iter().enumerate() {
                let d = c.word.len();
                if p % d == 0 {
                    let rep = (p / d) as u32;
                    let key = c.visits.iter().map(|v| v * rep).collect();
                    groups.entry(key).or_default().push((i, rep));
                }
            }
            let mut best: Option<Witness> = None;
            for members in groups.values() {
                for (a, &(i, ri)) in members.iter().enumerate() {
                    for &(j, rj) in &members[a + 1..] {
                        let cand = compare(&classes[i], ri, &classes[j], rj, p);
                        if let Some(w) = cand {
                            witness_pairs += 1;
                            if better(&w, best.as_ref()) {
                                best = Some(w);
                            }
                        }
                    }
                }
            }
            if witness.is_none() {
                witness = best;
            }
        }
        CohomologyReport {
            verdict: if witness.is_some() {
                Verdict::WitnessFound
            } else {
                Verdict::NoWitnessUpToPeriod
            },
            witness,
            searched_periods: max_period,
            exact,
            classes: classes.len(),
            witness_pairs,
        }
    }

    /// Per-branch oscillation of `r − γ∘f + γ`, probed at the cell endpoints
    /// and `probes` interior points of each branch.
    pub fn certify_coboundary(&self, gamma: &dyn Fn(f64) -> f64, probes: usize) -> CoboundaryCertificate {
        let map = self.base();
        let mut branches = Vec::with_capacity(map.len());
        for (k, br) in map.branches().iter().enumerate() {
            let xs = std::iter::once(br.left())
                .chain(probe::interior(br.left(), br.right(), probes))
                .chain(std::iter::once(br.right()));
            let vals: Vec<f64> = xs
                .map(|x| self.value_on_branch(x, k) - gamma(br.forward(x)) + gamma(x))
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let variance = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            branches.push(BranchResidual {
                branch: k,
                min,
                max,
                mean,
                variance,
                oscillation: max - min,
            });
        }
        let worst = branches
            .iter()
            .max_by(|a, b| a.oscillation.total_cmp(&b.oscillation))
            .expect("at least one branch");
        CoboundaryCertificate {
            worst_branch: worst.branch,
            deviation: worst.oscillation,
            branches,
        }
    }
}

fn repeat(word: &[usize], times: u32) -> Vec<usize> {
    let mut out = Vec::with_capacity(word.len() * times as usize);
    for _ in 0..times {
        out.extend_from_slice(word);
    }
    out
}

fn compare(a: &OrbitClass, ra: u32, b: &OrbitClass, rb: u32, period: usize) -> Option<Witness> {
    let sum1 = a.sum * ra as f64;
    let sum2 = b.sum * rb as f64;
    let (exact_sums, exact_gap, separated) = match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => {
            let s1 = x * Q::from_integer(ra.into());
            let s2 = y * Q::from_integer(rb.into());
            let g = (&s1 - &s2).abs();
            let sep = !g.is_zero();
            (Some((s1, s2)), Some(g), sep)
        }
        _ => (None, None, (sum1 - sum2).abs() > WITNESS_THRESHOLD),
    };
    if !separated {
        return None;
    }
    let gap = match &exact_gap {
        Some(g) => rational::to_f64(g),
        None => (sum1 - sum2).abs(),
    };
    Some(Witness {
        period,
        itinerary1: repeat(&a.word, ra),
        itinerary2: repeat(&b.word, rb),
        point1: a.point,
        point2: b.point,
        sum1,
        sum2,
        gap,
        exact_sums,
        exact_gap,
    })
}

fn better(w: &Witness, best: Option<&Witness>) -> bool {
    let Some(b) = best else { return true };
    let by_gap = match (&w.exact_gap, &b.exact_gap) {
        (Some(x), Some(y)) => x.cmp(y),
        _ => w.gap.total_cmp(&b.gap),
    };
    match by_gap {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => (&w.itinerary1, &w.itinerary2) < (&b.itinerary1, &b.itinerary2),
    }
}

impl Witness {
    pub fn label1(&self) -> String {
        format_itinerary(&self.itinerary1)
    }

    pub fn label2(&self) -> String {
        format_itinerary(&self.itinerary2)
    }
}
