use std::sync::Arc;

use mixlab::rational::{q, qi, to_f64, Q};
use mixlab::roof::Verdict;
use mixlab::{Error, ExpandingMarkovMap, RoofFunction, RoofKind};
use num_traits::{Signed, Zero};
use proptest::prelude::*;

fn doubling() -> Arc<ExpandingMarkovMap> {
    Arc::new(ExpandingMarkovMap::doubling())
}

fn poly_mul(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x.clone() * y.clone();
        }
    }
    out
}

/// Coefficients of `p(s·x + t)`.
fn compose_affine(p: &[Q], s: &Q, t: &Q) -> Vec<Q> {
    let lin = [t.clone(), s.clone()];
    let mut out = vec![Q::zero()];
    for c in p.iter().rev() {
        out = poly_mul(&out, &lin);
        out[0] += c.clone();
    }
    out
}

fn poly_sub(a: &[Q], b: &[Q]) -> Vec<Q> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).cloned().unwrap_or_default() - b.get(i).cloned().unwrap_or_default())
        .collect()
}

fn eval(p: &[Q], x: &Q) -> Q {
    p.iter().rev().fold(Q::zero(), |acc, c| acc * x.clone() + c.clone())
}

/// Periodic point of the doubling map from its binary expansion.
fn binary_point(w: &[usize]) -> Q {
    let p = w.len();
    let num = w
        .iter()
        .enumerate()
        .fold(0i64, |a, (i, &s)| a + (s as i64) * (1i64 << (p - 1 - i)));
    q(num, (1i64 << p) - 1)
}

/// Birkhoff sum of a polynomial roof along the periodic orbit of `w`.
fn orbit_sum(coeffs: &[Q], w: &[usize]) -> Q {
    (0..w.len())
        .map(|k| {
            let rotated: Vec<usize> = w[k..].iter().chain(&w[..k]).copied().collect();
            eval(coeffs, &binary_point(&rotated))
        })
        .fold(Q::zero(), |a, b| a + b)
}

#[test]
fn birkhoff_examples() {
    let r = RoofFunction::polynomial(doubling(), vec![qi(1), qi(0), qi(1)]).unwrap();
    assert!((r.birkhoff_sum(0.2, 4).unwrap() - 5.2).abs() < 1e-12);
    assert!((r.birkhoff_sum(1.0 / 3.0, 4).unwrap() - 46.0 / 9.0).abs() < 1e-12);
    assert_eq!(r.birkhoff_sum(0.2, 0).unwrap(), 0.0);
    assert_eq!(r.exact_birkhoff_along(&q(1, 5), &[0, 0, 1, 1]), Some(q(26, 5)));
    assert_eq!(orbit_sum(&[qi(1), qi(0), qi(1)], &[0, 1, 0, 1]), q(46, 9));
}

#[test]
fn xsq_witness_matches_rational_oracle() {
    let coeffs = vec![qi(1), qi(0), qi(1)];
    let r = RoofFunction::polynomial(doubling(), coeffs.clone()).unwrap();
    let rep = r.witness_search(4);
    assert_eq!(rep.verdict, Verdict::WitnessFound);
    assert!(rep.exact);
    let w = rep.witness.unwrap();
    assert_eq!(w.period, 4);
    let gap = (orbit_sum(&coeffs, &[0, 0, 1, 1]) - orbit_sum(&coeffs, &[0, 1, 0, 1])).abs();
    assert_eq!(gap, q(4, 45));
    assert_eq!(w.exact_gap, Some(gap));
}

#[test]
fn bump_creates_a_witness_of_the_bump_height() {
    let r = RoofFunction::constant(doubling(), qi(1)).unwrap();
    assert_eq!(r.witness_search(6).verdict, Verdict::NoWitnessUpToPeriod);
    let bumped = r.perturb_bump(0.2, 0.02, 0.1, &[1.0 / 3.0], 4).unwrap();
    let rep = bumped.witness_search(4);
    let w = rep.witness.expect("witness after bump");
    assert_eq!(w.period, 4);
    assert!((w.gap - 0.1).abs() < 1e-12, "{w:?}");
    assert!(matches!(
        r.perturb_bump(1.0 / 3.0, 0.02, 0.1, &[1.0 / 3.0], 4),
        Err(Error::ProtectedOrbitHit { .. })
    ));
    let same = r.perturb_bump(0.2, 0.02, 0.0, &[], 4).unwrap();
    assert_eq!(same.bumps().len(), 0);
    assert_eq!(same.value(0.2).unwrap(), 1.0);
}

#[test]
fn coboundary_certificates() {
    let r = RoofFunction::polynomial(doubling(), vec![qi(1), qi(1)]).unwrap();
    assert!(r.certify_coboundary(&|x| x, 10_000).deviation <= 1e-12);
    assert_eq!(r.witness_search(8).verdict, Verdict::NoWitnessUpToPeriod);
    let xsq = RoofFunction::polynomial(doubling(), vec![qi(1), qi(0), qi(1)]).unwrap();
    let cert = xsq.certify_coboundary(&|_| 0.0, 1000);
    assert!((cert.branches[0].oscillation - 0.25).abs() < 1e-12);
}

fn small_rational() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| q(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `r = c_k + γ∘f − γ` on branch `k` telescopes on every closed orbit.
    #[test]
    fn coboundaries_have_no_witness(
        gamma in prop::collection::vec(small_rational(), 1..4),
        shift in prop::collection::vec(small_rational(), 2),
    ) {
        let sup: Q = gamma.iter().map(|c| c.abs()).fold(Q::zero(), |a, b| a + b);
        let mut branches = Vec::new();
        for (k, s) in shift.iter().enumerate() {
            let moved = compose_affine(&gamma, &qi(2), &qi(-(k as i64)));
            let mut p = poly_sub(&moved, &gamma);
            p[0] += qi(1) + sup.clone() * qi(2) + s.abs();
            branches.push(p);
        }
        let r = RoofFunction::new(doubling(), RoofKind::PiecewisePolynomial(branches)).unwrap();
        let g: Vec<f64> = gamma.iter().map(to_f64).collect();
        let gf = move |x: f64| g.iter().rev().fold(0.0, |a, c| a * x + c);
        let cert = r.certify_coboundary(&gf, 2000);
        prop_assert!(cert.deviation <= 1e-10, "{}", cert.deviation);
        let rep = r.witness_search(7);
        prop_assert!(rep.exact);
        prop_assert_eq!(rep.verdict, Verdict::NoWitnessUpToPeriod);
    }

    #[test]
    fn witnesses_are_sound(
        a in small_rational(),
        b in small_rational(),
    ) {
        let coeffs = vec![qi(1) + a.abs() + b.abs(), a, b];
        let r = RoofFunction::polynomial(doubling(), coeffs.clone()).unwrap();
        let rep = r.witness_search(5);
        if let Some(w) = rep.witness {
            let count = |v: &[usize]| v.iter().filter(|&&s| s == 1).count();
            prop_assert_eq!(count(&w.itinerary1), count(&w.itinerary2));
            prop_assert_eq!(w.itinerary1.len(), w.period);
            let gap = (orbit_sum(&coeffs, &w.itinerary1) - orbit_sum(&coeffs, &w.itinerary2)).abs();
            prop_assert!(gap > Q::zero());
            prop_assert_eq!(w.exact_gap, Some(gap));
        } else {
            // Only affine roofs are coboundaries plus constants here.
            prop_assert!(coeffs[2].is_zero());
        }
    }

    #[test]
    fn bumps_are_local(x in 0.0f64..1.0, c in 0.05f64..0.95, rad in 0.001f64..0.05) {
        let r = RoofFunction::polynomial(doubling(), vec![qi(2), qi(0), qi(1)]).unwrap();
        let b = r.perturb_bump(c, rad, -0.5, &[], 1).unwrap();
        if let (Ok(v0), Ok(v1)) = (r.value(x), b.value(x)) {
            if (x - c).abs() >= rad {
                prop_assert_eq!(v0, v1);
            }
            prop_assert!(v1 >= r.lower_bound() - 0.5);
            prop_assert!(v1 >= b.lower_bound() - 1e-12);
        }
    }
}
