use std::sync::Arc;

use mixlab::markov_maps::format_itinerary;
use mixlab::rational::{q, Q};
use mixlab::{Error, ExpandingMarkovMap};
use num_traits::{One, Zero};
use proptest::prelude::*;

/// Relative first-return tails `m(R ≥ n | Δ₀)` by pushing cell masses forward.
/// Every branch of the three-branch map is affine onto a union of cells, so
/// conditional measures stay uniform on cells and a mass vector suffices.
fn chain_tails(f: &ExpandingMarkovMap, cell: usize, depth: usize) -> Vec<Q> {
    let (lo, hi) = f.exact_domain().unwrap();
    let cells: Vec<(Q, Q)> = f
        .branches()
        .iter()
        .map(|b| {
            let (l, r) = b.exact_cell().unwrap();
            (l.clone(), r.clone())
        })
        .collect();
    let len = |c: &(Q, Q)| c.1.clone() - c.0.clone();
    let image_len = |j: usize| -> Q {
        (0..cells.len())
            .filter(|&k| f.allowed(j, k))
            .map(|k| len(&cells[k]))
            .fold(Q::zero(), |a, b| a + b)
    };
    assert_eq!(image_len(1), hi - lo);

    let mut out = vec![Q::one()];
    // Mass after the first step, all of it outside the base cell at the start.
    let mut mass = vec![Q::zero(); cells.len()];
    mass[cell] = Q::one();
    for _ in 2..=depth {
        let mut next = vec![Q::zero(); cells.len()];
        for (j, m) in mass.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let il = image_len(j);
            for k in 0..cells.len() {
                if f.allowed(j, k) {
                    next[k] += m.clone() * len(&cells[k]) / il.clone();
                }
            }
        }
        // Whatever lands in the base cell has returned.
        next[cell] = Q::zero();
        out.push(next.iter().fold(Q::zero(), |a, b| a + b));
        mass = next;
    }
    out
}

#[test]
fn three_branch_tails_match_chain_oracle() {
    let f = Arc::new(ExpandingMarkovMap::three_branch());
    let induced = f.induce_first_return(0, 12).unwrap();
    let oracle = chain_tails(&f, 0, 12);
    for (i, m) in oracle.iter().enumerate() {
        let n = i + 1;
        assert_eq!(induced.exact_tail_mass(n), Some(m), "n = {n}");
        if n >= 2 {
            let closed = mixlab::rational::pow(&q(2, 3), n - 2);
            assert_eq!(m, &closed);
        }
    }
    let stats = induced.tail_statistics(None).unwrap();
    let target = 1.5f64.ln();
    assert!((stats.alpha - target).abs() / target < 0.1, "{}", stats.alpha);
}

#[test]
fn induced_branches_cover_base_cell() {
    let f = Arc::new(ExpandingMarkovMap::three_branch());
    let induced = f.induce_first_return(0, 10).unwrap();
    let covered: f64 = induced.branches().iter().map(|b| b.length()).sum();
    assert!((covered + induced.residual_mass() * (1.0 / 3.0) - 1.0 / 3.0).abs() < 1e-12);
    for b in induced.branches() {
        let mid = 0.5 * (b.left + b.right);
        let (y, i) = induced.evaluate(mid).unwrap();
        assert_eq!(induced.branches()[i].return_time, b.return_time);
        assert!((0.0..1.0 / 3.0).contains(&y));
    }
}

#[test]
fn refinement_keeps_the_axioms() {
    let f = ExpandingMarkovMap::doubling();
    let g = f.refine(3).unwrap();
    // Cylinders of four symbols.
    assert_eq!(g.len(), 16);
    assert!(g.validate_axioms(64).passed());
    assert!(ExpandingMarkovMap::three_branch()
        .refine(2)
        .unwrap()
        .validate_axioms(64)
        .passed());
}

#[test]
fn boundary_points_are_rejected() {
    let f = ExpandingMarkovMap::doubling();
    assert!(matches!(f.evaluate(0.5), Err(Error::BoundaryPoint { .. })));
}

/// Binary-expansion formula for the doubling map: the periodic point with
/// itinerary `w` is `Σ w_i 2^{p−1−i} / (2^p − 1)`.
fn binary_periodic_point(w: &[usize]) -> Q {
    let p = w.len();
    let num = w
        .iter()
        .enumerate()
        .fold(0i64, |a, (i, &s)| a + (s as i64) * (1i64 << (p - 1 - i)));
    q(num, (1i64 << p) - 1)
}

proptest! {
    #[test]
    fn doubling_periodic_points(w in prop::collection::vec(0usize..2, 1..14)) {
        let f = ExpandingMarkovMap::doubling();
        let exact = f.periodic_point_exact(&w).unwrap().unwrap();
        prop_assert_eq!(&exact, &binary_periodic_point(&w));
        let x = f.periodic_point(&w).unwrap();
        prop_assert!(f.periodic_residual(x, &w) <= 1e-12, "{}", format_itinerary(&w));
    }

    // Forward iteration amplifies the rounding of x by 3 per step, so the
    // 1e-12 residual is only reachable for short periods.
    #[test]
    fn three_branch_periodic_points(w in prop::collection::vec(0usize..3, 1..8)) {
        let f = ExpandingMarkovMap::three_branch();
        match f.check_admissible(&w, true) {
            Ok(()) => {
                let x = f.periodic_point(&w).unwrap();
                prop_assert!(f.periodic_residual(x, &w) <= 1e-12);
                let e = f.periodic_point_exact(&w).unwrap().unwrap();
                prop_assert!((mixlab::rational::to_f64(&e) - x).abs() <= 1e-12);
            }
            Err(e) => {
                let inadmissible = matches!(e, Error::InadmissibleItinerary { from: 0, to: 0 });
                prop_assert!(inadmissible);
            }
        }
    }

    #[test]
    fn evaluate_lands_in_domain(x in 0.0f64..1.0) {
        let f = ExpandingMarkovMap::three_branch();
        if let Ok((y, k)) = f.evaluate(x) {
            prop_assert!((0.0..1.0).contains(&y) || (y - 1.0).abs() < 1e-12);
            prop_assert!(f.branch(k).contains(x));
            prop_assert!((f.branch(k).inverse(y) - x).abs() < 1e-12);
        }
    }
}
