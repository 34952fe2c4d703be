use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use mixlab::rational::qi;
use mixlab::suspension::{fit_rate, CodedPoint, FitVerdict, TimeGrid};
use mixlab::{
    ExpandingMarkovMap, InvariantDensity, PhaseObservable, PhasePoint, RoofFunction, RoofKind, SuspensionSemiflow,
};
use proptest::prelude::*;

fn flow(kind: RoofKind) -> SuspensionSemiflow {
    let f = Arc::new(ExpandingMarkovMap::doubling());
    let r = Arc::new(RoofFunction::new(f, kind).unwrap());
    SuspensionSemiflow::new(r, Arc::new(InvariantDensity::uniform(0.0, 1.0, 64)))
}

fn xsq() -> SuspensionSemiflow {
    flow(RoofKind::Polynomial(vec![qi(1), qi(0), qi(1)]))
}

fn mean_and_se(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = v.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn flow_examples() {
    let s = flow(RoofKind::Constant(qi(1)));
    let p = s.flow_to(&PhasePoint::new(0.3, 0.3), 0.4).unwrap();
    assert_eq!(p.x, 0.3);
    assert!((p.u - 0.7).abs() < 1e-15);
    let p = s.flow_to(&PhasePoint::new(0.3, 0.9), 0.2).unwrap();
    assert!((p.x - 0.6).abs() < 1e-15 && (p.u - 0.1).abs() < 1e-12);
    let p = xsq().flow_to(&PhasePoint::new(0.2, 0.0), 5.2).unwrap();
    assert!((p.x - 0.2).abs() < 1e-12 && p.u.abs() < 1e-9, "{p:?}");
}

/// Closed-form means under `η̂ = 1{u < 1 + x²} dx du / (4/3)`.
type Named = (&'static str, fn(&PhasePoint) -> f64, f64);

fn observables() -> Vec<Named> {
    vec![
        ("x", |p| p.x, 9.0 / 16.0),
        ("x^2", |p| p.x * p.x, 0.4),
        ("u", |p| p.u, 0.7),
        ("u/r", |p| p.u / (1.0 + p.x * p.x), 0.5),
        ("cos 2πx", |p| (TAU * p.x).cos(), 3.0 / (8.0 * PI * PI)),
    ]
}

#[test]
fn invariant_samples_are_stationary() {
    let s = xsq();
    let samples = s.sample_invariant(100_000, 3);
    for t in [0.0, 0.5, 1.0, 5.0] {
        let pushed: Vec<PhasePoint> = samples.iter().filter_map(|p| s.flow_to(p, t).ok()).collect();
        assert!(pushed.len() >= samples.len() - 10);
        for (name, f, exact) in observables() {
            let (m, se) = mean_and_se(pushed.iter().map(f));
            assert!(
                (m - exact).abs() <= 3.0 * se,
                "t = {t}, {name}: {m} vs {exact} (se {se})"
            );
        }
    }
}

#[test]
fn sampled_roof_statistics() {
    let s = xsq();
    assert!((s.mean_roof() - 4.0 / 3.0).abs() < 1e-6);
    let samples = s.sample_invariant(100_000, 4);
    // The base marginal is r·ν/ν(r), so E[1/r] = 1/ν(r) and E[r] = ν(r²)/ν(r).
    let (inv, se) = mean_and_se(samples.iter().map(|p| 1.0 / (1.0 + p.x * p.x)));
    assert!((1.0 / inv - 4.0 / 3.0).abs() <= 3.0 * se / (inv * inv));
    let (r, se) = mean_and_se(samples.iter().map(|p| 1.0 + p.x * p.x));
    assert!((r - 1.4).abs() <= 3.0 * se);
    // Histogram against (1 + x²)/(4/3).
    let bins = 10;
    let mut counts = vec![0usize; bins];
    for p in &samples {
        counts[((p.x * bins as f64) as usize).min(bins - 1)] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let (a, b) = (i as f64 / bins as f64, (i + 1) as f64 / bins as f64);
        let prob = ((b - a) + (b.powi(3) - a.powi(3)) / 3.0) * 0.75;
        let n = samples.len() as f64;
        let sd = (n * prob * (1.0 - prob)).sqrt();
        assert!((c as f64 - n * prob).abs() <= 3.0 * sd, "bin {i}");
    }
}

#[test]
fn constant_roof_correlations_do_not_decay() {
    let s = flow(RoofKind::Constant(qi(1)));
    let phi = PhaseObservable::cos_u(1.0);
    let series = s.correlation(&phi, &phi, TimeGrid::new(0.05, 3.0).unwrap(), 20_000, 9);
    for (i, &t) in series.times.iter().enumerate() {
        let want = 0.5 * (TAU * t).cos();
        assert!(
            (series.values[i] - want).abs() <= 4.0 * series.std_errors[i] + 1e-9,
            "t = {t}"
        );
    }
    let (r0, _) = series.at(0.0).unwrap();
    assert!(r0 >= 0.0);
    for n in [1.0, 2.0, 3.0] {
        let (rn, se) = series.at(n).unwrap();
        assert!((rn.abs() - r0).abs() <= 3.0 * se + 1e-9);
    }
    let long = s.correlation(&phi, &phi, TimeGrid::new(0.1, 30.0).unwrap(), 4_000, 9);
    assert_eq!(fit_rate(&long, 3.0).unwrap().verdict, FitVerdict::NoDecay);
}

#[test]
fn constant_test_function_has_no_correlation() {
    let s = xsq();
    let series = s.correlation(
        &PhaseObservable::mixing_default(s.mean_roof()),
        &PhaseObservable::constant(2.0),
        TimeGrid::new(0.5, 5.0).unwrap(),
        2_000,
        1,
    );
    assert!(series.values.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn correlation_is_independent_of_thread_count() {
    let s = xsq();
    let phi = PhaseObservable::mixing_default(s.mean_roof());
    let grid = TimeGrid::new(0.25, 4.0).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| s.correlation(&phi, &phi, grid, 5_000, 77))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn temporal_distance_vanishes_only_for_integrable_roofs() {
    let pts: Vec<f64> = (0..16).map(|i| (i as f64 + 0.5) / 16.0).collect();
    let worst = |s: &SuspensionSemiflow, depth: usize| -> f64 {
        let mut m: f64 = 0.0;
        for &x in &pts {
            for &y in &pts {
                let p = CodedPoint::new(x, vec![0]);
                let q = CodedPoint::new(y, vec![1]);
                m = m.max(s.temporal_distance(&p, &q, depth).unwrap().value.abs());
            }
        }
        m
    };
    assert_eq!(worst(&flow(RoofKind::Constant(qi(1))), 30), 0.0);
    assert_eq!(worst(&flow(RoofKind::PiecewiseConstant(vec![qi(1), qi(3)])), 30), 0.0);
    let s = xsq();
    let (a, b) = (worst(&s, 30), worst(&s, 40));
    assert!(b > 0.1);
    assert!((a - b).abs() <= 0.01 * b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn semigroup(x in 0.001f64..0.999, frac in 0.0f64..1.0, t1 in 0.0f64..6.0, t2 in 0.0f64..6.0) {
        let s = xsq();
        prop_assume!((x - 0.5).abs() > 1e-9);
        let p = PhasePoint::new(x, frac * (1.0 + x * x));
        let (Ok(a), Ok(mid)) = (s.flow_to(&p, t1 + t2), s.flow_to(&p, t1)) else {
            return Ok(());
        };
        let Ok(b) = s.flow_to(&mid, t2) else { return Ok(()) };
        let near_seam = |q: &PhasePoint| q.u < 1e-9 || (1.0 + q.x * q.x - q.u) < 1e-9;
        if a.x == b.x {
            prop_assert!((a.u - b.u).abs() <= 1e-9);
        } else {
            prop_assert!(near_seam(&a) || near_seam(&b), "{a:?} vs {b:?}");
        }
    }
}
