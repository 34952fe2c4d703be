use std::f64::consts::{PI, TAU};

use mixlab::solenoid::AttractorPoint;
use mixlab::{Error, SolenoidModel, SolenoidParams};
use proptest::prelude::*;

fn model(degree: usize, contraction: f64, offset: f64) -> Result<SolenoidModel, Error> {
    SolenoidModel::build(SolenoidParams {
        degree,
        contraction,
        offset,
        fiber_radius: 1.0,
    })
}

/// Peels `depth` inverse branches off `(θ, z)`: the preimage branch is the
/// image disk containing `z`, then `z ← c·(z − ρ·e(θ₁))`. Returns the distance
/// from `z` to the centre of the depth-`depth` disk it was decoded into.
fn decode(m: &SolenoidModel, p: &AttractorPoint, depth: usize) -> Option<f64> {
    let SolenoidParams {
        degree,
        contraction: c,
        offset: rho,
        ..
    } = m.params();
    let d = degree as f64;
    let mut theta = p.theta;
    let mut z = p.z;
    let mut centres = Vec::new();
    for _ in 0..depth {
        let t1 = (0..degree).map(|j| (theta + j as f64) / d).find(|&t| {
            let e = [rho * (TAU * t).cos(), rho * (TAU * t).sin()];
            (z[0] - e[0]).hypot(z[1] - e[1]) <= 1.0 / c + 1e-9
        })?;
        centres.push(t1);
        let e = [rho * (TAU * t1).cos(), rho * (TAU * t1).sin()];
        z = [c * (z[0] - e[0]), c * (z[1] - e[1])];
        theta = t1;
    }
    // Centre of the nested disk: fold the inverse branches forward from 0.
    let mut w = [0.0, 0.0];
    for &t in centres.iter().rev() {
        w = m.skew().fiber_map(t, w);
    }
    Some((p.z[0] - w[0]).hypot(p.z[1] - w[1]))
}

#[test]
fn attractor_points_decode_into_nested_disks() {
    let m = model(2, 20.0, 0.25).unwrap();
    let depth = 8;
    let bound = 0.05f64.powi(depth as i32);
    for p in m.attractor_sample(2000, depth, 12) {
        let dist = decode(&m, &p, depth).expect("every point lies in an image disk");
        assert!(dist <= bound * (1.0 + 1e-6), "{dist} > {bound}");
    }
    for p in m.attractor_sample(200, 30, 13) {
        assert!(decode(&m, &p, 8).unwrap() <= bound * (1.0 + 1e-6));
    }
}

#[test]
fn contraction_ratio_is_exact() {
    let m = model(2, 20.0, 0.25).unwrap();
    let rep = m.validate(100_000);
    assert!(rep.passed());
    assert!((rep.worst_ratio - 0.05).abs() < 1e-12);
    assert!(rep.worst_image_radius <= m.image_radius() + 1e-15);
}

#[test]
fn geometry_rejections() {
    assert!(matches!(model(2, 2.0, 0.9), Err(Error::GeometryViolation(s)) if s.starts_with("invariance")));
    assert!(matches!(model(2, 5.0, 0.15), Err(Error::GeometryViolation(s)) if s.starts_with("injectivity")));
    assert!(model(1, 20.0, 0.25).is_err());
    assert!(model(3, 20.0, 0.25).is_ok());
}

#[test]
fn domination_encloses_the_supremum() {
    // Exact sup of d² + (2πρ)²(sin² + cos²) + 1/c² is attained everywhere.
    for (d, c, rho) in [(2usize, 20.0, 0.25), (2, 10.0, 0.5), (3, 30.0, 0.3)] {
        let rep = model(d, c, rho).unwrap().check_domination(1024);
        let exact = ((d * d) as f64 + (TAU * rho).powi(2) + 1.0 / (c * c)) / c;
        assert!(rep.product >= exact, "{rep:?}");
        // Per-cell enclosures overshoot by O(cell width).
        assert!(rep.product <= exact * (1.0 + 2.0 * PI / 1024.0 * 2.0), "{rep:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn domination_decreases_with_contraction(c in 12.0f64..60.0, k in 1.01f64..3.0) {
        let a = model(2, c, 0.25).unwrap().check_domination(256);
        let b = model(2, c * k, 0.25).unwrap().check_domination(256);
        prop_assert!(b.product < a.product);
    }

    #[test]
    fn samples_are_reproducible(seed in 0u64..1000) {
        let m = model(2, 20.0, 0.25).unwrap();
        let a = m.attractor_sample(16, 10, seed);
        let b = m.attractor_sample(16, 10, seed);
        prop_assert_eq!(a, b);
    }
}
