use mixlab_web::{correlation_of, density_of, solenoid_of};

#[test]
fn three_branch_density() {
    let d = density_of("three_branch", 243).unwrap();
    let v = d.values();
    assert_eq!(v.len(), 243);
    assert!((v[0] - 0.75).abs() < 1e-9 && (v[200] - 1.125).abs() < 1e-9);
    assert!((d.second_modulus() - 1.0 / 3.0).abs() < 1e-6);
    assert!(density_of("tent", 10).is_err());
    assert!(density_of("doubling", 0).is_err());
}

#[test]
fn solenoid_cloud_and_domination() {
    let s = solenoid_of(20.0, 0.25, 500, 1).unwrap();
    let p = s.points();
    assert_eq!(p.len(), 1500);
    assert!(p.chunks(3).all(|c| c[1].hypot(c[2]) <= 0.3 + 1e-12));
    assert!(s.domination() < 0.35);
    assert!(solenoid_of(2.0, 0.9, 10, 1).is_err());
}

#[test]
fn correlation_dichotomy() {
    let flat = correlation_of(0.0, 20_000, 3).unwrap();
    assert!(!flat.decays());
    let xsq = correlation_of(1.0, 50_000, 3).unwrap();
    assert_eq!(xsq.times().len(), xsq.values().len());
    assert!(xsq.values()[0] > 0.0);
    assert!(correlation_of(-1.0, 10, 0).is_err());
}
