//! Deterministic probe sequences.

/// Golden-ratio Kronecker sequence in the open unit interval, starting at 1/2.
pub fn kronecker(n: usize) -> impl Iterator<Item = f64> {
    const G: f64 = 0.618_033_988_749_894_9;
    (0..n).map(|k| (0.5 + k as f64 * G).fract())
}

/// Second coordinate for two-dimensional probe sets (plastic-number sequence).
pub fn kronecker2(n: usize) -> impl Iterator<Item = (f64, f64)> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    (0..n).map(|k| {
        let k = k as f64;
        ((0.5 + k * A1).fract(), (0.5 + k * A2).fract())
    })
}

/// Probe points strictly inside `[a, b)`.
pub fn interior(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    kronecker(n).map(move |t| a + (b - a) * t)
}
