//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function wraps a plain Rust function returning
//! `Result<_, String>`, so the logic is testable without a browser.

use std::sync::Arc;

use mixlab::suspension::{fit_rate, FitVerdict, TimeGrid};
use mixlab::{
    ExpandingMarkovMap, PhaseObservable, RoofFunction, RoofKind, SolenoidModel, SolenoidParams, SuspensionSemiflow,
    UlamOperator,
};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct DensityView {
    values: Vec<f64>,
    second_modulus: f64,
}

#[wasm_bindgen]
impl DensityView {
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn second_modulus(&self) -> f64 {
        self.second_modulus
    }
}

/// Ulam density of a built-in map and the modulus of the second eigenvalue.
pub fn density_of(map: &str, bins: usize) -> Result<DensityView, String> {
    let f = ExpandingMarkovMap::builtin(map).ok_or_else(|| format!("unknown map `{map}`"))?;
    if !(1..=4096).contains(&bins) {
        return Err(format!("bins must lie in 1..=4096, got {bins}"));
    }
    let u = UlamOperator::build(&Arc::new(f), bins).map_err(|e| e.to_string())?;
    let d = u.invariant_density(1e-13).map_err(|e| e.to_string())?;
    let second_modulus = u.spectral_gap(&d).map_or(f64::NAN, |s| s.second_modulus);
    Ok(DensityView {
        values: d.values().to_vec(),
        second_modulus,
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SolenoidView {
    points: Vec<f64>,
    domination: f64,
}

#[wasm_bindgen]
impl SolenoidView {
    /// Flat `θ, Re z, Im z` triples.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn domination(&self) -> f64 {
        self.domination
    }
}

pub fn solenoid_of(contraction: f64, offset: f64, n: usize, seed: u64) -> Result<SolenoidView, String> {
    let m = SolenoidModel::build(SolenoidParams {
        contraction,
        offset,
        ..SolenoidParams::default()
    })
    .map_err(|e| e.to_string())?;
    let points = m
        .attractor_sample(n.min(50_000), 30, seed)
        .iter()
        .flat_map(|p| [p.theta, p.z[0], p.z[1]])
        .collect();
    Ok(SolenoidView {
        points,
        domination: m.check_domination(256).product,
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct CorrelationView {
    times: Vec<f64>,
    values: Vec<f64>,
    gamma: f64,
    decays: bool,
}

#[wasm_bindgen]
impl CorrelationView {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Fitted decay rate, `NaN` when the fit window was too short.
    #[wasm_bindgen(getter)]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[wasm_bindgen(getter)]
    pub fn decays(&self) -> bool {
        self.decays
    }
}

/// Correlation of the default observable for the roof `1 + a·x²` over the
/// doubling map. `a = 0` is the constant roof, which does not mix.
pub fn correlation_of(a: f64, samples: usize, seed: u64) -> Result<CorrelationView, String> {
    if !(0.0..=4.0).contains(&a) {
        return Err(format!("a must lie in [0, 4], got {a}"));
    }
    let coeff = mixlab::rational::from_f64(a).ok_or("a is not finite")?;
    let f = Arc::new(ExpandingMarkovMap::doubling());
    let kind = RoofKind::Polynomial(vec![mixlab::rational::qi(1), mixlab::rational::qi(0), coeff]);
    let roof = RoofFunction::new(f, kind).map_err(|e| e.to_string())?;
    let flow = SuspensionSemiflow::new(
        Arc::new(roof),
        Arc::new(mixlab::InvariantDensity::uniform(0.0, 1.0, 64)),
    );
    let rbar = flow.mean_roof();
    let phi = PhaseObservable::mixing_default(rbar);
    let s = flow.correlation(
        &phi,
        &phi,
        TimeGrid::default_for(rbar),
        samples.clamp(100, 200_000),
        seed,
    );
    let (gamma, decays) = match fit_rate(&s, 3.0) {
        Ok(fit) => (fit.gamma, fit.verdict == FitVerdict::Decay),
        Err(_) => (f64::NAN, false),
    };
    Ok(CorrelationView {
        times: s.times,
        values: s.values,
        gamma,
        decays,
    })
}

#[wasm_bindgen]
pub fn density(map: &str, bins: usize) -> Result<DensityView, JsError> {
    density_of(map, bins).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solenoid(contraction: f64, offset: f64, n: usize, seed: u64) -> Result<SolenoidView, JsError> {
    solenoid_of(contraction, offset, n, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn correlation(a: f64, samples: usize, seed: u64) -> Result<CorrelationView, JsError> {
    correlation_of(a, samples, seed).map_err(|e| JsError::new(&e))
}
