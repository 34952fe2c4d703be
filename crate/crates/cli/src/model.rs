//! Builds library objects from a configuration.

use std::sync::Arc;

use mixlab::skew_product::FiberFamily;
use mixlab::{
    ExpandingMarkovMap, HyperbolicSkewProduct, InvariantDensity, PhaseObservable, RoofFunction, RoofKind,
    SolenoidModel, SolenoidParams, SuspensionSemiflow, UlamOperator,
};

use crate::config::{rationals, ExperimentConfig, FiberKind, ModelKind, RoofType};
use crate::error::CliError;

fn missing(key: &str) -> CliError {
    CliError::Config(format!("roof.{key} is required for this roof kind"))
}

pub fn solenoid_params(cfg: &ExperimentConfig) -> SolenoidParams {
    let d = SolenoidParams::default();
    let m = &cfg.model;
    SolenoidParams {
        degree: m.degree.unwrap_or(d.degree),
        contraction: m.contraction.unwrap_or(d.contraction),
        offset: m.offset.unwrap_or(d.offset),
        fiber_radius: m.fiber_radius.unwrap_or(d.fiber_radius),
    }
}

/// The base map; a solenoid model uses the circle map of its degree.
pub fn base_map(cfg: &ExperimentConfig) -> Result<Arc<ExpandingMarkovMap>, CliError> {
    let f = match (cfg.model.kind, &cfg.map) {
        (ModelKind::Solenoid, _) => ExpandingMarkovMap::circle(solenoid_params(cfg).degree.max(2)),
        (_, Some(m)) => m.build().map_err(CliError::Config)?,
        (_, None) => ExpandingMarkovMap::builtin(&cfg.model.map)
            .ok_or_else(|| CliError::Config(format!("unknown map `{}`", cfg.model.map)))?,
    };
    Ok(Arc::new(f))
}

pub fn roof(cfg: &ExperimentConfig, map: &Arc<ExpandingMarkovMap>) -> Result<Option<Arc<RoofFunction>>, CliError> {
    let Some(r) = &cfg.roof else { return Ok(None) };
    let kind = match r.kind {
        RoofType::Constant => {
            let v = r.value.as_ref().ok_or_else(|| missing("value"))?;
            RoofKind::Constant(rationals(std::slice::from_ref(v)).remove(0))
        }
        RoofType::Polynomial => RoofKind::Polynomial(rationals(r.coeffs.as_deref().ok_or_else(|| missing("coeffs"))?)),
        RoofType::PiecewiseConstant => {
            RoofKind::PiecewiseConstant(rationals(r.values.as_deref().ok_or_else(|| missing("values"))?))
        }
        RoofType::PiecewisePolynomial => RoofKind::PiecewisePolynomial(
            r.branches
                .as_deref()
                .ok_or_else(|| missing("branches"))?
                .iter()
                .map(|b| rationals(b))
                .collect(),
        ),
        RoofType::Trigonometric => RoofKind::Trigonometric {
            constant: r.constant.ok_or_else(|| missing("constant"))?,
            cos: r.cos.clone().unwrap_or_default(),
            sin: r.sin.clone().unwrap_or_default(),
        },
    };
    let mut roof = RoofFunction::new(map.clone(), kind)?;
    for b in &r.bumps {
        roof = roof.perturb_bump(b.center, b.radius, b.amplitude, &b.protect, b.protect_steps)?;
    }
    Ok(Some(Arc::new(roof)))
}

pub fn require_roof(cfg: &ExperimentConfig, map: &Arc<ExpandingMarkovMap>) -> Result<Arc<RoofFunction>, CliError> {
    roof(cfg, map)?.ok_or_else(|| CliError::Config("a [roof] section is required for this subcommand".into()))
}

pub fn solenoid(cfg: &ExperimentConfig) -> Result<SolenoidModel, CliError> {
    Ok(SolenoidModel::build(solenoid_params(cfg))?)
}

/// The skew product of a `skew` or `solenoid` model.
pub fn skew(
    cfg: &ExperimentConfig,
    map: &Arc<ExpandingMarkovMap>,
) -> Result<Option<Arc<HyperbolicSkewProduct>>, CliError> {
    let m = &cfg.model;
    match m.kind {
        ModelKind::Map => Ok(None),
        ModelKind::Solenoid => Ok(Some(solenoid(cfg)?.skew().clone())),
        ModelKind::Skew => {
            let radius = m.fiber_radius.unwrap_or(1.0);
            let (family, kappa) = match m.fiber.unwrap_or(FiberKind::Solenoid) {
                FiberKind::Solenoid => {
                    let c = m.contraction.unwrap_or(20.0);
                    let family = FiberFamily::Solenoid {
                        contraction: c,
                        offset: m.offset.unwrap_or(0.25),
                    };
                    (family, m.kappa.unwrap_or(1.0 / c))
                }
                FiberKind::Scaled => {
                    let s = m.factor.unwrap_or(0.5);
                    (FiberFamily::Scaled { factor: s }, m.kappa.unwrap_or(s.abs()))
                }
            };
            Ok(Some(Arc::new(HyperbolicSkewProduct::new(
                map.clone(),
                family,
                radius,
                kappa,
            )?)))
        }
    }
}

pub fn density(
    cfg: &ExperimentConfig,
    map: &Arc<ExpandingMarkovMap>,
) -> Result<(UlamOperator, InvariantDensity), CliError> {
    let ulam = UlamOperator::build(map, cfg.run.bins)?;
    let d = ulam.invariant_density(cfg.run.density_tolerance)?;
    Ok((ulam, d))
}

pub fn semiflow(cfg: &ExperimentConfig) -> Result<SuspensionSemiflow, CliError> {
    let map = base_map(cfg)?;
    let roof = require_roof(cfg, &map)?;
    let (_, d) = density(cfg, &map)?;
    let d = Arc::new(d);
    Ok(match skew(cfg, &map)? {
        Some(s) => SuspensionSemiflow::over_skew(s, roof, d)?,
        None => SuspensionSemiflow::new(roof, d),
    })
}

pub const OBSERVABLES: &[&str] = &[
    "mixing_default",
    "cos_u",
    "constant",
    "mixing_fiber_re",
    "mixing_fiber_im",
];

/// Named test functions; `cos_u` has period `r̄`.
pub fn observable(name: &str, mean_roof: f64) -> Result<PhaseObservable, CliError> {
    Ok(match name {
        "mixing_default" => PhaseObservable::mixing_default(mean_roof),
        "cos_u" => PhaseObservable::cos_u(mean_roof),
        "constant" => PhaseObservable::constant(1.0),
        "mixing_fiber_re" => PhaseObservable::mixing_fiber(mean_roof, 0),
        "mixing_fiber_im" => PhaseObservable::mixing_fiber(mean_roof, 1),
        other => {
            return Err(CliError::Config(format!(
                "unknown observable `{other}` (known: {})",
                OBSERVABLES.join(", ")
            )))
        }
    })
}
