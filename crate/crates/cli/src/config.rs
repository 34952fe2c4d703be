//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use mixlab::rational::{self, Q};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    /// Overrides `model.map` when present.
    pub map: Option<MapSection>,
    pub roof: Option<RoofSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Map,
    Skew,
    Solenoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    Solenoid,
    Scaled,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_kind")]
    pub kind: ModelKind,
    #[serde(default = "default_map")]
    pub map: String,
    /// Fibre family of a `skew` model.
    pub fiber: Option<FiberKind>,
    pub degree: Option<usize>,
    pub contraction: Option<f64>,
    pub offset: Option<f64>,
    pub fiber_radius: Option<f64>,
    /// Factor of the `scaled` family.
    pub factor: Option<f64>,
    pub kappa: Option<f64>,
}

fn default_kind() -> ModelKind {
    ModelKind::Map
}

fn default_map() -> String {
    "doubling".into()
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: default_kind(),
            map: default_map(),
            fiber: None,
            degree: None,
            contraction: None,
            offset: None,
            fiber_radius: None,
            factor: None,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Builtin,
    AffineMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    Interval,
    Circle,
}

/// A base map: a built-in by name, or a piecewise-affine Markov map.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub kind: MapKind,
    pub name: Option<String>,
    #[serde(default)]
    pub domain: Domain,
    pub breakpoints: Option<Vec<Number>>,
    pub slopes: Option<Vec<Number>>,
    pub intercepts: Option<Vec<Number>>,
    /// Row `i` lists 0/1 flags for the cells branch `i` covers.
    pub transitions: Option<Vec<Vec<u8>>>,
}

impl MapSection {
    /// Builds the map; the expansion bound is `1/min|slope|`.
    pub fn build(&self) -> Result<mixlab::ExpandingMarkovMap, String> {
        use mixlab::{DomainKind, ExpandingMarkovMap};
        match self.kind {
            MapKind::Builtin => {
                let name = self.name.as_deref().unwrap_or("doubling");
                ExpandingMarkovMap::builtin(name).ok_or_else(|| {
                    let names = ExpandingMarkovMap::builtin_names().join(", ");
                    format!("unknown map `{name}` (known: {names})")
                })
            }
            MapKind::AffineMarkov => {
                let list = |key: &str, l: &Option<Vec<Number>>| -> Result<Vec<Q>, String> {
                    let l = l
                        .as_ref()
                        .ok_or_else(|| format!("map.{key} is required for affine_markov"))?;
                    l.iter()
                        .map(|n| {
                            n.to_rational()
                                .ok_or_else(|| format!("map.{key} entries must be rationals"))
                        })
                        .collect()
                };
                let breaks = list("breakpoints", &self.breakpoints)?;
                let slopes = list("slopes", &self.slopes)?;
                let intercepts = list("intercepts", &self.intercepts)?;
                let rows = self
                    .transitions
                    .as_ref()
                    .ok_or("map.transitions is required for affine_markov")?;
                let transitions = rows.iter().map(|r| r.iter().map(|&a| a != 0).collect()).collect();
                let min_slope = slopes
                    .iter()
                    .map(|s| rational::to_f64(s).abs())
                    .fold(f64::INFINITY, f64::min);
                let kind = match self.domain {
                    Domain::Interval => DomainKind::Interval,
                    Domain::Circle => DomainKind::Circle,
                };
                ExpandingMarkovMap::affine(
                    self.name.as_deref().unwrap_or("affine_markov"),
                    kind,
                    &breaks,
                    &slopes,
                    &intercepts,
                    transitions,
                    1.0 / min_slope,
                    0.0,
                )
                .map_err(|e| e.to_string())
            }
        }
    }
}

/// A rational written as `"1/3"`, `"0.25"`, an integer or a float.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn to_rational(&self) -> Option<Q> {
        match self {
            Number::Int(n) => Some(rational::qi(*n)),
            Number::Float(x) => rational::from_f64(*x),
            Number::Text(s) => rational::parse(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoofType {
    Constant,
    Polynomial,
    PiecewiseConstant,
    PiecewisePolynomial,
    Trigonometric,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoofSection {
    pub kind: RoofType,
    pub value: Option<Number>,
    /// Ascending coefficients of a polynomial roof.
    pub coeffs: Option<Vec<Number>>,
    /// One constant per branch.
    pub values: Option<Vec<Number>>,
    /// One coefficient list per branch.
    pub branches: Option<Vec<Vec<Number>>>,
    pub constant: Option<f64>,
    pub cos: Option<Vec<f64>>,
    pub sin: Option<Vec<f64>>,
    #[serde(default)]
    pub bumps: Vec<BumpSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSection {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub protect: Vec<f64>,
    #[serde(default = "default_protect_steps")]
    pub protect_steps: usize,
}

fn default_protect_steps() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Witness,
    NoWitness,
    Decay,
    NoDecay,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_bins")]
    pub bins: usize,
    #[serde(default = "d_depth")]
    pub depth: usize,
    #[serde(default = "d_max_period")]
    pub max_period: usize,
    #[serde(default = "d_probes")]
    pub probes: usize,
    #[serde(default = "d_pairs")]
    pub pairs: usize,
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Defaults to `30·r̄`.
    pub t_max: Option<f64>,
    #[serde(default = "d_noise_k")]
    pub noise_k: f64,
    /// Start of the fit window; defaults to the first grid point.
    pub t_start: Option<f64>,
    /// Quiet time ending the fit window; 0 keeps the last point above the floor.
    #[serde(default)]
    pub quiet_time: f64,
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    #[serde(default = "d_density_tol")]
    pub density_tolerance: f64,
    #[serde(default)]
    pub base_cell: usize,
    #[serde(default = "d_tail_depth")]
    pub tail_depth: usize,
    #[serde(default = "d_tdist_depth")]
    pub tdist_depth: usize,
    #[serde(default = "d_tdist_grid")]
    pub tdist_grid: usize,
    /// Transfer function `γ` (ascending coefficients) for the coboundary certificate.
    pub gamma: Option<Vec<Number>>,
    #[serde(default = "d_observable")]
    pub phi: String,
    #[serde(default = "d_observable")]
    pub psi: String,
    #[serde(default = "d_cloud")]
    pub cloud_points: usize,
    #[serde(default = "d_burn_in")]
    pub burn_in: usize,
    #[serde(default = "d_dom_probes")]
    pub domination_probes: usize,
    pub expect: Option<Expectation>,
}

fn d_seed() -> u64 {
    42
}
fn d_samples() -> usize {
    100_000
}
fn d_bins() -> usize {
    1024
}
fn d_depth() -> usize {
    14
}
fn d_max_period() -> usize {
    8
}
fn d_probes() -> usize {
    10_000
}
fn d_pairs() -> usize {
    100_000
}
fn d_dt() -> f64 {
    0.1
}
fn d_noise_k() -> f64 {
    3.0
}
fn d_tolerance() -> f64 {
    1e-10
}
fn d_density_tol() -> f64 {
    1e-12
}
fn d_tail_depth() -> usize {
    12
}
fn d_tdist_depth() -> usize {
    40
}
fn d_tdist_grid() -> usize {
    16
}
fn d_observable() -> String {
    "mixing_default".into()
}
fn d_cloud() -> usize {
    5000
}
fn d_burn_in() -> usize {
    30
}
fn d_dom_probes() -> usize {
    1024
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum Format {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "csv+svg")]
    CsvSvg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "csv+svg" => Ok(Format::CsvSvg),
            _ => Err(format!("unknown format `{s}`, expected `csv` or `csv+svg`")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    /// File name prefix; defaults to the subcommand name.
    pub prefix: Option<String>,
}

fn d_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: d_dir(),
            format: Format::Csv,
            prefix: None,
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, for error messages.
fn line_of(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&src).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(src: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(src).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.check(src)?;
        Ok(cfg)
    }

    fn check(&self, src: &str) -> Result<(), CliError> {
        let bad = |section: &str, key: &str, why: &str| {
            let at = line_of(src, section, key).map_or(String::new(), |l| format!(" (line {l})"));
            Err(CliError::Config(format!("{section}.{key}{at}: {why}")))
        };
        let r = &self.run;
        for (key, v) in [
            ("tolerance", r.tolerance),
            ("density_tolerance", r.density_tolerance),
            ("noise_k", r.noise_k),
            ("dt", r.dt),
        ] {
            if !(v > 0.0) {
                return bad("run", key, "must be positive");
            }
        }
        if r.t_max.is_some_and(|t| !(t > 0.0)) {
            return bad("run", "t_max", "must be positive");
        }
        if !(r.quiet_time >= 0.0) {
            return bad("run", "quiet_time", "must be non-negative");
        }
        for (key, v) in [
            ("samples", r.samples),
            ("bins", r.bins),
            ("depth", r.depth),
            ("probes", r.probes),
            ("pairs", r.pairs),
            ("tail_depth", r.tail_depth),
            ("tdist_depth", r.tdist_depth),
            ("tdist_grid", r.tdist_grid),
        ] {
            if v == 0 {
                return bad("run", key, "must be at least 1");
            }
        }
        if r.max_period < 2 {
            return bad("run", "max_period", "must be at least 2");
        }
        if let Some(g) = &r.gamma {
            if g.iter().any(|n| n.to_rational().is_none()) {
                return bad("run", "gamma", "coefficients must be rationals");
            }
        }
        match &self.map {
            Some(m) => {
                if let Err(e) = m.build() {
                    return bad("map", "kind", &e);
                }
            }
            None if mixlab::ExpandingMarkovMap::builtin(&self.model.map).is_none() => {
                let names = mixlab::ExpandingMarkovMap::builtin_names().join(", ");
                return bad(
                    "model",
                    "map",
                    &format!("unknown map `{}` (known: {names})", self.model.map),
                );
            }
            None => {}
        }
        if let Some(roof) = &self.roof {
            for (key, list) in [("coeffs", &roof.coeffs), ("values", &roof.values)] {
                if list
                    .as_ref()
                    .is_some_and(|l| l.iter().any(|n| n.to_rational().is_none()))
                {
                    return bad("roof", key, "entries must be rationals");
                }
            }
            if roof.value.as_ref().is_some_and(|n| n.to_rational().is_none()) {
                return bad("roof", "value", "must be a rational");
            }
            if let Some(bs) = &roof.branches {
                if bs.iter().flatten().any(|n| n.to_rational().is_none()) {
                    return bad("roof", "branches", "entries must be rationals");
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn rationals(list: &[Number]) -> Vec<Q> {
    list.iter()
        .map(|n| n.to_rational().expect("checked when the config was parsed"))
        .collect()
}
