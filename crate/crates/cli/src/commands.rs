//! The experiment subcommands. Each writes its tables and returns whether its checks passed.

use mixlab::markov_maps::format_itinerary;
use mixlab::roof::Verdict;
use mixlab::suspension::{fit_rate_windowed, CodedPoint, FitVerdict, TimeGrid};
use mixlab::{Error, Status, ValidationReport};

use crate::config::{rationals, Expectation, ExperimentConfig};
use crate::error::CliError;
use crate::model;
use crate::output::{num, status, Output, Series, Table};

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub passed: bool,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            summary: Vec::new(),
        }
    }

    fn note(&mut self, line: String) {
        self.summary.push(line);
    }

    fn check(&mut self, ok: bool) {
        self.passed &= ok;
    }
}

fn push_report(table: &mut Table, component: &str, rep: &ValidationReport) {
    for c in &rep.checks {
        table.push([
            component.to_string(),
            c.axiom.clone(),
            num(c.worst_probe),
            num(c.location),
            num(c.tolerance),
            (if c.status == Status::Pass { "pass" } else { "fail" }).to_string(),
        ]);
    }
}

pub fn validate(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let map = model::base_map(cfg)?;
    let mut t = Table::new(&["component", "axiom", "worst_probe", "location", "tolerance", "status"]);
    let rep = map.validate_axioms(cfg.run.probes);
    o.check(rep.passed());
    push_report(&mut t, "map", &rep);
    if let Some(roof) = model::roof(cfg, &map)? {
        let rep = roof.validate(cfg.run.probes);
        o.check(rep.passed());
        push_report(&mut t, "roof", &rep);
    }
    if let Some(skew) = model::skew(cfg, &map)? {
        let rep = skew.validate_contraction(cfg.run.pairs);
        o.check(rep.passed());
        t.push([
            "skew".into(),
            "contraction".into(),
            num(rep.worst_ratio),
            num(f64::NAN),
            num(rep.kappa * (1.0 + 1e-9)),
            status(rep.violations == 0).into(),
        ]);
        t.push([
            "skew".to_string(),
            "fiber_invariance".into(),
            num(rep.worst_image_radius),
            num(f64::NAN),
            num(1.0 + 1e-12),
            status(rep.invariance_violations == 0).into(),
        ]);
    }
    let path = out.csv("", &t)?;
    let failed = t.rows.iter().filter(|r| r[5] == "fail").count();
    o.note(format!(
        "{} checks, {failed} failed -> {}",
        t.rows.len(),
        path.display()
    ));
    Ok(o)
}

pub fn srb(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let map = model::base_map(cfg)?;
    let (ulam, d) = model::density(cfg, &map)?;
    let mut bins = Table::new(&["bin", "left", "right", "density", "residual"]);
    for (i, v) in d.values().iter().enumerate() {
        let (a, b) = d.bin_edges(i);
        bins.push([i.to_string(), num(a), num(b), num(*v), num(d.residual())]);
    }
    out.csv("density", &bins)?;
    let pts: Vec<(f64, f64)> = (0..d.bins())
        .flat_map(|i| {
            let (a, b) = d.bin_edges(i);
            [(a, d.values()[i]), (b, d.values()[i])]
        })
        .collect();
    out.line_plot(
        "density",
        "invariant density",
        &[Series {
            label: map.name(),
            points: pts,
        }],
        false,
    )?;

    let mut s = Table::new(&["quantity", "value", "target", "tolerance", "status"]);
    let lead_ok = (d.leading_eigenvalue() - 1.0).abs() <= 1e-10;
    s.push([
        "leading_eigenvalue".into(),
        num(d.leading_eigenvalue()),
        "1".into(),
        num(1e-10),
        status(lead_ok).into(),
    ]);
    let min_ok = d.min_value() > 0.0;
    s.push([
        "min_density".into(),
        num(d.min_value()),
        ">0".into(),
        "0".into(),
        status(min_ok).into(),
    ]);
    s.push([
        "residual".into(),
        num(d.residual()),
        "0".into(),
        num(cfg.run.density_tolerance),
        status(d.residual() <= cfg.run.density_tolerance).into(),
    ]);
    o.check(lead_ok && min_ok);
    match ulam.spectral_gap(&d) {
        Ok(g) => {
            s.push([
                "second_modulus".into(),
                num(g.second_modulus),
                "-".into(),
                num(1e-7 * g.second_modulus),
                "pass".into(),
            ]);
            s.push([
                "spectral_gap".into(),
                num(g.gap()),
                ">0".into(),
                num(1e-7),
                status(g.gap() > 0.0).into(),
            ]);
            o.check(g.gap() > 0.0);
            o.note(format!("|λ₂| = {}", num(g.second_modulus)));
        }
        Err(e) => {
            s.push(["second_modulus", "nan", "-", "-", "fail"]);
            o.check(false);
            o.note(format!("spectral gap: {e}"));
        }
    }
    let path = out.csv("summary", &s)?;
    o.note(format!(
        "leading eigenvalue {} -> {}",
        num(d.leading_eigenvalue()),
        path.display()
    ));
    Ok(o)
}

fn expectation_met(expect: Option<Expectation>, got: Expectation) -> bool {
    expect.is_none_or(|e| e == got)
}

pub fn cohomology(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let map = model::base_map(cfg)?;
    let roof = model::require_roof(cfg, &map)?;
    let rep = roof.witness_search(cfg.run.max_period);
    let mut t = Table::new(&[
        "verdict",
        "period",
        "itinerary1",
        "itinerary2",
        "point1",
        "point2",
        "sum1",
        "sum2",
        "gap",
        "gap_exact",
        "path",
        "tolerance",
    ]);
    let path_kind = if rep.exact { "exact" } else { "float" };
    let tol = if rep.exact { "0".to_string() } else { num(1e-10) };
    match &rep.witness {
        Some(w) => {
            t.push([
                "witness".to_string(),
                w.period.to_string(),
                format_itinerary(&w.itinerary1),
                format_itinerary(&w.itinerary2),
                num(w.point1),
                num(w.point2),
                num(w.sum1),
                num(w.sum2),
                num(w.gap),
                w.exact_gap.as_ref().map_or("-".into(), |g| g.to_string()),
                path_kind.into(),
                tol,
            ]);
            o.note(format!(
                "witness at period {}: {} vs {}, gap {}",
                w.period,
                format_itinerary(&w.itinerary1),
                format_itinerary(&w.itinerary2),
                w.exact_gap.as_ref().map_or(num(w.gap), |g| g.to_string())
            ));
        }
        None => {
            let mut row = vec!["no_witness_up_to_period".to_string(), rep.searched_periods.to_string()];
            row.extend(std::iter::repeat_n("-".to_string(), 8));
            row.extend([path_kind.to_string(), tol]);
            t.push(row);
            o.note(format!("no witness up to period {}", rep.searched_periods));
        }
    }
    out.csv("", &t)?;
    let got = if rep.verdict == Verdict::WitnessFound {
        Expectation::Witness
    } else {
        Expectation::NoWitness
    };
    o.check(expectation_met(cfg.run.expect, got));

    if let Some(g) = &cfg.run.gamma {
        let coeffs: Vec<f64> = rationals(g).iter().map(mixlab::rational::to_f64).collect();
        let gamma = move |x: f64| coeffs.iter().rev().fold(0.0, |a, c| a * x + c);
        let cert = roof.certify_coboundary(&gamma, cfg.run.probes);
        let mut c = Table::new(&["branch", "min", "max", "mean", "oscillation", "tolerance", "status"]);
        for b in &cert.branches {
            c.push([
                b.branch.to_string(),
                num(b.min),
                num(b.max),
                num(b.mean),
                num(b.oscillation),
                num(cfg.run.tolerance),
                status(b.oscillation <= cfg.run.tolerance).into(),
            ]);
        }
        out.csv("certificate", &c)?;
        let ok = cert.deviation <= cfg.run.tolerance;
        o.check(ok);
        o.note(format!(
            "coboundary residual oscillation {} ({})",
            num(cert.deviation),
            status(ok)
        ));
    }
    Ok(o)
}

pub fn tails(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let map = model::base_map(cfg)?;
    let induced = map.induce_first_return(cfg.run.base_cell, cfg.run.tail_depth)?;
    let roof_upper = model::roof(cfg, &map)?.map(|r| r.upper_bound());
    let mut t = Table::new(&["n", "mass", "exact", "tolerance"]);
    match induced.tail_statistics(roof_upper) {
        Ok(st) => {
            for p in &st.points {
                let tol = if p.exact.is_some() { "0".to_string() } else { num(1e-12) };
                t.push([
                    p.n.to_string(),
                    num(p.mass),
                    p.exact.as_ref().map_or("-".into(), |q| q.to_string()),
                    tol,
                ]);
            }
            out.line_plot(
                "",
                "first-return tail m(R >= n)",
                &[Series {
                    label: "tail",
                    points: st.points.iter().map(|p| (p.n as f64, p.mass)).collect(),
                }],
                true,
            )?;
            let mut s = Table::new(&["quantity", "value", "tolerance"]);
            s.push(["alpha".into(), num(st.alpha), "-".into()]);
            s.push(["prefactor".into(), num(st.prefactor), "-".into()]);
            s.push(["r_squared".into(), num(st.r_squared), "-".into()]);
            s.push(["sigma0".into(), num(st.sigma0), "-".into()]);
            s.push(["residual_mass".into(), num(st.residual_mass), "0".into()]);
            out.csv("fit", &s)?;
            o.note(format!(
                "alpha = {} (R² {}), residual mass {}",
                num(st.alpha),
                num(st.r_squared),
                num(st.residual_mass)
            ));
        }
        Err(e) => {
            o.check(false);
            o.note(format!("tail fit: {e}"));
        }
    }
    out.csv("", &t)?;
    Ok(o)
}

pub fn correlate(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let flow = model::semiflow(cfg)?;
    let rbar = flow.mean_roof();
    let phi = model::observable(&cfg.run.phi, rbar)?;
    let psi = model::observable(&cfg.run.psi, rbar)?;
    let grid = TimeGrid::new(cfg.run.dt, cfg.run.t_max.unwrap_or(30.0 * rbar))?;
    let series = flow.correlation(&phi, &psi, grid, cfg.run.samples, cfg.run.seed);
    let mut t = Table::new(&["t", "rho", "std_error"]);
    for i in 0..series.len() {
        t.push([num(series.times[i]), num(series.values[i]), num(series.std_errors[i])]);
    }
    out.csv("", &t)?;
    out.line_plot(
        "",
        "|rho(t)|",
        &[Series {
            label: &format!("{} / {}", phi.name(), psi.name()),
            points: series
                .times
                .iter()
                .copied()
                .zip(series.values.iter().copied())
                .collect(),
        }],
        true,
    )?;
    let mut s = Table::new(&["quantity", "value", "tolerance"]);
    s.push(["mean_roof".into(), num(rbar), "-".into()]);
    s.push(["samples".into(), series.sample_count.to_string(), "-".into()]);
    let t_start = cfg.run.t_start.unwrap_or(f64::NEG_INFINITY);
    let got = match fit_rate_windowed(&series, cfg.run.noise_k, t_start, cfg.run.quiet_time) {
        Ok(fit) => {
            let verdict = if fit.verdict == FitVerdict::Decay {
                "decay"
            } else {
                "no_decay"
            };
            s.push(["verdict", verdict, "-"]);
            s.push([
                "decay_rate".into(),
                num(fit.gamma),
                num(0.5 * (fit.slope_interval.1 - fit.slope_interval.0)),
            ]);
            s.push(["prefactor".into(), num(fit.prefactor), "-".into()]);
            s.push(["r_squared".into(), num(fit.r_squared), "-".into()]);
            s.push(["window_start".into(), num(fit.window.0), num(cfg.run.dt)]);
            s.push(["window_end".into(), num(fit.window.1), num(cfg.run.dt)]);
            s.push(["noise_floor".into(), num(fit.noise_floor), "-".into()]);
            s.push(["points_used".into(), fit.points_used.to_string(), "-".into()]);
            o.note(format!(
                "{verdict}: decay rate {} (95% half-width {}), R² {}, window [{}, {}]",
                num(fit.gamma),
                num(0.5 * (fit.slope_interval.1 - fit.slope_interval.0)),
                num(fit.r_squared),
                num(fit.window.0),
                num(fit.window.1)
            ));
            if fit.verdict == FitVerdict::Decay {
                Expectation::Decay
            } else {
                Expectation::NoDecay
            }
        }
        Err(Error::WindowTooShort { found, needed }) => {
            s.push(["verdict", "window_too_short", "-"]);
            o.note(format!(
                "window too short: {found} points above the floor, need {needed}"
            ));
            Expectation::NoDecay
        }
        Err(e) => return Err(e.into()),
    };
    out.csv("fit", &s)?;
    o.check(expectation_met(cfg.run.expect, got));
    Ok(o)
}

/// Two past symbols that may precede every cell, so all bracket corners exist.
fn universal_pasts(map: &mixlab::ExpandingMarkovMap) -> Result<(usize, usize), CliError> {
    let ok: Vec<usize> = (0..map.len())
        .filter(|&a| (0..map.len()).all(|j| map.allowed(a, j)))
        .collect();
    match ok.as_slice() {
        [a, .., c] => Ok((*a, *c)),
        _ => Err(Error::BracketUndefined("need two symbols that can precede every cell".into()).into()),
    }
}

/// `(x, y, φ, error bound)`.
pub type TdistRow = (f64, f64, f64, f64);

/// Largest `|φ|` over the grid and the table of values.
pub fn tdist_grid(
    flow: &mixlab::SuspensionSemiflow,
    grid: usize,
    depth: usize,
) -> Result<(f64, Vec<TdistRow>), CliError> {
    let map = flow.base();
    let (a, c) = universal_pasts(map)?;
    let (lo, hi) = map.domain();
    let pts: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / grid as f64)
        .collect();
    let mut rows = Vec::with_capacity(grid * grid);
    let mut worst: f64 = 0.0;
    for &x in &pts {
        for &y in &pts {
            let d = flow.temporal_distance(&CodedPoint::new(x, vec![a]), &CodedPoint::new(y, vec![c]), depth)?;
            worst = worst.max(d.value.abs());
            rows.push((x, y, d.value, d.error_bound));
        }
    }
    Ok((worst, rows))
}

pub fn tdist(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let flow = model::semiflow(cfg)?;
    let depth = cfg.run.tdist_depth;
    let (worst, rows) = tdist_grid(&flow, cfg.run.tdist_grid, depth)?;
    let mut t = Table::new(&["x", "y", "phi", "error_bound"]);
    for (x, y, v, e) in &rows {
        t.push([num(*x), num(*y), num(*v), num(*e)]);
    }
    out.csv("", &t)?;
    let shallow = depth.saturating_sub(10).max(1);
    let (w2, _) = tdist_grid(&flow, cfg.run.tdist_grid, shallow)?;
    let change = if worst > 0.0 { (worst - w2).abs() / worst } else { 0.0 };
    let mut s = Table::new(&["quantity", "value", "tolerance"]);
    s.push([format!("max_abs_phi_depth_{depth}"), num(worst), num(cfg.run.tolerance)]);
    s.push([format!("max_abs_phi_depth_{shallow}"), num(w2), num(cfg.run.tolerance)]);
    s.push(["relative_change".into(), num(change), "0.01".into()]);
    out.csv("summary", &s)?;
    o.note(format!(
        "max|φ| = {} at depth {depth}, {} at depth {shallow} (relative change {})",
        num(worst),
        num(w2),
        num(change)
    ));
    Ok(o)
}

pub fn solenoid(cfg: &ExperimentConfig, out: &Output) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let m = model::solenoid(cfg)?;
    let val = m.validate(cfg.run.pairs);
    let dom = m.check_domination(cfg.run.domination_probes);
    let mut s = Table::new(&["quantity", "value", "target", "tolerance", "status"]);
    s.push([
        "image_radius".into(),
        num(m.image_radius()),
        format!("<={}", num(m.params().fiber_radius)),
        "0".into(),
        "pass".into(),
    ]);
    s.push([
        "contraction_worst_ratio".into(),
        num(val.worst_ratio),
        num(val.kappa),
        num(val.kappa * 1e-9),
        status(val.violations == 0).into(),
    ]);
    s.push([
        "contraction_violations".into(),
        val.violations.to_string(),
        "0".into(),
        "0".into(),
        status(val.violations == 0).into(),
    ]);
    s.push([
        "invariance_violations".into(),
        val.invariance_violations.to_string(),
        "0".into(),
        "0".into(),
        status(val.invariance_violations == 0).into(),
    ]);
    s.push([
        "fiber_norm".into(),
        num(dom.fiber_norm),
        "-".into(),
        "-".into(),
        "pass".into(),
    ]);
    s.push([
        "norm_sq_upper".into(),
        num(dom.norm_sq),
        "-".into(),
        "-".into(),
        "pass".into(),
    ]);
    s.push([
        "domination_product".into(),
        num(dom.product),
        "<1".into(),
        "0".into(),
        status(dom.passed()).into(),
    ]);
    out.csv("checks", &s)?;
    o.check(val.passed() && dom.passed());

    let pts = m.attractor_sample(cfg.run.cloud_points, cfg.run.burn_in, cfg.run.seed);
    let bound = m.skew().kappa().powi(cfg.run.burn_in as i32) * m.params().fiber_radius;
    let mut c = Table::new(&["theta", "re_z", "im_z", "distance_bound"]);
    for p in &pts {
        c.push([num(p.theta), num(p.z[0]), num(p.z[1]), num(bound)]);
    }
    out.csv("cloud", &c)?;
    let torus: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let a = std::f64::consts::TAU * p.theta;
            let r = 2.0 + p.z[0];
            (r * a.cos(), r * a.sin() + 0.5 * p.z[1])
        })
        .collect();
    out.scatter_plot("cloud", "attractor", &torus)?;
    o.note(format!(
        "worst contraction ratio {} ({} violations), domination product {} ({})",
        num(val.worst_ratio),
        val.violations,
        num(dom.product),
        status(dom.passed())
    ));
    Ok(o)
}
