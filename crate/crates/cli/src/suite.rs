//! The reproduction suite: one function per acceptance criterion.

use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

use mixlab::rational::{q, qi, to_f64};
use mixlab::roof::Verdict;
use mixlab::suspension::{fit_rate, fit_rate_windowed, FitVerdict, TimeGrid};
use mixlab::transfer_operator::duality_check;
use mixlab::{
    ExpandingMarkovMap, InvariantDensity, PhaseObservable, RoofFunction, RoofKind, SkewObservable, SolenoidModel,
    SolenoidParams, SuspensionSemiflow, UlamOperator,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::tdist_grid;
use crate::error::CliError;
use crate::output::{num, status, Output, Series, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub quantity: String,
    pub value: String,
    pub target: String,
    pub tolerance: String,
    pub pass: bool,
}

fn check(
    quantity: &str,
    value: impl Into<String>,
    target: impl Into<String>,
    tolerance: impl Into<String>,
    pass: bool,
) -> Check {
    Check {
        quantity: quantity.into(),
        value: value.into(),
        target: target.into(),
        tolerance: tolerance.into(),
        pass,
    }
}

/// Check that `|value − target| ≤ tol`.
fn near(quantity: &str, value: f64, target: f64, tol: f64) -> Check {
    check(
        quantity,
        num(value),
        num(target),
        num(tol),
        (value - target).abs() <= tol,
    )
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub checks: Vec<Check>,
    /// Seconds; `None` when the criterion has no runtime bound.
    pub runtime_limit: Option<f64>,
    pub elapsed: f64,
}

impl CriterionReport {
    pub fn within_time(&self) -> bool {
        self.runtime_limit.is_none_or(|l| self.elapsed < l)
    }

    pub fn passed(&self) -> bool {
        self.within_time() && self.checks.iter().all(|c| c.pass)
    }

    /// The failing checks, or all of them when everything passed.
    pub fn headline(&self) -> String {
        let failing: Vec<&Check> = self.checks.iter().filter(|c| !c.pass).collect();
        let shown = if failing.is_empty() {
            self.checks.iter().collect()
        } else {
            failing
        };
        let mut parts: Vec<String> = shown
            .iter()
            .map(|c| {
                format!(
                    "{} = {} (target {}, tol {})",
                    c.quantity, c.value, c.target, c.tolerance
                )
            })
            .collect();
        if !self.within_time() {
            parts.push(format!(
                "runtime {:.1}s over {:.0}s",
                self.elapsed,
                self.runtime_limit.unwrap_or(0.0)
            ));
        }
        parts.join("; ")
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["quantity", "value", "target", "tolerance", "status"]);
        for c in &self.checks {
            t.push([
                c.quantity.clone(),
                c.value.clone(),
                c.target.clone(),
                c.tolerance.clone(),
                status(c.pass).to_string(),
            ]);
        }
        if let Some(l) = self.runtime_limit {
            t.push([
                "runtime_within_limit".to_string(),
                "-".into(),
                format!("<{l}s"),
                "-".into(),
                status(self.within_time()).into(),
            ]);
        }
        t
    }
}

pub const CRITERIA: [(u8, &str, Option<f64>); 11] = [
    (1, "cohomology_witness", Some(1.0)),
    (2, "coboundary_soundness", None),
    (3, "transfer_operator", Some(30.0)),
    (4, "constant_roof_non_mixing", Some(120.0)),
    (5, "exponential_mixing", Some(600.0)),
    (6, "inducing_tails", None),
    (7, "skew_product_axioms", None),
    (8, "domination", None),
    (9, "disintegration", None),
    (10, "temporal_distance", None),
    (11, "determinism", None),
];

pub struct Suite {
    pub seed: u64,
    pub out: Output,
}

fn doubling() -> Arc<ExpandingMarkovMap> {
    Arc::new(ExpandingMarkovMap::doubling())
}

fn doubling_density() -> Result<Arc<InvariantDensity>, CliError> {
    let u = UlamOperator::build(&doubling(), 1024)?;
    Ok(Arc::new(u.invariant_density(1e-13)?))
}

fn roof(kind: RoofKind) -> Result<Arc<RoofFunction>, CliError> {
    Ok(Arc::new(RoofFunction::new(doubling(), kind)?))
}

fn xsq_kind() -> RoofKind {
    RoofKind::Polynomial(vec![qi(1), qi(0), qi(1)])
}

fn dense_second_modulus(u: &UlamOperator) -> f64 {
    let n = u.bins();
    let rows = u.to_dense();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli.get(1).copied().unwrap_or(0.0)
}

fn random_cubic(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let deg = rng.random_range(0..=3);
    (0..=deg).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |a, k| a * x + k)
}

impl Suite {
    pub fn new(seed: u64, out: Output) -> Self {
        Suite { seed, out }
    }

    fn series(&self, name: &str, t: &Table) -> Result<(), CliError> {
        self.out.csv(name, t)?;
        Ok(())
    }

    fn c1(&self) -> Result<Vec<Check>, CliError> {
        let r = roof(xsq_kind())?;
        let rep = r.witness_search(4);
        let mut out = vec![check(
            "verdict",
            format!("{:?}", rep.verdict),
            "WitnessFound",
            "-",
            rep.verdict == Verdict::WitnessFound,
        )];
        if let Some(w) = rep.witness {
            out.push(check("period", w.period.to_string(), "4", "0", w.period == 4));
            let exact = w.exact_gap.clone();
            out.push(check(
                "gap_exact",
                exact.as_ref().map_or("-".into(), |g| g.to_string()),
                "4/45",
                "0",
                exact == Some(q(4, 45)),
            ));
            out.push(near("gap_float", (w.sum1 - w.sum2).abs(), 4.0 / 45.0, 1e-12));
        }
        Ok(out)
    }

    fn c2(&self) -> Result<Vec<Check>, CliError> {
        let r = roof(RoofKind::Polynomial(vec![qi(1), qi(1)]))?;
        let cert = r.certify_coboundary(&|x| x, 10_000);
        let rep = r.witness_search(8);
        Ok(vec![
            check(
                "coboundary_residual",
                num(cert.deviation),
                "0",
                num(1e-12),
                cert.deviation <= 1e-12,
            ),
            check(
                "witness_search_period_8",
                format!("{:?}", rep.verdict),
                "NoWitnessUpToPeriod",
                "-",
                rep.verdict == Verdict::NoWitnessUpToPeriod,
            ),
        ])
    }

    fn c3(&self) -> Result<Vec<Check>, CliError> {
        let f = doubling();
        let u = UlamOperator::build(&f, 1024)?;
        let d = u.invariant_density(1e-13)?;
        let sup = d.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut worst: f64 = 0.0;
        let mut pairs = Table::new(&["pair", "lhs", "rhs", "discrepancy", "tolerance"]);
        for i in 0..20 {
            let (g, v) = (random_cubic(&mut rng), random_cubic(&mut rng));
            let c = duality_check(&f, &d, &|x| horner(&g, x), &|x| horner(&v, x), 4);
            worst = worst.max(c.discrepancy);
            pairs.push([i.to_string(), num(c.lhs), num(c.rhs), num(c.discrepancy), num(1e-6)]);
        }
        self.series("c03_duality", &pairs)?;
        let est = u.spectral_gap(&d)?;
        let u64 = UlamOperator::build(&f, 64)?;
        let d64 = u64.invariant_density(1e-13)?;
        let est64 = u64.spectral_gap(&d64)?;
        let dense = dense_second_modulus(&u64);
        Ok(vec![
            near("leading_eigenvalue", d.leading_eigenvalue(), 1.0, 1e-10),
            check("density_sup_deviation", num(sup), "0", num(1e-8), sup <= 1e-8),
            check("duality_max_discrepancy", num(worst), "0", num(1e-6), worst <= 1e-6),
            near("second_modulus_n1024", est.second_modulus, 0.5, 0.01),
            near("second_modulus_dense_n64", dense, 0.5, 0.01),
            near("estimate_vs_dense_n64", est64.second_modulus, dense, 0.01),
        ])
    }

    fn c4(&self) -> Result<Vec<Check>, CliError> {
        let flow = SuspensionSemiflow::new(roof(RoofKind::Constant(qi(1)))?, doubling_density()?);
        let phi = PhaseObservable::cos_u(1.0);
        let series = flow.correlation(
            &phi,
            &phi,
            TimeGrid::default_for(flow.mean_roof()),
            1_000_000,
            self.seed,
        );
        self.write_series("c04_correlation", &series)?;
        let mut out: Vec<Check> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|&t| {
                let (v, _) = series.at(t).expect("grid is non-empty");
                near(&format!("rho({t})"), v, 0.5 * (TAU * t).cos(), 0.01)
            })
            .collect();
        let verdict = match fit_rate(&series, 3.0) {
            Ok(fit) => format!("{:?}", fit.verdict),
            Err(e) => e.to_string(),
        };
        out.push(check(
            "fit_verdict",
            verdict.clone(),
            "NoDecay",
            "-",
            verdict == "NoDecay",
        ));
        Ok(out)
    }

    fn write_series(&self, name: &str, s: &mixlab::suspension::CorrelationSeries) -> Result<(), CliError> {
        let mut t = Table::new(&["t", "rho", "std_error"]);
        for i in 0..s.len() {
            t.push([num(s.times[i]), num(s.values[i]), num(s.std_errors[i])]);
        }
        self.series(name, &t)?;
        self.out.line_plot(
            name,
            "|rho(t)|",
            &[Series {
                label: name,
                points: s.times.iter().copied().zip(s.values.iter().copied()).collect(),
            }],
            true,
        )
    }

    fn c5(&self) -> Result<Vec<Check>, CliError> {
        let flow = SuspensionSemiflow::new(roof(xsq_kind())?, doubling_density()?);
        let rbar = flow.mean_roof();
        let phi = PhaseObservable::mixing_default(rbar);
        let grid = TimeGrid::default_for(rbar);
        let mut fits = Vec::new();
        for (n, name) in [(1_000_000, "c05_correlation_n"), (2_000_000, "c05_correlation_2n")] {
            let s = flow.correlation(&phi, &phi, grid, n, self.seed);
            self.write_series(name, &s)?;
            fits.push(fit_rate_windowed(&s, 3.0, 2.0 * rbar, 2.0 * rbar)?);
        }
        let (a, b) = (&fits[0], &fits[1]);
        let change = (b.gamma - a.gamma).abs() / a.gamma.abs();
        Ok(vec![
            check(
                "fit_verdict_n",
                format!("{:?}", a.verdict),
                "Decay",
                "-",
                a.verdict == FitVerdict::Decay,
            ),
            check("decay_rate_n", num(a.gamma), ">0", "-", a.gamma > 0.0),
            check("r_squared_n", num(a.r_squared), ">=0.9", "-", a.r_squared >= 0.9),
            check("decay_rate_2n", num(b.gamma), "-", "-", true),
            check("relative_change_2n", num(change), "0", "0.15", change <= 0.15),
        ])
    }

    fn c6(&self) -> Result<Vec<Check>, CliError> {
        let f = Arc::new(ExpandingMarkovMap::three_branch());
        let induced = f.induce_first_return(0, 12)?;
        let stats = induced.tail_statistics(None)?;
        let mut t = Table::new(&["n", "mass", "exact", "oracle", "tolerance"]);
        let mut worst: f64 = 0.0;
        for n in 2..=12 {
            let oracle = mixlab::rational::pow(&q(2, 3), n - 2);
            let measured = induced.exact_tail_mass(n).cloned();
            let diff = match &measured {
                Some(m) => to_f64(&(m.clone() - oracle.clone())).abs(),
                None => (induced.tail_mass(n) - to_f64(&oracle)).abs(),
            };
            worst = worst.max(diff);
            t.push([
                n.to_string(),
                num(induced.tail_mass(n)),
                measured.map_or("-".into(), |m| m.to_string()),
                oracle.to_string(),
                num(1e-12),
            ]);
        }
        self.series("c06_tails", &t)?;
        let target = 1.5f64.ln();
        Ok(vec![
            check("tail_max_deviation", num(worst), "0", num(1e-12), worst <= 1e-12),
            check(
                "alpha_relative_error",
                num((stats.alpha - target).abs() / target),
                "0",
                "0.1",
                (stats.alpha - target).abs() <= 0.1 * target,
            ),
        ])
    }

    fn c7(&self) -> Result<Vec<Check>, CliError> {
        let m = SolenoidModel::build(SolenoidParams::default())?;
        let rep = m.validate(100_000);
        Ok(vec![
            near("worst_ratio", rep.worst_ratio, 0.05, 1e-12),
            check("violations", rep.violations.to_string(), "0", "0", rep.violations == 0),
            check(
                "invariance_violations",
                rep.invariance_violations.to_string(),
                "0",
                "0",
                rep.invariance_violations == 0,
            ),
        ])
    }

    fn c8(&self) -> Result<Vec<Check>, CliError> {
        let good = SolenoidModel::build(SolenoidParams::default())?.check_domination(1024);
        let bad = SolenoidModel::build(SolenoidParams {
            degree: 2,
            contraction: 10.0,
            offset: 0.5,
            fiber_radius: 1.0,
        })?
        .check_domination(1024);
        Ok(vec![
            check(
                "product_2_20_quarter",
                num(good.product),
                "<=0.35",
                "0",
                good.product <= 0.35 && good.passed(),
            ),
            check(
                "product_2_10_half",
                num(bad.product),
                ">1",
                "0",
                bad.product > 1.0 && !bad.passed(),
            ),
        ])
    }

    fn c9(&self) -> Result<Vec<Check>, CliError> {
        let m = SolenoidModel::build(SolenoidParams::default())?;
        let depth = 20;
        let eta = m.skew().disintegrate(depth, doubling_density()?)?;
        let v = SkewObservable::re_z(1.0);
        let xs: Vec<f64> = (0..16).map(|i| (i as f64 + 0.5) / 16.0).collect();
        let re = eta.eval_many(&xs, &v)?;
        let one = eta.eval_many(&xs, &SkewObservable::constant(1.0))?;
        let mut t = Table::new(&["theta", "eta_re_z", "eta_one", "error_bound"]);
        for (a, b) in re.iter().zip(&one) {
            t.push([num(a.x), num(a.value), num(b.value), num(a.error_bound)]);
        }
        self.series("c09_profile", &t)?;
        let worst_re = re.iter().map(|e| e.value.abs()).fold(0.0, f64::max);
        let worst_one = one.iter().map(|e| (e.value - 1.0).abs()).fold(0.0, f64::max);
        let integral = eta.eta_integral(&v, 4)?;
        let sandwich = eta.sandwich(&v, 100_000, self.seed);
        let combined = integral.error_bound() + sandwich.error_bound();
        let diff = (integral.value - sandwich.midpoint()).abs();
        let gap_bound = 0.05f64.powi(depth as i32) * v.fiber_lipschitz();
        Ok(vec![
            check("max_abs_eta_re_z", num(worst_re), "0", num(1e-3), worst_re <= 1e-3),
            check(
                "max_abs_eta_one_minus_1",
                num(worst_one),
                "0",
                num(1e-9),
                worst_one <= 1e-9,
            ),
            check("integral_vs_sandwich", num(diff), "0", num(combined), diff <= combined),
            check(
                "sandwich_gap",
                num(sandwich.gap),
                "0",
                num(gap_bound),
                sandwich.gap <= gap_bound,
            ),
        ])
    }

    fn c10(&self) -> Result<Vec<Check>, CliError> {
        let density = doubling_density()?;
        let flat = SuspensionSemiflow::new(roof(RoofKind::PiecewiseConstant(vec![qi(1), qi(2)]))?, density.clone());
        let (w_flat, _) = tdist_grid(&flat, 16, 30)?;
        let xsq = SuspensionSemiflow::new(roof(xsq_kind())?, density);
        let (w30, _) = tdist_grid(&xsq, 16, 30)?;
        let (w40, rows) = tdist_grid(&xsq, 16, 40)?;
        let mut t = Table::new(&["x", "y", "phi", "error_bound"]);
        for (x, y, v, e) in rows {
            t.push([num(x), num(y), num(v), num(e)]);
        }
        self.series("c10_tdist", &t)?;
        let change = (w40 - w30).abs() / w40;
        Ok(vec![
            check("locally_constant_max", num(w_flat), "0", num(1e-9), w_flat <= 1e-9),
            check("xsq_max_depth_40", num(w40), ">0", "-", w40 > 0.0),
            check("xsq_relative_change_30_40", num(change), "0", "0.01", change <= 0.01),
        ])
    }

    /// In-process check at reduced sizes: the same outputs under pools of 1 and 8 threads.
    fn c11(&self) -> Result<Vec<Check>, CliError> {
        let run = || -> Result<String, CliError> {
            let flow = SuspensionSemiflow::new(roof(xsq_kind())?, doubling_density()?);
            let phi = PhaseObservable::mixing_default(flow.mean_roof());
            let s = flow.correlation(&phi, &phi, TimeGrid::new(0.1, 10.0)?, 20_000, self.seed);
            let m = SolenoidModel::build(SolenoidParams::default())?;
            let cloud = m.attractor_sample(2000, 30, self.seed);
            let eta = m.skew().disintegrate(12, doubling_density()?)?;
            let prof = eta.profile(&SkewObservable::re_z_sq(1.0), 32)?;
            let mut out = String::new();
            for v in s.values.iter().chain(&s.std_errors) {
                out.push_str(&num(*v));
                out.push('\n');
            }
            for p in &cloud {
                out.push_str(&format!("{},{},{}\n", num(p.theta), num(p.z[0]), num(p.z[1])));
            }
            for e in &prof {
                out.push_str(&num(e.value));
                out.push('\n');
            }
            Ok(out)
        };
        let pool = |n: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))
        };
        let one = pool(1)?.install(run)?;
        let eight = pool(8)?.install(run)?;
        Ok(vec![check(
            "outputs_identical_threads_1_vs_8",
            (one == eight).to_string(),
            "true",
            "-",
            one == eight,
        )])
    }

    pub fn run_criterion(&self, id: u8) -> Result<CriterionReport, CliError> {
        let &(_, name, limit) = CRITERIA
            .iter()
            .find(|c| c.0 == id)
            .ok_or_else(|| CliError::Config(format!("no criterion {id}")))?;
        let start = Instant::now();
        let checks = match id {
            1 => self.c1(),
            2 => self.c2(),
            3 => self.c3(),
            4 => self.c4(),
            5 => self.c5(),
            6 => self.c6(),
            7 => self.c7(),
            8 => self.c8(),
            9 => self.c9(),
            10 => self.c10(),
            _ => self.c11(),
        };
        let checks = checks.unwrap_or_else(|e| vec![check("error", e.to_string(), "-", "-", false)]);
        let report = CriterionReport {
            id,
            name,
            checks,
            runtime_limit: limit,
            elapsed: start.elapsed().as_secs_f64(),
        };
        self.out.csv(&format!("c{id:02}_{name}"), &report.table())?;
        Ok(report)
    }

    /// Runs the criteria in order and writes the summary table.
    pub fn run(&self, ids: &[u8]) -> Result<Vec<CriterionReport>, CliError> {
        let mut reports = Vec::new();
        let mut t = Table::new(&["criterion", "name", "status", "checks_passed", "checks_total"]);
        for &id in ids {
            let r = self.run_criterion(id)?;
            t.push([
                r.id.to_string(),
                r.name.to_string(),
                status(r.passed()).to_string(),
                r.checks.iter().filter(|c| c.pass).count().to_string(),
                r.checks.len().to_string(),
            ]);
            reports.push(r);
        }
        self.out.csv("summary", &t)?;
        Ok(reports)
    }
}
