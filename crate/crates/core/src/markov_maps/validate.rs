use super::ExpandingMarkovMap;
use crate::probe;
use crate::report::{AxiomCheck, ValidationReport, Worst};

const EXACT_TOL: f64 = 1e-12;

impl ExpandingMarkovMap {
    /// Probes every branch and reports, per axiom, the worst value observed.
    ///
    /// Axioms: `partition`, `markov_image`, `inverse`, `expansion` (worst
    /// `1/|f'|` against λ) and `distortion` (worst `|D(log|f'| ∘ h)|` against
    /// the claimed distortion bound).
    pub fn validate_axioms(&self, probes: usize) -> ValidationReport {
        let probes = probes.max(1);
        let mut report = ValidationReport::default();

        let (lo, hi) = self.domain();
        let mut partition = Worst::new();
        let total: f64 = self.branches.iter().map(|b| b.right - b.left).sum();
        partition.see((total - (hi - lo)).abs(), lo);
        for w in self.branches.windows(2) {
            partition.see((w[0].right - w[1].left).abs(), w[1].left);
        }
        report.checks.push(AxiomCheck::at_most(
            "partition",
            partition.value,
            partition.at,
            EXACT_TOL,
        ));

        let mut markov = Worst::new();
        for (k, br) in self.branches.iter().enumerate() {
            let targets: Vec<usize> = (0..self.len()).filter(|&j| self.allowed(k, j)).collect();
            let contiguous = targets.windows(2).all(|w| w[1] == w[0] + 1);
            let (a, b) = br.image();
            if !contiguous {
                markov.see(f64::INFINITY, br.left);
                continue;
            }
            let ua = self.branches[targets[0]].left;
            let ub = self.branches[targets[targets.len() - 1]].right;
            markov.see((a - ua).abs(), br.left);
            markov.see((b - ub).abs(), br.right);
        }
        report
            .checks
            .push(AxiomCheck::at_most("markov_image", markov.value, markov.at, EXACT_TOL));

        let mut inverse = Worst::new();
        let mut expansion = Worst::new();
        let mut distortion = Worst::new();
        for br in &self.branches {
            let (a, b) = br.image();
            let delta = 1e-6 * (b - a);
            let log_jac = |y: f64| br.derivative(br.inverse(y)).abs().ln();
            for y in probe::interior(a, b, probes) {
                let x = br.inverse(y);
                inverse.see((br.forward(x) - y).abs(), y);
                let xe = br.left + (br.right - br.left) * ((y - a) / (b - a));
                expansion.see(1.0 / br.derivative(xe).abs(), xe);
                let (u, v) = ((y - delta).max(a), (y + delta).min(b));
                let slope = (log_jac(v) - log_jac(u)) / (v - u);
                distortion.see(slope.abs(), y);
            }
        }
        report
            .checks
            .push(AxiomCheck::at_most("inverse", inverse.value, inverse.at, EXACT_TOL));
        let lambda = self.expansion_bound;
        let mut exp = AxiomCheck::at_most("expansion", expansion.value, expansion.at, lambda * (1.0 + 1e-12));
        exp.tolerance = lambda;
        report.checks.push(exp);
        let d = self.distortion_bound;
        let mut dist = AxiomCheck::at_most("distortion", distortion.value, distortion.at, d * (1.0 + 1e-6) + 1e-8);
        dist.tolerance = d;
        report.checks.push(dist);
        report
    }
}

#[cfg(test)]
mod tests {
    use crate::markov_maps::ExpandingMarkovMap;
    use crate::report::Status;

    #[test]
    fn doubling_passes_with_half() {
        let r = ExpandingMarkovMap::doubling().validate_axioms(10_000);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.get("expansion").unwrap().worst_probe, 0.5);
    }

    #[test]
    fn doubling_fails_with_tighter_claim() {
        let f = ExpandingMarkovMap::doubling().with_expansion_bound(0.4);
        let r = f.validate_axioms(100);
        assert_eq!(r.get("expansion").unwrap().status, Status::Fail);
        assert_eq!(r.get("inverse").unwrap().status, Status::Pass);
    }

    #[test]
    fn three_branch_worst_probe_is_slope_two() {
        let r = ExpandingMarkovMap::three_branch().validate_axioms(10_000);
        assert!(r.passed(), "{r:?}");
        let e = r.get("expansion").unwrap();
        assert_eq!(e.worst_probe, 0.5);
        assert!(e.location < 1.0 / 3.0);
    }
}
