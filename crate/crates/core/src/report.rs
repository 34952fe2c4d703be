//! Pass/fail reports shared by the axiom validators.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        })
    }
}

/// One validated axiom: the worst probe value, where it occurred, and the bound it was held to.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub axiom: String,
    pub status: Status,
    pub worst_probe: f64,
    pub location: f64,
    pub tolerance: f64,
}

impl AxiomCheck {
    /// Builds a check that passes when `worst <= bound`.
    pub fn at_most(axiom: &str, worst: f64, location: f64, bound: f64) -> Self {
        AxiomCheck {
            axiom: axiom.to_string(),
            status: Status::from_bool(worst <= bound),
            worst_probe: worst,
            location,
            tolerance: bound,
        }
    }

    /// Builds a check that passes when `worst >= bound`.
    pub fn at_least(axiom: &str, worst: f64, location: f64, bound: f64) -> Self {
        AxiomCheck {
            axiom: axiom.to_string(),
            status: Status::from_bool(worst >= bound),
            worst_probe: worst,
            location,
            tolerance: bound,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AxiomCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn get(&self, axiom: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.axiom == axiom)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }
}

/// Tracks the largest value seen together with its location.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Worst {
    pub value: f64,
    pub at: f64,
}

impl Worst {
    pub fn new() -> Self {
        Worst {
            value: 0.0,
            at: f64::NAN,
        }
    }

    pub fn see(&mut self, value: f64, at: f64) {
        if value > self.value || self.at.is_nan() || value.is_nan() {
            self.value = value;
            self.at = at;
        }
    }
}
