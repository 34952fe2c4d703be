//! Numerical laboratory for suspension semiflows over expanding Markov maps.
//!
//! The crate covers the base dynamics (`markov_maps`), roof functions and
//! their cohomology (`roof`), the transfer operator and its Ulam
//! discretisation (`transfer_operator`), hyperbolic skew products and the
//! disintegration of their invariant measure (`skew_product`), suspension
//! flows with correlation estimates (`suspension`) and the solenoid model
//! (`solenoid`).

// `!(a < b)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod markov_maps;
pub mod probe;
pub mod quad;
pub mod rational;
pub mod report;
pub mod roof;
pub mod skew_product;
pub mod solenoid;
pub mod stats;
pub mod suspension;
pub mod transfer_operator;

mod par;

pub use error::{Error, Result};
pub use markov_maps::{DomainKind, ExpandingMarkovMap, InducedMap, TailStatistics};
pub use report::{AxiomCheck, Status, ValidationReport};
pub use roof::{RoofFunction, RoofKind};
pub use skew_product::{Disintegration, HyperbolicSkewProduct, SkewObservable};
pub use solenoid::{SolenoidModel, SolenoidParams};
pub use suspension::{PhaseObservable, PhasePoint, SuspensionSemiflow};
pub use transfer_operator::{InvariantDensity, UlamOperator};
