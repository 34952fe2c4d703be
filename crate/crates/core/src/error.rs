use thiserror::Error;

/// Errors raised by model construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x} lies on a partition boundary")]
    BoundaryPoint { x: f64 },

    #[error("point {x} lies outside the domain [{lo}, {hi})")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("itinerary is not admissible: transition {from} -> {to} is forbidden")]
    InadmissibleItinerary { from: usize, to: usize },

    #[error("cell {cell} is not recurrent under the transition matrix")]
    NoReturn { cell: usize },

    #[error("need at least {needed} tail points, found {found}")]
    InsufficientDepth { needed: usize, found: usize },

    #[error("bump support touches protected orbit point {point} (step {step} of {origin})")]
    ProtectedOrbitHit { origin: f64, step: usize, point: f64 },

    #[error("fiber image {norm} leaves the fiber ball of radius {radius}")]
    FiberEscape { norm: f64, radius: f64 },

    #[error("inverse-branch tree at depth {depth} has {nodes} leaves, budget is {budget}")]
    DepthOverflow { depth: usize, nodes: f64, budget: usize },

    #[error("{bins} bins do not refine the partition (breakpoint {breakpoint})")]
    BinMisalignment { bins: usize, breakpoint: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("only {found} points above the noise floor, need {needed}")]
    WindowTooShort { found: usize, needed: usize },

    #[error("bracket undefined: {0}")]
    BracketUndefined(String),

    #[error("geometry violation: {0}")]
    GeometryViolation(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid roof: {0}")]
    InvalidRoof(String),
}

pub type Result<T> = std::result::Result<T, Error>;
