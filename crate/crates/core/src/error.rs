use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("topology mismatch: cannot combine a circle set with a line set")]
    TopologyMismatch,

    #[error("radius {0} out of range (need 0 < radius < 1/2)")]
    RadiusOutOfRange(String),

    #[error("point {0} lies on a branch boundary")]
    BranchBoundary(String),

    #[error("point {0} is outside the map domain [0,1)")]
    OutsideDomain(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("operation requires affine branches: {0}")]
    NotAffine(&'static str),

    #[error("period cap {cap} exceeded (requested {requested})")]
    CapExceeded { cap: usize, requested: usize },

    #[error(
        "component budget exceeded: {components} components > {budget}; use Monte Carlo instead"
    )]
    BudgetExceeded { components: usize, budget: usize },

    #[error("threshold {0} is not below the observable supremum")]
    ThresholdAboveSup(String),

    #[error("infeasible threshold: tau/n = {0} must lie in (0, 1)")]
    InfeasibleThreshold(String),

    #[error("period detection inconclusive within cap {0}; supply q explicitly")]
    PeriodInconclusive(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no feasible blocking pair: {0}")]
    NoFeasiblePair(String),

    #[error("too few surviving trials to fit an escape rate: {0}")]
    TooFewSurvivors(String),

    #[error("hole is not aligned to the bin grid: {0}")]
    HoleNotAligned(String),

    #[error("power iteration did not converge after {0} iterations")]
    NonConvergent(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
