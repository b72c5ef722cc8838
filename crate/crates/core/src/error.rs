use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("covariance is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("interior condition violated: constraint {index} has value {value} at the mean")]
    InteriorViolated { index: usize, value: f64 },

    #[error("bracket failure on constraint {index}: ray leaves and re-enters the feasible set")]
    BracketFailure { index: usize },

    #[error("projection did not converge after {iterations} iterations")]
    ProjectionDiverged { iterations: usize },

    #[error("transversality breakdown at direction {direction}: slope {slope:e}")]
    TransversalityBreakdown { direction: usize, slope: f64 },

    #[error("oracle exposes no decision sensitivity for the squared distance")]
    MissingSensitivity,

    #[error("no feasible start: best probability {best:.6} below target {target:.6}")]
    NoFeasibleStart { best: f64, target: f64 },

    #[error("linearized subproblem infeasible after {retries} trust-region reductions")]
    LpInfeasible { retries: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
