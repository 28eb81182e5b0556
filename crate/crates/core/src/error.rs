use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BrsError {
    #[error("invalid budget {0}: must be a finite positive number")]
    InvalidBudget(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid budget fraction {0}: must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("expected selected sum {expected} outside [0, {budget}]")]
    InvalidResidual { expected: f64, budget: f64 },
    #[error("threshold is zero; the residual term is undefined")]
    DivisionByZeroThreshold,
    #[error("adaptive quadrature did not reach tolerance {tolerance:e} on [{lo}, {hi}]")]
    QuadratureFailure { lo: f64, hi: f64, tolerance: f64 },
    #[error("root solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("budget {budget} is at or above the total mean {total_mean}; the bound is trivial")]
    TrivialRegime { budget: f64, total_mean: f64 },
    #[error("sample of length {len} exceeds the enumeration limit {max}")]
    TooLarge { len: usize, max: usize },
    #[error(
        "grid too coarse: refinement changed the value by {change:e} (tolerance {tolerance:e})"
    )]
    GridTooCoarse { change: f64, tolerance: f64 },
    #[error("{what} = {value} out of range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, BrsError>;
