use thiserror::Error;

/// Errors raised by the information measures, solvers and harnesses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("support sizes differ: expected {expected}, found {found}")]
    SupportMismatch { expected: usize, found: usize },

    #[error("information density undefined at index {index}: both beliefs are zero on the view's support")]
    UndefinedRatio { index: usize },

    #[error("conflicting divergences: the view supports outcomes with both +inf and -inf information density")]
    ConflictingDivergence,

    #[error("pseudometric order must be >= 1, got {0}")]
    InvalidOrder(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("index {index} out of range for support size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("information is not finite")]
    NonFiniteInfo,

    #[error("zero belief at index {index} where the perturbation is nonzero")]
    ZeroDenominator { index: usize },

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("invalid sample count: {0}")]
    InvalidCount(String),

    #[error("constraints are infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("kernel undefined: state {state} is zero at index {index} where the reference is positive")]
    UndefinedKernel { state: usize, index: usize },

    #[error("degenerate result: all probability mass annihilated")]
    DegenerateResult,

    #[error("target information {target} outside achievable range [{lo}, {hi})")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("annealing exponent must be nonnegative, got {0}")]
    NegativeLambda(f64),

    #[error("family evaluation failed: {0}")]
    EvaluationFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    EmptyInput,

    #[error("inconsistent class count: expected {expected}, found {found}")]
    InconsistentClassCount { expected: usize, found: usize },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
