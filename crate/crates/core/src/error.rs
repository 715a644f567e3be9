use thiserror::Error;

use crate::options::OptionsError;

/// Boxed error returned by fallible user callbacks.
pub type CallbackError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum ExpodeError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} {value} out of range (maximum {max})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("callback '{flag}' failed at t = {t}: {source}")]
    Callback {
        flag: &'static str,
        t: f64,
        #[source]
        source: CallbackError,
    },

    #[error("jacobian unavailable: configure a jacobian or jacobian-vector callback, or enable the finite-difference fallback")]
    JacobianUnavailable,

    #[error("linear operator unavailable: the semilinear integrators need lin_op or lin_op_v")]
    LinOpUnavailable,

    #[error("nonlinear part g unavailable: {0}")]
    GUnavailable(&'static str),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error(transparent)]
    Options(#[from] OptionsError),

    #[error(transparent)]
    MatFun(#[from] MatFunError),

    #[error("step size underflow at t = {t}: required h = {h:e} is below MinStep = {h_min:e}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },

    #[error("insufficient history: need {needed} previous points, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("history index {index} out of range (history holds {len} entries)")]
    HistoryIndex { index: usize, len: usize },

    #[error("dense output unavailable: {0}")]
    DenseUnavailable(&'static str),

    #[error("query time {t} outside the integration interval [{lo}, {hi}]")]
    OutsideInterval { t: f64, lo: f64, hi: f64 },

    #[error("invalid scheme: {0}")]
    Scheme(String),

    #[error("exact solution unavailable for problem '{0}'")]
    NoExactSolution(String),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Failures raised by matrix-function evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatFunError {
    #[error("unknown job flag '{0}'")]
    UnknownFlag(String),

    #[error("matrix function evaluator used before '{0}'")]
    Protocol(&'static str),

    #[error("job table is empty")]
    EmptyJobTable,

    #[error("job '{flag}' has {found} coefficient columns, but {expected} job functions are registered")]
    WidthMismatch {
        flag: String,
        expected: usize,
        found: usize,
    },

    #[error("job '{0}' has no coefficient rows")]
    EmptyJob(String),

    #[error("evaluator incompatible with problem: {0}")]
    Incompatible(String),

    #[error("diagonalization failed: eigenvector condition number {cond:e} exceeds {limit:e}; use MatrixFunctions = arnoldi for this problem")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("diagonalization failed: {0}")]
    Decomposition(String),

    #[error("Krylov iteration for job '{flag}' did not converge within dimension {dim}; the step size must be reduced")]
    ReduceStep { flag: String, dim: usize },

    #[error("operator application failed: {0}")]
    Operator(String),
}

impl MatFunError {
    /// Whether retrying the step with a smaller h can resolve the failure.
    pub fn wants_smaller_step(&self) -> bool {
        matches!(self, MatFunError::ReduceStep { .. })
    }
}
