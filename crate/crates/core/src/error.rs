//! Error type shared by all modules.

use thiserror::Error;

/// Errors from validation, construction, and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, {cols} columns")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix side {side} is not a power of two")]
    NotPowerOfTwo { side: usize },

    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("column {col} sums to {sum}, expected 1 within {tolerance}")]
    ColumnSumViolation { col: usize, sum: f64, tolerance: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("eps {0} must lie strictly between 0 and 0.5")]
    EpsOutOfRange(f64),

    #[error("calibration histogram for state {state} sums to {sum}, expected {expected}")]
    ShotMismatch { state: usize, sum: u64, expected: u64 },

    #[error("response matrix is singular or ill-conditioned (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },

    #[error("zero denominator at measured state {state} with a nonzero measured count")]
    ZeroDenominator { state: usize },

    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("bootstrap needs at least 2 replicas, got {0}")]
    InvalidReplicaCount(usize),

    #[error("iteration list is empty")]
    EmptyIterationList,

    #[error("iteration list must be strictly increasing")]
    NonIncreasingIterations,

    #[error("matrix side is not a power of two, so it has no qubit structure")]
    MissingQubitStructure,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics themselves, as opposed to rejected
    /// input. The CLI maps numerical failures to exit code 3 and everything
    /// else to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. } | Error::ZeroDenominator { .. }
        )
    }

    /// Stable machine-readable token naming the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "NonSquare",
            Error::NotPowerOfTwo { .. } => "NotPowerOfTwo",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::ColumnSumViolation { .. } => "ColumnSumViolation",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EpsOutOfRange(_) => "EpsOutOfRange",
            Error::ShotMismatch { .. } => "ShotMismatch",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::ZeroDenominator { .. } => "ZeroDenominator",
            Error::QubitOutOfRange { .. } => "QubitOutOfRange",
            Error::InvalidReplicaCount(_) => "InvalidReplicaCount",
            Error::EmptyIterationList => "EmptyIterationList",
            Error::NonIncreasingIterations => "NonIncreasingIterations",
            Error::MissingQubitStructure => "MissingQubitStructure",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
