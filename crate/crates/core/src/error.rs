//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is identically zero")]
    AllZeroMatrix,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("matrix is rank deficient (sigma_min = {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("overflow in entry power at ({row}, {col})")]
    Overflow { row: usize, col: usize },

    #[error("no convergence after {iterations} iterations (best {best:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        best: f64,
        residual: f64,
    },

    #[error("unsupported exponent p = {p} ({detail})")]
    UnsupportedExponent { p: f64, detail: &'static str },

    #[error("exponent p = {p} out of range: requires {required}")]
    ExponentOutOfRange { p: f64, required: &'static str },

    #[error("calibration budget exhausted (best alpha {alpha:e}, median lambda {lambda:e})")]
    BudgetExhausted { alpha: f64, lambda: f64 },

    #[error("round {round} failed after {attempts} retry seeds")]
    RoundRetryExhausted { round: usize, attempts: usize },

    #[error("row {row}: {source}")]
    ScoreRow { row: usize, source: Box<Error> },

    #[error("csv parse error on line {line}: {detail}")]
    CsvParse { line: usize, detail: String },

    #[error("internal postcondition failed: {0}")]
    Postcondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
