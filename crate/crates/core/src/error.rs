//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero (|denominator| = {0:e} below guard threshold)")]
    DivisionByZero(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("arity error: {0}")]
    Arity(String),
    #[error("homogeneity error: {0}")]
    Homogeneity(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("annihilation error: |h y| = {0:e} exceeds tolerance")]
    Annihilation(f64),
    #[error("degenerate ray: {0}")]
    DegenerateRay(String),
    #[error("step failure: {0}")]
    StepFailure(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
