use thiserror::Error;

use crate::expr::{EvalError, ExprError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("time {t} is outside the domain [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("boundary mismatch at t = {t}: expected {expected:?}, got {actual:?} (gap {gap:e})")]
    BoundaryMismatch {
        t: f64,
        expected: Vec<f64>,
        actual: Vec<f64>,
        gap: f64,
    },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid needle: {0}")]
    InvalidNeedle(String),
    #[error("eps = {eps} is outside the validity window (0, {limit})")]
    OutsideWindow { eps: f64, limit: f64 },
    #[error("segment [{start}, {end}] is too short for a finite-difference stencil")]
    SegmentTooShort { start: f64, end: f64 },
    #[error("non-finite integrand value at t = {t}")]
    NonFinite { t: f64 },
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("config line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config is missing required key `{key}` in [{section}]")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("precondition failed: {0}")]
    Precondition(String),
}
