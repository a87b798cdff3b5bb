use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("index {index} outside window 1..={window}")]
    IndexOutOfWindow { index: usize, window: usize },
    #[error("index {index} listed more than once")]
    DuplicateIndex { index: usize },
    #[error("vector mass {mass} is not 1")]
    MassNotOne { mass: f64 },
    #[error("window mismatch: {left} vs {right}")]
    WindowMismatch { left: usize, right: usize },
    #[error("window must be at least 1")]
    EmptyWindow,
    #[error("face index set is empty")]
    EmptyAlpha,
    #[error("face {0} is not a proper subset of the window")]
    ImproperFace(String),
    #[error("skew matrix violation: {0}")]
    SkewViolation(String),
    #[error("index map is not a permutation of 1..={window}")]
    NotPermutation { window: usize },
    #[error("index map is not injective: {0}")]
    NotInjective(String),
    #[error("window {window} too small (need at least {min})")]
    WindowTooSmall { window: usize, min: usize },
    #[error("window {0} must be even")]
    OddWindow(usize),
    #[error("row {row:?} is not stochastic (mass {mass})")]
    RowNotStochastic { row: usize, mass: f64 },
    #[error("system is not orthogonal: members {a} and {b} overlap")]
    NotOrthogonal { a: usize, b: usize },
    #[error("strategy targets coordinate {c}, which is not in the complement")]
    StrategyOnNonComplement { c: usize },
    #[error("row ({i},{j}) receives total strategy weight {total} > 1")]
    WeightOverflow { i: usize, j: usize, total: f64 },
    #[error("row ({i},{j}) is used by more than one complement coordinate")]
    SharedRow { i: usize, j: usize },
    #[error("invalid complement rule at coordinate {c}: {reason}")]
    InvalidRule { c: usize, reason: String },
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(format!("line {} column {}: {}", e.line(), e.column(), e))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
