//! Error type shared by every module of the laboratory.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} out of range: {reason}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        reason: String,
    },
    #[error("grid too coarse: N = {n}, need at least {min}")]
    GridTooCoarse { n: usize, min: usize },
    #[error("inverse iteration did not converge in {iterations} steps")]
    EigSolveFailure { iterations: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("kernel tail too fat: g(S_max)/g(0) = {ratio:e} at S_max = {s_max}; raise memory.s_max")]
    TailTooFat { s_max: f64, ratio: f64 },
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("singular banded system (zero pivot in column {column})")]
    LinearSolveFailure { column: usize },
    #[error("blow-up detected at t = {t}: |u| = {norm:e} exceeds {limit:e}")]
    BlowupDetected { t: f64, norm: f64, limit: f64 },
    #[error("Lyapunov construction undefined: D = {d} <= 0 (small-data condition fails)")]
    NonpositiveD { d: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("series too short: {len} records, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("energy series is identically zero; decay fit undefined")]
    AllZeroSeries,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingRequired(&'static str),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn out_of_range(name: &'static str, value: f64, reason: impl Into<String>) -> Error {
    Error::ParameterOutOfRange {
        name,
        value,
        reason: reason.into(),
    }
}
