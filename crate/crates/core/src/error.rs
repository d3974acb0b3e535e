use std::path::PathBuf;

use crate::rbm::Convention;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("value {value} is not a {convention:?} node value")]
    Alphabet { value: f64, convention: Convention },
    #[error("convention mismatch: expected {expected:?}, found {found:?}")]
    ConventionMismatch {
        expected: Convention,
        found: Convention,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("enumeration over 2^{size} states exceeds the cap of 2^{cap}")]
    EnumerationCap { size: usize, cap: usize },
    #[error("invalid data distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("gauge transform needs an unbiased model; fold biases into ghost spins first")]
    BiasedModel,
    #[error("frustration index is undefined for an all-zero weight matrix")]
    ZeroWeights,
    #[error("invalid MAX-2-SAT instance: {0}")]
    InvalidInstance(String),
    #[error("solver state became non-finite at t={time} (dt={dt})")]
    SolverDiverged { time: f64, dt: f64 },
    #[error("malformed {format} input at line {line}: {message}")]
    Parse {
        format: &'static str,
        line: usize,
        message: String,
    },
    #[error("IDX file {path}: {message}")]
    Idx { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
