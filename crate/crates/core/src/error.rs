//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ordering is not a permutation of 0..{n}")]
    InvalidPermutation { n: usize },

    #[error("{op} supports n <= {max}, got n = {n}")]
    SizeLimit {
        op: &'static str,
        n: usize,
        max: usize,
    },

    #[error("{op} requires n >= {min}, got n = {n}")]
    SizeTooSmall {
        op: &'static str,
        n: usize,
        min: usize,
    },

    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),

    #[error("no perfect matching exists on the positive support")]
    NoPerfectMatching,

    #[error("operation requires a unit-range instance with |preset| = 2n")]
    UnitRangeRequired,

    #[error("invalid distribution spec: field `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("invalid parameter `{param}`: {reason}")]
    InvalidParameter { param: &'static str, reason: String },

    #[error("outside validity window: {0}")]
    OutsideValidityWindow(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
