use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rank queries need an ordered value domain; values are categorical")]
    UnorderedDomain,

    #[error("NaN is not a valid ordinal value")]
    NanValue,

    #[error("negative timestamp {0}")]
    NegativeTimestamp(i64),

    #[error("record is missing {0}")]
    MissingField(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    #[error("invalid interval [{t0}, {t1}): {reason}")]
    InvalidInterval { t0: u64, t1: u64, reason: String },

    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),

    #[error("unknown value `{0}`")]
    UnknownValue(String),

    #[error("no summary for segment {0}")]
    MissingSummary(String),

    #[error("bounded accumulators cannot absorb negative weight")]
    NegativeWeight,

    #[error("accumulator is empty")]
    EmptyAccumulator,

    #[error("store not found at {0}")]
    StoreNotFound(PathBuf),

    #[error("store version mismatch: expected `{expected}`, found `{found}`")]
    VersionMismatch { expected: String, found: String },

    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
