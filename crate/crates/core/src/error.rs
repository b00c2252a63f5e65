//! Crate-wide error type.

use crate::qgram::RecordId;

/// Errors surfaced by the search library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A tunable was outside its legal range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// An operation that needs a non-empty set was given an empty one.
    #[error("empty set: {0}")]
    EmptySet(&'static str),

    /// The corpus holds no records.
    #[error("corpus is empty")]
    EmptyCorpus,

    /// A record id was expected to be a member of a set but was not.
    #[error("record {0} is not a member of the candidate set")]
    MemberNotFound(RecordId),

    /// A record id appeared twice in a result set.
    #[error("duplicate record {0} in result set")]
    DuplicateMember(RecordId),

    /// Exhaustive subset enumeration was asked for too many candidates.
    #[error("subset oracle supports at most {max} candidates, got {got}")]
    TooManyCandidates { got: usize, max: usize },

    /// Dataset ingestion failed.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// A persisted artifact could not be loaded.
    #[error("persistence error: {0}")]
    Persist(#[from] PersistError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Load-time failures for persisted indexes and models.
#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("bad magic bytes: not a divsearch artifact")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("artifact kind mismatch: expected {expected}, found {found}")]
    WrongKind { expected: &'static str, found: String },

    #[error("corpus checksum mismatch: the artifact was built from a different corpus")]
    StaleCorpus,

    #[error("file is truncated or corrupt: {0}")]
    Truncated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
