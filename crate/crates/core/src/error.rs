use std::path::PathBuf;

use crate::DocId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or a violated API contract.
    Config,
    /// Storage failure.
    Io,
    /// Corrupt, inconsistent or unknown data.
    Data,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("trailing data: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("unnormalized row {row} (norm {norm})")]
    UnnormalizedRow { row: usize, norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("duplicate doc id {0}")]
    DuplicateId(DocId),
    #[error("conflicting vectors stored for doc id {0}")]
    ConflictingEntry(DocId),
    #[error("unknown doc id {0}")]
    UnknownDoc(DocId),
    #[error("unknown query key {0}")]
    UnknownQuery(u64),
    #[error("no results for caption {0}")]
    MissingResults(u64),
    #[error("encoding doc {id} at level {level} failed: {source}")]
    Encode {
        level: u16,
        id: DocId,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("inconsistent state: {0}")]
    Inconsistent(String),
    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::InvalidConfig(_) | Error::Infeasible(_) => ErrorKind::Config,
            Error::Encode { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Short stable identifier, used in machine-readable error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic { .. } => "bad_magic",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Truncated { .. } => "truncated",
            Error::TrailingBytes { .. } => "trailing_bytes",
            Error::ChecksumMismatch { .. } => "checksum_mismatch",
            Error::UnnormalizedRow { .. } => "unnormalized_row",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DuplicateId(_) => "duplicate_id",
            Error::ConflictingEntry(_) => "conflicting_entry",
            Error::UnknownDoc(_) => "unknown_doc",
            Error::UnknownQuery(_) => "unknown_query",
            Error::MissingResults(_) => "missing_results",
            Error::Encode { source, .. } => source.code(),
            Error::InvalidConfig(_) => "invalid_config",
            Error::Infeasible(_) => "infeasible",
            Error::Inconsistent(_) => "inconsistent_state",
            Error::Parse { .. } => "parse",
        }
    }
}
