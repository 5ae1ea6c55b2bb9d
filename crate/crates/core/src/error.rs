use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Validation,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("network invariant `{check}` violated: {detail}")]
    Invariant { check: &'static str, detail: String },

    #[error("invalid fault location: {0}")]
    InvalidLocation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("signal of {len} samples is too short for {levels} decomposition levels")]
    SignalTooShort { len: usize, levels: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missing channel or feature: {0}")]
    MissingChannel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("train/test overlap: {0}")]
    Overlap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invariant(check: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            check,
            detail: detail.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Unknown { .. } | Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::Parse { .. }
            | Error::Invariant { .. }
            | Error::InvalidLocation(_)
            | Error::Schema(_)
            | Error::Overlap(_)
            | Error::Dimension(_)
            | Error::LengthMismatch(_) => ErrorClass::Validation,
            Error::NumericalInstability(_) | Error::Singular(_) | Error::Degenerate(_) => {
                ErrorClass::Numerical
            }
            Error::SignalTooShort { .. }
            | Error::MissingChannel(_)
            | Error::InsufficientData(_)
            | Error::EmptyTestSet
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorClass::Data,
        }
    }
}
