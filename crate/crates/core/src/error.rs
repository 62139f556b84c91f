use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant maps to a stable
/// machine-readable [`ErrorCode`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown device profile `{0}`")]
    UnknownProfile(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("channel order mismatch: expected {expected:?}, found {found:?}")]
    ChannelOrderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotoneTimestamp { row: usize },

    #[error("non-finite or unparsable sample at row {row}, column `{column}`")]
    NonFiniteSample { row: usize, column: String },

    #[error("trial {trial} lies outside the recording span")]
    TrialOutOfRange { trial: usize },

    #[error("epoch too short: {seconds:.3} s (minimum {minimum:.1} s)")]
    EpochTooShort { seconds: f64, minimum: f64 },

    #[error("public dataset shape mismatch: {0}")]
    DatasetShapeMismatch(String),

    #[error("channel `{0}` missing")]
    MissingChannel(String),

    #[error("signal too short: {len} samples, need at least {required}")]
    SignalTooShort { len: usize, required: usize },

    #[error("sampling rate {fs_hz} Hz too low (must exceed {minimum} Hz)")]
    SamplingRateTooLow { fs_hz: f64, minimum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("labels contain a single class")]
    SingleClassData,

    #[error("insufficient data: {got} epochs, need at least {required}")]
    InsufficientData { got: usize, required: usize },

    #[error("profile mismatch: model expects `{expected}`, epoch is from `{got}`")]
    ProfileMismatch { expected: String, got: String },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("no data for {0}")]
    NoData(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("already exists: {0}")]
    AlreadyExists(String),

    #[error("format version mismatch: expected `{expected}`, found `{found}`")]
    VersionMismatch { expected: String, found: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Stable error taxonomy shared by the CLI (exit codes) and the HTTP service
/// (status + `code` field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ErrorCode {
    InvalidInput,
    UnknownProfile,
    HeaderMismatch,
    ChannelOrderMismatch,
    NonMonotoneTimestamp,
    NonFiniteSample,
    TrialOutOfRange,
    EpochTooShort,
    DatasetShapeMismatch,
    MissingChannel,
    SignalTooShort,
    SamplingRateTooLow,
    DimensionMismatch,
    SingleClassData,
    InsufficientData,
    ProfileMismatch,
    DegenerateSignal,
    NoData,
    NotFound,
    AlreadyExists,
    VersionMismatch,
    Io,
    MalformedDocument,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 23] = [
        ErrorCode::InvalidInput,
        ErrorCode::UnknownProfile,
        ErrorCode::HeaderMismatch,
        ErrorCode::ChannelOrderMismatch,
        ErrorCode::NonMonotoneTimestamp,
        ErrorCode::NonFiniteSample,
        ErrorCode::TrialOutOfRange,
        ErrorCode::EpochTooShort,
        ErrorCode::DatasetShapeMismatch,
        ErrorCode::MissingChannel,
        ErrorCode::SignalTooShort,
        ErrorCode::SamplingRateTooLow,
        ErrorCode::DimensionMismatch,
        ErrorCode::SingleClassData,
        ErrorCode::InsufficientData,
        ErrorCode::ProfileMismatch,
        ErrorCode::DegenerateSignal,
        ErrorCode::NoData,
        ErrorCode::NotFound,
        ErrorCode::AlreadyExists,
        ErrorCode::VersionMismatch,
        ErrorCode::Io,
        ErrorCode::MalformedDocument,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidInput => "InvalidInput",
            ErrorCode::UnknownProfile => "UnknownProfile",
            ErrorCode::HeaderMismatch => "HeaderMismatch",
            ErrorCode::ChannelOrderMismatch => "ChannelOrderMismatch",
            ErrorCode::NonMonotoneTimestamp => "NonMonotoneTimestamp",
            ErrorCode::NonFiniteSample => "NonFiniteSample",
            ErrorCode::TrialOutOfRange => "TrialOutOfRange",
            ErrorCode::EpochTooShort => "EpochTooShort",
            ErrorCode::DatasetShapeMismatch => "DatasetShapeMismatch",
            ErrorCode::MissingChannel => "MissingChannel",
            ErrorCode::SignalTooShort => "SignalTooShort",
            ErrorCode::SamplingRateTooLow => "SamplingRateTooLow",
            ErrorCode::DimensionMismatch => "DimensionMismatch",
            ErrorCode::SingleClassData => "SingleClassData",
            ErrorCode::InsufficientData => "InsufficientData",
            ErrorCode::ProfileMismatch => "ProfileMismatch",
            ErrorCode::DegenerateSignal => "DegenerateSignal",
            ErrorCode::NoData => "NoData",
            ErrorCode::NotFound => "NotFound",
            ErrorCode::AlreadyExists => "AlreadyExists",
            ErrorCode::VersionMismatch => "VersionMismatch",
            ErrorCode::Io => "Io",
            ErrorCode::MalformedDocument => "MalformedDocument",
        }
    }

    /// Process exit status used by the CLI. 0 and 1 are reserved for success
    /// and usage errors.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::InvalidInput => 10,
            ErrorCode::UnknownProfile => 11,
            ErrorCode::HeaderMismatch => 12,
            ErrorCode::ChannelOrderMismatch => 13,
            ErrorCode::NonMonotoneTimestamp => 14,
            ErrorCode::NonFiniteSample => 15,
            ErrorCode::TrialOutOfRange => 16,
            ErrorCode::EpochTooShort => 17,
            ErrorCode::DatasetShapeMismatch => 18,
            ErrorCode::MissingChannel => 19,
            ErrorCode::SignalTooShort => 20,
            ErrorCode::SamplingRateTooLow => 21,
            ErrorCode::DimensionMismatch => 22,
            ErrorCode::SingleClassData => 23,
            ErrorCode::InsufficientData => 24,
            ErrorCode::ProfileMismatch => 25,
            ErrorCode::DegenerateSignal => 26,
            ErrorCode::NoData => 27,
            ErrorCode::NotFound => 28,
            ErrorCode::AlreadyExists => 29,
            ErrorCode::VersionMismatch => 30,
            ErrorCode::Io => 31,
            ErrorCode::MalformedDocument => 32,
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::InvalidInput(_) => ErrorCode::InvalidInput,
            Error::UnknownProfile(_) => ErrorCode::UnknownProfile,
            Error::HeaderMismatch(_) => ErrorCode::HeaderMismatch,
            Error::ChannelOrderMismatch { .. } => ErrorCode::ChannelOrderMismatch,
            Error::NonMonotoneTimestamp { .. } => ErrorCode::NonMonotoneTimestamp,
            Error::NonFiniteSample { .. } => ErrorCode::NonFiniteSample,
            Error::TrialOutOfRange { .. } => ErrorCode::TrialOutOfRange,
            Error::EpochTooShort { .. } => ErrorCode::EpochTooShort,
            Error::DatasetShapeMismatch(_) => ErrorCode::DatasetShapeMismatch,
            Error::MissingChannel(_) => ErrorCode::MissingChannel,
            Error::SignalTooShort { .. } => ErrorCode::SignalTooShort,
            Error::SamplingRateTooLow { .. } => ErrorCode::SamplingRateTooLow,
            Error::DimensionMismatch { .. } => ErrorCode::DimensionMismatch,
            Error::SingleClassData => ErrorCode::SingleClassData,
            Error::InsufficientData { .. } => ErrorCode::InsufficientData,
            Error::ProfileMismatch { .. } => ErrorCode::ProfileMismatch,
            Error::DegenerateSignal(_) => ErrorCode::DegenerateSignal,
            Error::NoData(_) => ErrorCode::NoData,
            Error::NotFound(_) => ErrorCode::NotFound,
            Error::AlreadyExists(_) => ErrorCode::AlreadyExists,
            Error::VersionMismatch { .. } => ErrorCode::VersionMismatch,
            Error::Io { .. } => ErrorCode::Io,
            Error::Json { .. } => ErrorCode::MalformedDocument,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
