use std::io;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the toolkit.
///
/// Every variant carries enough context to name the offending field or
/// input, so CLI output can stay structured (`error[kind]: detail`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("label must be 0 or 1, got {0}")]
    NonBinaryLabel(i64),

    #[error("bid must be positive, got {0}")]
    NonPositiveBid(f64),

    #[error("pctr must lie in [0, 1], got {0}")]
    PctrOutOfRange(f64),

    #[error("{field} must be finite, got {value}")]
    NonFiniteValue { field: &'static str, value: f64 },

    #[error("cannot open {path}: {source}")]
    FileNotFound { path: String, source: io::Error },

    #[error("header does not resolve required column {0:?}")]
    MalformedHeader(String),

    #[error("row {row}: {reason}")]
    RowParseError { row: u64, reason: String },

    #[error("input contains no valid samples")]
    EmptyInput,

    #[error("no samples")]
    NoSamples,

    #[error("bid {0} does not map to any level in the table")]
    LevelLookupMiss(f64),

    #[error("no pair of samples with distinct levels (reward_max = 0)")]
    NoRankedPairs,

    #[error("need at least one positive and one negative sample")]
    NoPosNegPairs,

    #[error("sum of predicted CTRs is zero")]
    ZeroPredictedClicks,

    #[error("sum of predicted revenue is zero")]
    ZeroPredictedRevenue,

    #[error("every group was skipped")]
    AllGroupsSkipped,

    #[error("sample at row {0} has no group key")]
    MissingGroupKey(u64),

    #[error("{n} samples exceed the pairwise cap of {cap}; re-run with --force to override")]
    InputTooLarge { n: u64, cap: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonBinaryLabel(_) => "NonBinaryLabel",
            Error::NonPositiveBid(_) => "NonPositiveBid",
            Error::PctrOutOfRange(_) => "PctrOutOfRange",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::FileNotFound { .. } => "FileNotFound",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::RowParseError { .. } => "RowParseError",
            Error::EmptyInput => "EmptyInput",
            Error::NoSamples => "NoSamples",
            Error::LevelLookupMiss(_) => "LevelLookupMiss",
            Error::NoRankedPairs => "NoRankedPairs",
            Error::NoPosNegPairs => "NoPosNegPairs",
            Error::ZeroPredictedClicks => "ZeroPredictedClicks",
            Error::ZeroPredictedRevenue => "ZeroPredictedRevenue",
            Error::AllGroupsSkipped => "AllGroupsSkipped",
            Error::MissingGroupKey(_) => "MissingGroupKey",
            Error::InputTooLarge { .. } => "InputTooLarge",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
        }
    }
}
