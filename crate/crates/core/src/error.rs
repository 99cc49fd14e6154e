use std::path::PathBuf;

/// Errors raised by the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("time column is not uniformly spaced: first offending row index {index} (deviation {deviation:e} s, tolerance {tolerance:e} s)")]
    NonUniformTime {
        index: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("time column spacing {inferred:e} s disagrees with configured dt {configured:e} s")]
    InconsistentDt { inferred: f64, configured: f64 },

    #[error("no sample interval: supply dt or a time column")]
    MissingDt,

    #[error("record has {0} samples, at least 2 are required")]
    TooFewSamples(usize),

    #[error("unknown fill policy `{0}` (expected `zero` or `hold-last`)")]
    UnknownFillPolicy(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("gap [{start}, {start}+{length}) is outside a record of length {record_len}")]
    GapOutOfRange {
        start: usize,
        length: usize,
        record_len: usize,
    },

    #[error("stack depth {requested} is too large for {record_len} samples (maximum feasible depth is {max})")]
    StackTooDeep {
        requested: usize,
        max: usize,
        record_len: usize,
    },

    #[error("at least 2 snapshot columns are required, got {0}")]
    TooFewSnapshots(usize),

    #[error("no signal energy: every singular value is below the numerical floor")]
    NoSignalEnergy,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid truncation rule: {0}")]
    InvalidTruncation(String),

    #[error("reduced operator of rank {rank} is defective (eigenvector condition {condition:e}); retry with rank {}", rank.saturating_sub(1))]
    DefectiveOperator { rank: usize, condition: f64 },

    #[error("eigendecomposition failed to converge")]
    EigenFailed,

    #[error("singular value decomposition failed to converge")]
    SvdFailed,

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("span of {len} columns cannot be subsampled to {mu} columns")]
    SpanTooShort { len: usize, mu: usize },

    #[error("eigenvalue is zero; it has no continuous-time counterpart")]
    ZeroEigenvalue,

    #[error("mode at {frequency} Hz aliases at sample rate {fs} Hz")]
    Aliasing { frequency: f64, fs: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake_case identifier of the variant, for machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::NonUniformTime { .. } => "non_uniform_time",
            Error::InconsistentDt { .. } => "inconsistent_dt",
            Error::MissingDt => "missing_dt",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::UnknownFillPolicy(_) => "unknown_fill_policy",
            Error::UnknownChannel(_) => "unknown_channel",
            Error::GapOutOfRange { .. } => "gap_out_of_range",
            Error::StackTooDeep { .. } => "stack_too_deep",
            Error::TooFewSnapshots(_) => "too_few_snapshots",
            Error::NoSignalEnergy => "no_signal_energy",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidTruncation(_) => "invalid_truncation",
            Error::DefectiveOperator { .. } => "defective_operator",
            Error::EigenFailed => "eigen_failed",
            Error::SvdFailed => "svd_failed",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::SpanTooShort { .. } => "span_too_short",
            Error::ZeroEigenvalue => "zero_eigenvalue",
            Error::Aliasing { .. } => "aliasing",
            Error::InvalidParameter(_) => "invalid_parameter",
        }
    }
}
