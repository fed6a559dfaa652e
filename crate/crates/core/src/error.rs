use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported resampling ratio {p}/{q} (numerator and denominator must be <= {bound})")]
    UnsupportedRatio { p: u64, q: u64, bound: u64 },

    #[error("channel not found: {0}")]
    ChannelNotFound(String),

    #[error("insufficient data: window [{start}, {end}) exceeds recording of {available} samples")]
    InsufficientData {
        start: i64,
        end: i64,
        available: usize,
    },

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("incomplete calibration: no trials for stimulus {stimulus}")]
    IncompleteCalibration { stimulus: usize },

    #[error("incompatible domains: {0}")]
    IncompatibleDomain(String),

    #[error("montage mismatch: {target_channels} channels in the new domain vs {source_channels} in the source domain")]
    MontageMismatch { target_channels: usize, source_channels: usize },

    #[error("degenerate test: all paired differences are zero")]
    DegenerateTest,

    #[error("undefined normalization: signal is identically zero")]
    UndefinedNormalization,

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("truncated payload at byte {offset}: expected {expected} payload bytes, found {actual}")]
    TruncatedPayload {
        offset: u64,
        expected: u64,
        actual: u64,
    },

    #[error("unsupported container version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("fit failed in band {band}, stimulus {stimulus}: {source}")]
    Fit {
        band: usize,
        stimulus: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation failed for subject {subject}, scheme {scheme}, repeat {repeat}: {source}")]
    Eval {
        subject: String,
        scheme: String,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category name, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnsupportedRatio { .. } => "unsupported-ratio",
            Error::ChannelNotFound(_) => "channel-not-found",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::InvalidBand(_) => "invalid-band",
            Error::IncompleteCalibration { .. } => "incomplete-calibration",
            Error::IncompatibleDomain(_) => "incompatible-domain",
            Error::MontageMismatch { .. } => "montage-mismatch",
            Error::DegenerateTest => "degenerate-test",
            Error::UndefinedNormalization => "undefined-normalization",
            Error::Format { .. } => "format",
            Error::TruncatedPayload { .. } => "truncated-payload",
            Error::UnsupportedVersion { .. } => "unsupported-version",
            Error::InvalidModel(_) => "invalid-model",
            Error::Config(_) => "config",
            Error::Fit { source, .. } | Error::Eval { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
