use std::path::PathBuf;

/// Errors produced anywhere in the gait pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("foot target at distance {distance:.4} m is outside the reachable range [{min:.4}, {max:.4}] m of leg {leg}")]
    OutOfReach {
        leg: usize,
        distance: f64,
        min: f64,
        max: f64,
    },
    #[error("infeasible gait: {0}")]
    InfeasibleGait(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("ambiguous drive dimension: top powers {best:.4e} (dim {best_dim}) and {second:.4e} (dim {second_dim}) differ by less than 10%")]
    AmbiguousDrive {
        best_dim: usize,
        best: f64,
        second_dim: usize,
        second: f64,
    },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid cutoff {cutoff_hz} Hz for sample rate {sample_hz} Hz")]
    InvalidCutoff { cutoff_hz: f64, sample_hz: f64 },
    #[error("insufficient history: need {needed} states, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("planner stalled at tick {tick}: {source}")]
    PlannerStall {
        tick: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("statistics mismatch for feature {feature}: header {stored}, body {computed}")]
    StatMismatch {
        feature: usize,
        stored: f64,
        computed: f64,
    },
    #[error("truncated body at byte offset {offset}: {detail}")]
    TruncatedBody { offset: usize, detail: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("drive dimension not identified")]
    DriveUnset,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfReach { .. } => "out_of_reach",
            Error::InfeasibleGait(_) => "infeasible_gait",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::AmbiguousDrive { .. } => "ambiguous_drive",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidCutoff { .. } => "invalid_cutoff",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::PlannerStall { .. } => "planner_stall",
            Error::CorruptHeader(_) => "corrupt_header",
            Error::StatMismatch { .. } => "stat_mismatch",
            Error::TruncatedBody { .. } => "truncated_body",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::MissingField(_) => "missing_field",
            Error::MalformedMessage(_) => "malformed_message",
            Error::Config(_) => "config",
            Error::DriveUnset => "drive_unset",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
