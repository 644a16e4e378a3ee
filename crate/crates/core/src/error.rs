use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("feasible region appears empty: {accepted} of {proposals} proposals accepted")]
    InfeasibleRegion { accepted: usize, proposals: usize },

    #[error("need at least {k} points for {k} clusters, got {points}")]
    TooFewPoints { points: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("series has zero variance; higher standardized moments are undefined")]
    ZeroVariance,

    #[error("objective produced a non-finite score")]
    NonFiniteScore,

    #[error("objective failed at {weights:?}: {reason}")]
    ObjectiveFailure { weights: Vec<f64>, reason: String },

    #[error("insufficient history: need more than {required} periods, have {available}")]
    InsufficientHistory { required: usize, available: usize },

    #[error("every factor is cross-sectionally constant")]
    DegenerateFactor,

    #[error("curves are not aligned on dates")]
    DateMisalignment,

    #[error("return series has zero volatility")]
    ZeroVol,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("panel is empty after alignment")]
    EmptyPanel,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InfeasibleRegion { .. } => "infeasible_region",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroVariance => "zero_variance",
            Error::NonFiniteScore => "non_finite_score",
            Error::ObjectiveFailure { .. } => "objective_failure",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::DegenerateFactor => "degenerate_factor",
            Error::DateMisalignment => "date_misalignment",
            Error::ZeroVol => "zero_vol",
            Error::Parse { .. } => "parse_error",
            Error::EmptyPanel => "empty_panel",
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config_error",
            Error::Io(_) => "io_error",
        }
    }
}
