use thiserror::Error;

use crate::metric::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input has the wrong shape (non-square matrix, NaN entry, length mismatch).
    #[error("structural error: {0}")]
    Structural(String),

    /// Well-formed matrix that breaks one or more metric axioms.
    #[error("metric axioms violated: {0}")]
    MetricViolation(ValidationReport),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("map is not Lipschitz: `{x1}` and `{x2}` are at distance 0 but their images are not")]
    NotLipschitz { x1: String, x2: String },

    #[error("declared Lipschitz constant {declared} does not match computed constant {computed}")]
    LipschitzMismatch { declared: f64, computed: f64 },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("base measure is not uniformly positive at radius {radius}: minimum ball mass is 0")]
    NotUniformlyPositive { radius: f64 },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("balls around centers `{first}` and `{second}` overlap")]
    BallsOverlap { first: String, second: String },

    #[error("utility hypothesis violated at center `{center}`: ball mass {mass} is not above {threshold}")]
    UtilityHypothesisViolated {
        center: String,
        mass: f64,
        threshold: f64,
    },

    #[error("output space has {size} points; subset enumeration is limited to {limit} (use the singleton audit instead)")]
    SubsetGate { size: usize, limit: usize },

    #[error("invalid mechanism table: {0}")]
    InvalidTable(String),

    #[error("internal invariant broken: {0}")]
    Internal(String),
}

impl Error {
    /// Short machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::MetricViolation(_) => "metric_violation",
            Error::UnknownLabel(_) => "unknown_label",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotLipschitz { .. } => "not_lipschitz",
            Error::LipschitzMismatch { .. } => "lipschitz_mismatch",
            Error::DegenerateMeasure(_) => "degenerate_measure",
            Error::NotUniformlyPositive { .. } => "not_uniformly_positive",
            Error::SpaceMismatch(_) => "space_mismatch",
            Error::BallsOverlap { .. } => "balls_overlap",
            Error::UtilityHypothesisViolated { .. } => "utility_hypothesis_violated",
            Error::SubsetGate { .. } => "subset_gate",
            Error::InvalidTable(_) => "invalid_table",
            Error::Internal(_) => "internal",
        }
    }
}
