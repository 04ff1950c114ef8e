use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error at {point:?}: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("metric is not positive definite at {point:?}")]
    Definiteness { point: Vec<f64> },

    #[error("adapted frame is rank deficient at {point:?}")]
    Rank { point: Vec<f64> },

    #[error("degenerate input: {0}")]
    Degeneracy(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("singular conformal factor at {point:?} (value {value})")]
    SingularFactor { point: Vec<f64>, value: f64 },

    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("compactness error: {0}")]
    Compactness(String),

    #[error("step-size error: {0}")]
    StepSize(String),

    #[error("bound undefined: {0}")]
    BoundUndefined(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },
}

impl Error {
    pub(crate) fn domain(point: &[f64], reason: impl Into<String>) -> Self {
        Error::Domain {
            point: point.to_vec(),
            reason: reason.into(),
        }
    }

    /// The offending chart point, when the error carries one.
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            Error::Domain { point, .. }
            | Error::Definiteness { point }
            | Error::Rank { point }
            | Error::SingularFactor { point, .. } => Some(point),
            _ => None,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Definiteness { .. } => "definiteness",
            Error::Rank { .. } => "rank",
            Error::Degeneracy(_) => "degeneracy",
            Error::Configuration(_) => "configuration",
            Error::SingularFactor { .. } => "singular-factor",
            Error::Compatibility(_) => "compatibility",
            Error::Compactness(_) => "compactness",
            Error::StepSize(_) => "step-size",
            Error::BoundUndefined(_) => "bound-undefined",
            Error::NotImplemented(_) => "not-implemented",
            Error::NotFound(_) => "not-found",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Parse { .. } => "parse",
        }
    }

    /// True for errors caused by the input description rather than by the math.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::NotFound(_)
                | Error::Configuration(_)
                | Error::Compactness(_)
                | Error::BoundUndefined(_)
                | Error::NotImplemented(_)
        )
    }
}
