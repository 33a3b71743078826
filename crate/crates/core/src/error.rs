use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("CFL violation: dt = {dt:.6e} exceeds {limit:.6e} (safety {safety})")]
    CflViolation { dt: f64, limit: f64, safety: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFiniteValue(String),

    #[error("order too high: {0}")]
    OrderTooHigh(String),

    #[error("Picard iteration did not contract: {0}")]
    NonContraction(String),

    #[error("invalid taper width: {0}")]
    InvalidWidth(String),

    #[error("packet under-resolved: dx*sqrt(tau) = {value:.4} > {limit}")]
    UnderResolved { value: f64, limit: f64 },

    #[error("geometry violation: {0}")]
    GeometryViolation(String),

    #[error("evaluator failed at vertex {sigma:?}: {source}")]
    EvaluatorFailure {
        sigma: Vec<u8>,
        #[source]
        source: Box<Error>,
    },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("unsupported spatial dimension {0}")]
    DimensionUnsupported(usize),

    #[error("beta = {beta} must exceed {bound}")]
    BetaTooSmall { beta: f64, bound: f64 },

    #[error("{got} angles supplied, at least {needed} required")]
    InsufficientAngles { got: usize, needed: usize },

    #[error("scheduled tau = {0:.4} is below 1")]
    TauBelowOne(f64),

    #[error("noise level delta = {delta:e} outside (0, {bound:e})")]
    DeltaOutOfRange { delta: f64, bound: f64 },

    #[error("point outside the admissible plateau: {0}")]
    OutOfPlateau(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("incompatible data: {0}")]
    Incompatible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::CflViolation { .. } => "CflViolation",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::OrderTooHigh(_) => "OrderTooHigh",
            Error::NonContraction(_) => "NonContraction",
            Error::InvalidWidth(_) => "InvalidWidth",
            Error::UnderResolved { .. } => "UnderResolved",
            Error::GeometryViolation(_) => "GeometryViolation",
            Error::EvaluatorFailure { .. } => "EvaluatorFailure",
            Error::SizeMismatch { .. } => "SizeMismatch",
            Error::DimensionUnsupported(_) => "DimensionUnsupported",
            Error::BetaTooSmall { .. } => "BetaTooSmall",
            Error::InsufficientAngles { .. } => "InsufficientAngles",
            Error::TauBelowOne(_) => "TauBelowOne",
            Error::DeltaOutOfRange { .. } => "DeltaOutOfRange",
            Error::OutOfPlateau(_) => "OutOfPlateau",
            Error::InvalidSweep(_) => "InvalidSweep",
            Error::Incompatible(_) => "Incompatible",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
