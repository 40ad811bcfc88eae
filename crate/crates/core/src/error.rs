use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point violates the model constraint: {0}")]
    InvalidPoint(String),

    #[error("vector is not tangent at its base point (defect {0:e})")]
    NotTangent(f64),

    #[error("tangent vector is not unit length (norm {0})")]
    NotUnit(f64),

    #[error("degenerate point pair: {0}")]
    DegeneratePair(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("frobenius series: {0}")]
    Frobenius(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("quadrature did not converge: value {value}, error estimate {error_estimate:e}")]
    QuadratureNotConverged { value: f64, error_estimate: f64 },

    #[error("curves too close: minimum distance {distance:e} below guard {guard:e}")]
    TooClose { distance: f64, guard: f64 },

    #[error("projection is not generic after {0} attempts")]
    NonGenericProjection(usize),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
