use thiserror::Error;

/// Errors raised by network construction, certification and iteration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("potential is not available for `{0}`")]
    PotentialUnavailable(String),

    #[error("could not bracket the proximal minimizer: {0}")]
    Bracketing(String),

    #[error("operator norm {norm} exceeds 1")]
    NormTooLarge { norm: f64 },

    #[error("invalid layer range {from}..={to} for a network of {layers} layers")]
    LayerRange { from: usize, to: usize, layers: usize },

    #[error("relaxation parameter {lambda} at n = {n} left its declared interval")]
    ScheduleFault { n: usize, lambda: f64 },

    #[error("trace has no reference distances")]
    MissingReference,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
