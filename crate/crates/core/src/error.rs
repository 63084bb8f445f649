use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inverse did not converge after {iterations} iterations (target {target})")]
    NoConvergence { target: f64, iterations: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ambiguous membership: point {point} lies {distance:e} from an orbit point")]
    AmbiguousMembership { point: f64, distance: f64 },

    #[error("orbit spacing collapsed to {0:e}")]
    SpacingCollapse(f64),

    #[error("inverse map is not available for this system")]
    MissingInverse,

    #[error("sequences with different default symbols have infinite distance")]
    DefaultMismatch,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by the request rather than by the computation.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Precondition(_) | Error::Config(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
