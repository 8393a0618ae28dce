use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration input.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A parameter outside the range an operation accepts.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("projection onto the boundary is ambiguous at {0:?}")]
    AmbiguousProjection([f64; 2]),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("fixed-point iteration is not contracting: {0}")]
    NotContracting(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("quadrature failed to reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::UnknownCase(_)
                | Error::Unsupported(_)
                | Error::DegenerateKernel(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
