use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Leading pivot of a Schur step fell below the guard threshold.
    #[error("numerical pivot {pivot:e} below threshold")]
    NumericalPivot { pivot: f64 },

    /// `λ_m^{(m)}` vanished, so the compression covariance cannot be reconstructed.
    #[error("degenerate dual: pivot of lambda vector {relay} is {value:e}")]
    DegenerateDual { relay: usize, value: f64 },

    #[error("degenerate beam direction for user {user}: effective gain {gain:e}")]
    DegenerateDirection { user: usize, gain: f64 },

    #[error("affine power map is not contractive (spectral radius {rho})")]
    NotContractive { rho: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported relay count {0} (expected 7 or 19)")]
    UnsupportedRelayCount(usize),

    #[error("instance is infeasible: dual objective exceeded the power cap")]
    Infeasible,

    #[error("iteration did not converge within {0} iterations")]
    NotConverged(usize),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
