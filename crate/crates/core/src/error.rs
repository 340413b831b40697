use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite input sample at index {0}")]
    NonFinite(usize),

    #[error("generator matrix is singular: leading {0}x{0} submatrix has no inverse over Z2")]
    SingularGenerator(usize),

    #[error("smallest-scale response is {ratio:.3e} of its peak at the spectrum wrap point (limit 1e-4)")]
    Aliasing { ratio: f64 },

    #[error(
        "filter bank is not invertible: lower frame bound {lower:.3e} vs upper {upper:.3e} (frequency block {bin})"
    )]
    NotInvertible { lower: f64, upper: f64, bin: usize },

    #[error("coefficients were not produced by the design this synthesis bank belongs to")]
    DesignMismatch,

    #[error("brute-force guard: {0}")]
    TooLarge(String),

    #[error("could not bracket the -3 dB crossings of the response")]
    Bracket,

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
