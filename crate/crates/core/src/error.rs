//! Crate-wide error type.

/// Errors reported by tensor, transform, solver and I/O operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// A matrix that must be invertible (or a trace denominator that must be
    /// positive) is numerically singular.
    #[error("singular: {0}")]
    Singular(String),

    /// A quantity that should vanish (e.g. the imaginary residual of an
    /// inverse transform of conjugate-symmetric data) exceeds its tolerance.
    #[error("numerical consistency: {0}")]
    NumericalConsistency(String),

    /// A per-slice subproblem failed; carries the 0-based slice index.
    #[error("slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimMismatch(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Annotate an error with the frontal-slice index it originated from.
    pub fn at_slice(self, slice: usize) -> Self {
        Error::Slice {
            slice,
            source: Box::new(self),
        }
    }

    /// Stable lowercase tag, used by the CLI for machine-parsable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimMismatch(_) => "dim_mismatch",
            Error::Singular(_) => "singular",
            Error::NumericalConsistency(_) => "numerical_consistency",
            Error::Slice { source, .. } => source.kind(),
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
