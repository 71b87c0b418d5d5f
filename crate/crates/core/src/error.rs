use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value while computing Dyson order {order}")]
    NumericalOverflow { order: usize },

    #[error(
        "no truncation order up to {max_order} meets the tail budget {target:e} \
         (best achievable bound {achievable:e})"
    )]
    CertificateUnreachable {
        max_order: usize,
        achievable: f64,
        target: f64,
    },

    #[error("point is not covered by any ball of radius {delta}")]
    UncoveredPoint { delta: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
