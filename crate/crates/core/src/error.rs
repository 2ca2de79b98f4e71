use thiserror::Error;

use crate::hilbert::HilbertSpace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "hilbert space dimension {dim} exceeds the cap of {cap}; \
         a single dense operator would need about {bytes} bytes"
    )]
    DimensionCap { dim: usize, cap: usize, bytes: u128 },

    #[error("invalid hilbert space: {0}")]
    InvalidSpace(String),

    #[error("operands live on different spaces: {left} vs {right}")]
    SpaceMismatch {
        left: HilbertSpace,
        right: HilbertSpace,
    },

    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit index {index} out of range for {n_qubits} qubit(s)")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("operator is not Hermitian (max |M - M^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(
        "trace drifted by {drift:e} during integration (limit {limit:e}); reduce the step size"
    )]
    TraceDrift { drift: f64, limit: f64 },

    #[error("step size {dt:e} violates the stability guard: dt*||H|| = {product:.4} > {limit}")]
    StepTooLarge { dt: f64, product: f64, limit: f64 },

    #[error("integration produced non-finite values")]
    NonFinite,

    #[error("segment {index} ({label}): {source}")]
    Segment {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_segment(self, index: usize, label: &str) -> Error {
        Error::Segment {
            index,
            label: label.to_string(),
            source: Box::new(self),
        }
    }

    /// True for failures caused by bad user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParams(_)
                | Error::Unsupported(_)
                | Error::DimensionCap { .. }
                | Error::InvalidSpace(_)
                | Error::QubitIndex { .. }
        )
    }
}
