use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Variants split into configuration problems (bad inputs) and numerical
/// failures (singular systems, resonances, non-convergence); see
/// [`Error::is_numerical`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resonance: boundary-value denominator {magnitude:e} below threshold (zeta = {zeta})")]
    Resonance { zeta: String, magnitude: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("ill-posed problem: m_b + M_a = {total:e} is below K = {threshold:e}")]
    IllPosed { total: f64, threshold: f64 },

    #[error("contour passes through a zero of the function ({0})")]
    ContourThroughZero(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("maximum subdivision depth exceeded in cell {0}")]
    MaxDepthExceeded(String),

    #[error("continuation failed: {0}")]
    Continuation(String),

    #[error("blow-up: {0}")]
    BlowUp(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("null space of dimension greater than one detected")]
    MultipleNullVectors,
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidParameter(_) | Error::ShapeMismatch { .. } | Error::InvalidGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
