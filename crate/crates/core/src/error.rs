use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("value {value} outside the admissible range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("derivative order {order} is not available for {family} curves")]
    UnsupportedOrder { order: usize, family: &'static str },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Carries the partial value so callers can still inspect it.
    #[error("oscillatory quadrature did not converge: {panels} panels, error estimate {error:e}")]
    NonConvergence {
        partial: Complex64,
        error: f64,
        panels: usize,
    },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("scale 2^{k} wraps around the torus")]
    Scale { k: i32 },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("empty range: {0}")]
    EmptyRange(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn range(value: f64, lo: f64, hi: f64) -> Self {
        Error::Range { value, lo, hi }
    }
}
