use thiserror::Error;

/// Errors raised by the σ₂ toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectrum is outside the Γ₂ cone (σ₁ = {sigma1:e}, σ₂ = {sigma2:e})")]
    ConeViolation { sigma1: f64, sigma2: f64 },

    #[error("grid point {index} leaves the Γ₂ cone (σ₁ = {sigma1:e}, σ₂ = {sigma2:e})")]
    FieldConeViolation { index: usize, sigma1: f64, sigma2: f64 },

    #[error("rejection sampling exhausted its budget of {budget} trials")]
    SamplingFailure { budget: u64 },

    #[error("eigen-decomposition did not converge within {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error(
        "structured elimination hit a degenerate pivot in step {step} (|pivot| = {pivot:e}); \
         fall back to generic kernel extraction"
    )]
    EliminationDegenerate { step: u8, pivot: f64 },

    #[error("top eigenvalue is not simple (gap {gap:e}); perturb through build_phi first")]
    Multiplicity { gap: f64 },

    #[error("unsupported metric: only the identity metric (normal coordinates) is handled")]
    UnsupportedMetric,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid needs {bytes} bytes, over the {budget}-byte memory budget")]
    MemoryBudget { bytes: u128, budget: u128 },

    #[error("e^F = {value:e} is not positive at grid point {index}")]
    Admissibility { index: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
