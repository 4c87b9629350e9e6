use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular Gram matrix at row {index} (pivot^2 = {pivot:e})")]
    SingularGram { index: usize, pivot: f64 },

    #[error("model has no observed values")]
    MissingValues,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("design of {requested} points exceeds the cap of {cap}")]
    SizeOverflow { requested: u128, cap: usize },

    #[error("every candidate is already part of the design (after {selected} points)")]
    DegenerateCandidates { selected: usize },

    #[error("index {index} out of range for grid of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("bad Wiener grid: {0}")]
    BadGrid(String),

    #[error("need at least two Monte Carlo samples, got {0}")]
    InsufficientSamples(usize),

    #[error("need at least 3 points to fit a rate, got {0}")]
    TooFewPoints(usize),

    #[error("error value {value} at n = {n} is not strictly positive")]
    NonPositiveError { n: u64, value: f64 },

    #[error("n = {0} is below 2; the log correction is undefined")]
    BadN(u64),

    #[error("spectral sandwich check failed: g(u) = {value} at |u| = {radius}")]
    BrokenSpectralDensity { radius: f64, value: f64 },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularGram { .. }
                | Error::DegenerateCandidates { .. }
                | Error::BrokenSpectralDensity { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
