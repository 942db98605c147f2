use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite state at t = {time}")]
    NumericBlowup { time: f64 },
    #[error("orbit did not close within t_max = {t_max}")]
    NoClosure { t_max: f64 },
    #[error("no sign change of the saddle energy in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("deviation norm {norm:e} exceeded {limit:e} in reset interval {interval}")]
    DeviationBlowup { interval: usize, norm: f64, limit: f64 },
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("growth window too short: {decades:.2} decades")]
    WindowTooShort { decades: f64 },
    #[error("no spectral peak above threshold in band [{lo:.4}, {hi:.4}]")]
    PeakNotFound { lo: f64, hi: f64 },
    #[error("requested interval [{start}, {end}] exceeds available data ending at {available}")]
    IntervalOutOfRange { start: f64, end: f64, available: f64 },
    #[error("sector dimension {dim} exceeds limit {limit}")]
    DimensionGuard { dim: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}
