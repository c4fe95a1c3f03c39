use thiserror::Error;

/// Errors raised across the forecasting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid basis specification: {0}")]
    InvalidBasis(String),
    #[error("gram matrix deviates from identity by {defect:.3e} (tolerance {tolerance:.1e})")]
    GramDefect { defect: f64, tolerance: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("local window around u = {point} holds fewer than 2 observations")]
    DegenerateWindow { point: f64 },
    #[error("all component variances are zero")]
    AllZeroVariance,
    #[error("series must hold at least {needed} curves, got {got}")]
    TooFewCurves { needed: usize, got: usize },
    #[error("design needs more than b + 1 = {needed} rows, got n = {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("design matrix is singular (condition number {condition:.3e}); reduce b, c or p")]
    SingularDesign { condition: f64 },
    #[error("residual covariance is not positive definite")]
    NonPdCovariance,
    #[error("no (b, c) candidate could be fitted")]
    NoFeasiblePair,
    #[error("lag {lag} outside 1..={max}")]
    LagOutOfRange { lag: usize, max: usize },
    #[error("forecast needs {needed} history rows, got {got}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("window holds {got} points, needs at least {needed}")]
    WindowTooSmall { needed: usize, got: usize },
    #[error("simulated path exceeded 1e8 in magnitude at step {step}")]
    ExplosivePath { step: usize },
    #[error("MSE values must be positive")]
    NonPositiveMse,
    #[error("RR denominator MSE_sieve - MSE_true = {0:.3e} is not positive")]
    DegenerateDenominator(f64),
    #[error("series is empty")]
    EmptySeries,
    #[error("too many failed replications: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
