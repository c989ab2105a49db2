use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the numerical core can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Hurst parameter {0} outside the open interval (0, 1)")]
    HurstOutOfRange(f64),
    #[error("horizon T = {0} must be positive")]
    NonPositiveHorizon(f64),
    #[error("coefficient `{0}` must be finite")]
    NonFiniteCoefficient(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("h0 series overflows at x = {0}")]
    Overflow(f64),
    #[error("h0 never drops below -{0} on the negative axis")]
    NoInterval(f64),
    #[error("argument outside the kernel domain: {0}")]
    DomainError(&'static str),
    #[error("calibration of d_alpha failed for alpha = {0}")]
    CalibrationFailed(f64),
    #[error("covariance matrix not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("quadrature did not stabilise (last change {0:e})")]
    QuadratureDiverged(f64),
    #[error("fractional order {0} below the supported floor")]
    IllConditionedOrder(f64),
    #[error("input too rough for the fractional derivative")]
    RoughInput,
    #[error("operator regime undefined: a Hurst parameter equals 1/2")]
    RegimeUndefined,
    #[error("chaos order {0} exceeds the supported maximum of 4")]
    OrderTooHigh(usize),
    #[error("grid too large for exhaustive evaluation ({0} cells)")]
    GridTooLarge(usize),
    #[error("field does not match the requested operation: {0}")]
    FieldMismatch(&'static str),
    #[error("region Delta contains no grid node")]
    EmptyRegion,
    #[error("chaos truncation too low: order-{order} contribution is {ratio:.3} of the field scale")]
    TruncationTooLow { order: usize, ratio: f64 },
}
