use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Parameter lies outside the constraint region a model or binding requires.
    #[error("parameter {theta:?} outside {region}")]
    OutsideRegion { theta: Vec<f64>, region: &'static str },

    /// Series shorter than an operation needs (lag-3 autocovariance, AR(2) fit, ...).
    #[error("series of length {got} too short, need at least {need}")]
    SeriesTooShort { need: usize, got: usize },

    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Regressor cross-product matrix is numerically singular.
    #[error("degenerate regression design (singular normal equations)")]
    DegenerateDesign,

    /// ODE state escaped the blow-up guard or became non-finite.
    #[error("numerical blow-up in ODE integration near t = {t}")]
    NumericalBlowup { t: f64 },

    /// Configuration violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An operation that needs draws received none (or too few).
    #[error("sample too small: need at least {need}, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    /// All draws identical; density estimation has no scale to work with.
    #[error("degenerate sample: zero variance")]
    DegenerateSample,

    /// Augmentation plan whose statistic sets are not nested prefix extensions.
    #[error("augmentation step {step} is not a prefix extension of the previous set")]
    NonNestedPlan { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
