use thiserror::Error;

/// Errors raised by the numerical core (grids, correlation, leakage, synthesis).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("density has {got} samples but the axis has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative density value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("non-finite density value at index {index}")]
    NonFinite { index: usize },
    #[error("signal integrates to zero")]
    AllZeroSignal,
    #[error("distribution is not normalized")]
    NotNormalized,
    #[error("unit mismatch: {0} vs {1}")]
    UnitMismatch(String, String),
    #[error("axis ranges do not overlap")]
    NoOverlap,
    #[error("distributions are not on a common grid")]
    GridMismatch,
    #[error("density never falls below half maximum on the {side} side of the peak")]
    NoCrossing { side: &'static str },
    #[error("empty input")]
    EmptyInput,
    #[error("clock period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("missing input: {0}")]
    MissingInput(&'static str),
    #[error("ensemble has no '{0}' data for every diode")]
    MissingParameter(String),
    #[error("joint observation grid has {cells} cells, budget is {budget}")]
    TooManyParameters { cells: u128, budget: u64 },
    #[error("basis pairs have different priors")]
    PriorMismatch,
    #[error("pair mixes 1D and 2D observations")]
    KindMismatch,
    #[error("grid does not span +/-4 sigma around {mean} (sigma {sigma})")]
    GridTooNarrow { mean: f64, sigma: f64 },
    #[error("Monte-Carlo estimate needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("downsample factor {factor} is invalid for a {rows}x{cols} mode")]
    BadDownsample { factor: usize, rows: usize, cols: usize },
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
}

pub type Result<T> = std::result::Result<T, Error>;
