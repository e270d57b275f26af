//! Crate-wide error type and its coarse classification used by front ends.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: left operand has {left} points, right operand has {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("grid points must be strictly increasing (violation at index {index})")]
    GridNotIncreasing { index: usize },

    #[error("grid needs at least 2 points, got {got}")]
    GridTooSmall { got: usize },

    #[error("curve has {values} values but its grid has {points} points")]
    CurveLength { values: usize, points: usize },

    #[error("projection basis is not orthonormal: max Gram deviation {deviation:.3e} exceeds {limit:.1e}")]
    BasisNotOrthonormal { deviation: f64, limit: f64 },

    #[error("projection semi-metric requires curve elements, got {found}")]
    ProjectionNeedsCurves { found: &'static str },

    #[error("space mismatch: expected {expected}, got {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("invalid {name}: {message}")]
    InvalidParam { name: &'static str, message: String },

    #[error("samples are empty")]
    EmptySamples,

    #[error("sample at index {index} is {value}; samples must be finite and nonnegative")]
    BadSample { index: usize, value: f64 },

    #[error("Orlicz norm bracket expanded past 2^60 without enclosing the root; norm is effectively infinite for this sample")]
    NormUnbounded,

    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("empty neighborhood: no kernel mass within bandwidth {h}")]
    EmptyNeighborhood { h: f64 },

    #[error("probability {p} exceeds the largest attained small-ball estimate {max}")]
    ProbabilityAboveMax { p: f64, max: f64 },

    #[error("log-log fit requires positive values, got {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("degenerate design: abscissa {value} is duplicated or out of order")]
    DegenerateDesign { value: f64 },

    #[error("rule `{rule}` failed to parse: {message}")]
    RuleParse { rule: String, message: String },

    #[error("rule `{rule}` evaluated to {value} at n = {n}: {message}")]
    RuleValue {
        rule: String,
        n: usize,
        value: f64,
        message: String,
    },

    #[error("{context}: {message}")]
    Data { context: String, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error class, mapped to process exit codes by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or parameters supplied by the caller.
    Config,
    /// Malformed or inconsistent input data.
    Data,
    /// A numeric procedure could not produce a result.
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParam { .. } | RuleParse { .. } | RuleValue { .. } | KOutOfRange { .. } => {
                ErrorClass::Config
            }
            GridMismatch { .. }
            | GridNotIncreasing { .. }
            | GridTooSmall { .. }
            | CurveLength { .. }
            | BasisNotOrthonormal { .. }
            | ProjectionNeedsCurves { .. }
            | SpaceMismatch { .. }
            | EmptySamples
            | BadSample { .. }
            | Data { .. }
            | Csv(_)
            | Io(_) => ErrorClass::Data,
            NormUnbounded
            | EmptyNeighborhood { .. }
            | ProbabilityAboveMax { .. }
            | NonPositiveValue { .. }
            | TooFewPoints { .. }
            | DegenerateDesign { .. } => ErrorClass::Numeric,
        }
    }
}
