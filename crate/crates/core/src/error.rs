use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("backward already ran on this tape; record a fresh tape per step")]
    TapeConsumed,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("column `{column}` cannot be scaled: {reason}")]
    DegenerateColumn {
        column: String,
        reason: &'static str,
    },

    #[error("normal equations are singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("actual values are constant; R² is undefined")]
    ConstantActual,

    #[error("non-finite gradient for parameter {param} at iteration {iteration}")]
    NanGradient { iteration: usize, param: usize },

    #[error("training diverged at iteration {iteration} (loss {loss})")]
    Diverged {
        iteration: usize,
        loss: f64,
        last_finite: Option<crate::training::LogRow>,
    },

    #[error("scenario is missing {} feature/year values", missing.len())]
    ScenarioGap { missing: Vec<(String, i32)> },
}
