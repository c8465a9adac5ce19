use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "dimension {dim} is not bank-aligned (must be a positive multiple of 128, at most 2048)"
    )]
    Alignment { dim: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("16-bit accumulator saturated at index {index}")]
    Saturation { index: usize },

    #[error("cannot binarize an empty bundle")]
    EmptyBundle,

    #[error("invalid permutation amount {amount} for dimension {dim}")]
    Permutation { amount: usize, dim: usize },

    #[error("unsupported drop width {0} (expected 0, 8 or 16)")]
    DropWidth(usize),

    #[error("hypervector generation failed: {0}")]
    Generation(String),

    #[error("{levels} levels do not fit in dimension {dim}")]
    TooManyLevels { levels: usize, dim: usize },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("{count} rows exceed the 128-row CAM capacity")]
    Capacity { count: usize },

    #[error("class memory is empty")]
    EmptyClassMemory,

    #[error("backend misconfigured: {0}")]
    Backend(String),

    #[error("match-line solver did not converge after {iterations} iterations (last residuals: {trace:?})")]
    Solver { iterations: usize, trace: Vec<f64> },

    #[error("LTA batch must hold between 2 and {batch} currents, got {len}")]
    LtaBatch { len: usize, batch: usize },

    #[error("no currents to compare")]
    LtaEmpty,

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("unknown operation kind `{0}`")]
    UnknownOp(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
