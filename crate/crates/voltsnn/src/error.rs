//! Error type shared across the simulator.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("weight value is not finite")]
    NonFiniteWeight,

    #[error("code {code} does not fit format {format} (valid range {min}..={max})")]
    CodeOutOfRange {
        code: i64,
        format: String,
        min: i64,
        max: i64,
    },

    #[error("probability out of range: {name} = {value}, expected 0..=1")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("address out of bounds: {dimension} index {index} >= bound {bound}")]
    AddressOutOfBounds {
        dimension: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("insufficient capacity: need {needed_bytes} bytes, only {available_bytes} available")]
    Capacity {
        needed_bytes: u64,
        available_bytes: u64,
    },

    #[error("layout covers {layout_bytes} bytes but tensor stores {tensor_bytes} bytes")]
    LayoutMismatch {
        layout_bytes: usize,
        tensor_bytes: usize,
    },

    #[error("trace error at position {position}: {source}")]
    Trace {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0} is zero, ratio undefined")]
    ZeroDenominator(&'static str),

    #[error("negative input: {name} = {value}")]
    NegativeInput { name: &'static str, value: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("model has no label assignment")]
    UnlabeledModel,

    #[error("malformed dataset file: {0}")]
    DatasetFormat(String),

    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),

    #[error("malformed trace file: {0}")]
    TraceFormat(String),

    #[error("mismatched candidate: {0}")]
    CandidateMismatch(String),

    #[error("accuracy profile unusable: {0}")]
    ProfileUnusable(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad JSON: {0}")]
    Json(#[from] serde_json::Error),
}
