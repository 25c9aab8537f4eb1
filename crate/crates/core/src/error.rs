use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("missing target column `{0}`")]
    MissingTarget(String),

    #[error("column `{0}` not found")]
    ColumnNotFound(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("non-numeric value `{value}` at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("classification target must be 0 or 1, found {value} at row {row}")]
    NonBinaryTarget { row: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("categorical column `{0}` has a single distinct value")]
    DegenerateColumn(String),

    #[error("invalid feature set: {0}")]
    InvalidFeatureSet(String),

    #[error("{0}")]
    Smote(String),

    #[error("{0} is not supported for {1} tasks")]
    TaskMismatch(String, String),

    #[error("expected {expected} input columns, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("expected binary values, found {0}")]
    NonBinaryValue(f64),

    #[error("non-finite input value")]
    NonFinite,

    #[error("correlation undefined: constant vector")]
    ConstantVector,

    #[error("kappa {0} exceeds 1")]
    KappaOutOfRange(f64),

    #[error("no discordant pairs (b = c = 0): McNemar test undefined")]
    NoDiscordantPairs,

    #[error("sample too small: need at least {needed} values, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("fitting {model} at iteration {iteration} (without `{group}`) failed: {source}")]
    Fit {
        model: String,
        iteration: usize,
        group: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Report(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Whether the error stems from invalid user configuration rather than
    /// from a failure while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
