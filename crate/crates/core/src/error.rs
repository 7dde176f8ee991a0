use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` declared in the schema is missing from the header")]
    MissingColumn(String),

    #[error("row {row}: cannot parse `{value}` as a number in column `{column}`")]
    UnparseableNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: `{value}` is not a declared level of column `{column}`")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("stratum {stratum} contains a single row")]
    SingletonStratum { stratum: String },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("labels contain one class")]
    SingleClass,

    #[error("encoded column map differs from the one the model was fitted on")]
    ColumnMapMismatch,

    #[error("mutable features non-empty: every feature is immutable")]
    NoMutableFeatures,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("adapter exited unexpectedly (status {status:?}): {stderr}")]
    AdapterExited { status: Option<i32>, stderr: String },

    #[error("adapter sent a malformed line `{line}`: {reason}")]
    AdapterMalformed { line: String, reason: String },

    #[error("adapter did not answer within {secs} s")]
    AdapterTimeout { secs: f64 },

    #[error("adapter protocol violation{}: {reason}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    AdapterProtocol { row: Option<usize>, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (configuration, schema, data
    /// shape) as opposed to failures while running a stage.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Schema(_) | Error::Toml(_))
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
