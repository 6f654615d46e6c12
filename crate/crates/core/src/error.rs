use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid hyperparameter for {learner}: {message}")]
    Hyperparameter {
        learner: &'static str,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("label cardinality: expected exactly two distinct labels, found {0}")]
    LabelCardinality(usize),

    #[error("empty file: {0}")]
    EmptyFile(String),

    #[error("column unimputable: `{0}` is missing in every row")]
    ColumnUnimputable(String),

    #[error("missing hardness score for instance `{0}`")]
    MissingScore(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("single-class data: {0}")]
    SingleClass(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("logistic fit did not converge ({context})")]
    NonConvergent { context: String },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Hyperparameter { .. } | Error::Json(_) => ErrorKind::Config,
            Error::NonFinite(_)
            | Error::NonConvergent { .. }
            | Error::NotPositiveDefinite { .. } => ErrorKind::Numeric,
            Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Wraps the error with a short location such as `split seed 3`.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}
