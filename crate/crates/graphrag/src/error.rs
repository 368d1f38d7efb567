use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("entity not found: {0}")]
    EntityNotFound(String),

    #[error("dangling endpoint: {0}")]
    DanglingEndpoint(String),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("fixture miss for template '{template_id}'")]
    FixtureMiss { template_id: String },

    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("unregistered template: {0}")]
    UnknownTemplate(String),

    #[error("unbound template variable '{variable}' for template '{template_id}'")]
    UnboundVariable {
        template_id: String,
        variable: String,
    },

    #[error("summarization error: {0}")]
    Summarization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("anonymization dictionary conflict: {0}")]
    DictionaryConflict(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("extraction failure rate {failed}/{total} exceeds threshold")]
    FailureRate { failed: usize, total: usize },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
