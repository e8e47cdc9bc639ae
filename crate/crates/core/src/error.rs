use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("edge ({src}, {dst}) at {path}:{line} references unknown node {missing}")]
    UnknownNode {
        path: PathBuf,
        line: usize,
        src: u64,
        dst: u64,
        missing: u64,
    },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("non-finite loss at training instance {instance} (source node {source_node}, step {step})")]
    NonFiniteLoss { instance: usize, source_node: usize, step: usize },

    #[error("non-finite score: {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing artifact {artifact}; run `hoprank {producer}` first")]
    MissingArtifact { artifact: String, producer: String },

    #[error("stale artifact {artifact}: {message}")]
    StaleArtifact { artifact: String, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
