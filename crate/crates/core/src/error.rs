use std::path::PathBuf;

use thiserror::Error;

use crate::config::ComponentKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error at {path}: {msg}")]
    Validation { path: String, msg: String },
    #[error("unknown component {kind}/{name}; registered: [{}]", registered.join(", "))]
    UnknownComponent {
        kind: ComponentKind,
        name: String,
        registered: Vec<String>,
    },
    #[error("duplicate registration of {kind}/{name}")]
    DuplicateComponent { kind: ComponentKind, name: String },
    #[error("{kind}: {source}")]
    Component {
        kind: ComponentKind,
        #[source]
        source: Box<Error>,
    },
    #[error("genotype error: {0}")]
    Genotype(String),
    #[error("search space too large to enumerate: {size} > {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("missing entry: {0}")]
    Missing(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn in_component(self, kind: ComponentKind) -> Self {
        Error::Component {
            kind,
            source: Box::new(self),
        }
    }

    /// True for errors caused by the configuration rather than by running it.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::UnknownComponent { .. }
            | Error::DuplicateComponent { .. } => true,
            Error::Component { source, .. } | Error::Context { source, .. } => {
                source.is_config_error()
            }
            _ => false,
        }
    }
}
