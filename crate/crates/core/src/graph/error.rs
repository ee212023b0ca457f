use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("word {word:?} already exists in language {language}")]
    DuplicateWord { word: String, language: String },
    #[error("word is empty after normalization")]
    EmptyWord,
    #[error("invalid language code {0:?}")]
    InvalidLanguage(String),
    #[error("invalid tag {0:?}")]
    InvalidTag(String),
    #[error("no element with id {0}")]
    NotFound(String),
    #[error("edge endpoints must differ (got {0} twice)")]
    SelfLoop(String),
    #[error("nodes {0} and {1} are already linked")]
    DuplicateEdge(String, String),
    #[error("hyper-edge needs at least 2 distinct nodes, got {0}")]
    TooFewNodes(usize),
    #[error("document reference {0:?} must be a relative path inside the data directory")]
    InvalidDocumentRef(String),
    #[error("radius must be at least 1")]
    InvalidRadius,
    #[error("integrity violation at {id}: {reason}")]
    Integrity { id: String, reason: String },
    #[error("unsupported graph file version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("snapshot {0:?} already exists")]
    DuplicateSnapshotName(String),
    #[error("invalid snapshot name {0:?}")]
    InvalidSnapshotName(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GraphError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GraphError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::DuplicateWord { .. } => "DuplicateWord",
            GraphError::EmptyWord => "EmptyWord",
            GraphError::InvalidLanguage(_) => "InvalidLanguage",
            GraphError::InvalidTag(_) => "InvalidTag",
            GraphError::NotFound(_) => "NotFound",
            GraphError::SelfLoop(_) => "SelfLoop",
            GraphError::DuplicateEdge(..) => "DuplicateEdge",
            GraphError::TooFewNodes(_) => "TooFewNodes",
            GraphError::InvalidDocumentRef(_) => "InvalidDocumentRef",
            GraphError::InvalidRadius => "InvalidRadius",
            GraphError::Integrity { .. } => "IntegrityError",
            GraphError::SchemaVersionMismatch { .. } => "SchemaVersionMismatch",
            GraphError::Parse { .. } => "ParseError",
            GraphError::DuplicateSnapshotName(_) => "DuplicateSnapshotName",
            GraphError::InvalidSnapshotName(_) => "InvalidSnapshotName",
            GraphError::Io { .. } => "IoError",
        }
    }
}
