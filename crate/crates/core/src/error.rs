use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems found while reading or validating a hierarchy config.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate node name `{name}`")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: duplicate node id {id}")]
    DuplicateId { line: usize, id: usize },
    #[error("node ids must be dense 0..{count}, id {id} is missing")]
    SparseIds { id: usize, count: usize },
    #[error("line {line}: edge endpoint `{name}` is not a declared node")]
    DanglingEdge { line: usize, name: String },
    #[error("line {line}: edge {parent} -> {child} closes a cycle")]
    Cycle {
        line: usize,
        parent: String,
        child: String,
    },
    #[error("line {line}: edge {parent} ({parent_tier}) -> {child} ({child_tier}) violates tier order")]
    TierViolation {
        line: usize,
        parent: String,
        parent_tier: &'static str,
        child: String,
        child_tier: &'static str,
    },
    #[error("graph has no root node (node 0 must have tier `root`)")]
    MissingRoot,
    #[error("node `{name}` has tier root but only node 0 may be the root")]
    ExtraRoot { name: String },
    #[error("non-root node `{name}` has no parent")]
    Orphan { name: String },
    #[error("graph has no nodes")]
    Empty,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("capacity exceeded: {what} is {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("observed labels match no legal state")]
    InfeasibleEvidence,
    #[error("hierarchy config: {0}")]
    Graph(#[from] GraphError),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
