use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed table {path}: {message}")]
    Table { path: PathBuf, message: String },

    #[error("adjacency matrix is not square: {rows} rows, {cols} columns")]
    NonSquare { rows: usize, cols: usize },

    #[error("binary network cell ({row}, {col}) has value {value}, expected 0, 1 or NA")]
    NotBinary { row: String, col: String, value: f64 },

    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),

    #[error("node {0:?} is present in the network but absent from the covariate file")]
    MissingNode(String),

    #[error("unknown node label {0:?}")]
    UnknownNode(String),

    #[error("non-numeric value {value:?} for node {node:?}, variable {variable:?}")]
    NonNumeric {
        node: String,
        variable: String,
        value: String,
    },

    #[error("dyadic covariate file is missing the pair ({sender}, {receiver})")]
    MissingPair { sender: String, receiver: String },

    #[error("dyadic covariate file contains the self-pair ({0}, {0})")]
    SelfPair(String),

    #[error("dyadic covariate file lists the pair ({sender}, {receiver}) twice")]
    DuplicatePair { sender: String, receiver: String },

    #[error("design slab name {0:?} occurs twice after sender/receiver expansion")]
    NameCollision(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("network has {0} nodes; at least 3 are required")]
    TooFewNodes(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires the {expected} family")]
    WrongFamily { expected: &'static str },

    #[error("cholesky factorisation failed after jitter escalation (dimension {dim})")]
    NotPositiveDefinite { dim: usize },

    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {reason}")]
    UnfittableFold { fold: usize, reason: String },

    #[error("density target {0} cannot be bracketed")]
    DensityBracket(f64),
}

impl Error {
    pub(crate) fn table(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Table {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures originating in linear algebra or sampling rather than in the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } | Error::DensityBracket(_) => true,
            Error::Sweep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
