use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the crate.
///
/// Wrapping variants (`Stage`, `Run`) attach context while keeping the
/// original failure reachable through [`Error::root`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate data: component {component}, step {step} (direction sum vanished)")]
    DegenerateData { component: usize, step: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("oracle refused: {count} vectors exceeds the enumeration limit of {limit}")]
    OracleRefused { count: usize, limit: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("image {path:?} is {found_rows}x{found_cols}, expected {rows}x{cols}")]
    MixedDimensions { path: PathBuf, rows: usize, cols: usize, found_rows: usize, found_cols: usize },

    #[error("bad magic: not a model file")]
    BadMagic,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run} ({phase}): {source}")]
    Run {
        run: usize,
        phase: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn stage(stage: impl Into<String>, source: Error) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(source) }
    }

    pub fn run(run: usize, phase: impl Into<String>, source: Error) -> Self {
        Error::Run { run, phase: phase.into(), source: Box::new(source) }
    }

    /// Innermost error, with every context wrapper stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Run { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
