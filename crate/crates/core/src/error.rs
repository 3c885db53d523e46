use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("degenerate softmax row {row}: no legal cell")]
    DegenerateRow { row: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid edge weights: {0}")]
    InvalidWeights(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("division domain: {0}")]
    DivisionDomain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("magic mismatch: expected {expected:?}, found {found:?}")]
    MagicMismatch { expected: [u8; 4], found: [u8; 4] },

    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// An IO error annotated with the file it concerns.
pub(crate) fn at_path(path: &std::path::Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

impl Error {
    /// True for failures of the numerical kernels rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem(_)
                | Error::NonFinite(_)
                | Error::NonFiniteLoss { .. }
                | Error::DegenerateRow { .. }
                | Error::DivisionDomain(_)
        )
    }
}
