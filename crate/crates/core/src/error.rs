use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numerical,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no atoms")]
    NoAtoms,

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("degenerate alignment")]
    DegenerateAlignment,

    #[error("no contacts")]
    NoContacts,

    #[error("no pocket residues")]
    NoPocket,

    #[error("pocket too small: {0} C-alpha atoms (need at least 3)")]
    PocketTooSmall(usize),

    #[error("copy limit: {0} ligand copies (at most 10 supported)")]
    CopyLimit(usize),

    #[error("step past terminal: t = {0}")]
    StepPastTerminal(f64),

    #[error("no interface")]
    NoInterface,

    #[error("pocket mapping failed: {mapped} of {total} residues mapped")]
    PocketMappingFailed { mapped: usize, total: usize },

    #[error("degenerate linkage")]
    DegenerateLinkage,

    #[error("invalid linkage: {0}")]
    InvalidLinkage(String),

    #[error("non-finite loss at t = {t} (seed {seed})")]
    NonFiniteLoss { t: f64, seed: u64 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing atoms in {path}: {atoms:?}")]
    MissingAtoms { path: PathBuf, atoms: Vec<String> },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::DegenerateAlignment
            | Error::StepPastTerminal(_)
            | Error::NonFiniteLoss { .. }
            | Error::DegenerateLinkage => ErrorCategory::Numerical,
            Error::ShapeMismatch { .. } => ErrorCategory::Internal,
            _ => ErrorCategory::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
