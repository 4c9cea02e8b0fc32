use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension n = {0}: supported n in 3..=7")]
    InvalidDimension(u32),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),
    #[error("bisection failed: {0}")]
    BisectionFailure(String),
    #[error("blowup detection failed: {0}")]
    BlowupDetection(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
