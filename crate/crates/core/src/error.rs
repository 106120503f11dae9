use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("degenerate pair: {0}")]
    DegeneratePair(String),
    #[error("path has no interior maximum (sigma = {0})")]
    NoMaximum(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no start converged: {0}")]
    Unconverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
