use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("negative density: {0}")]
    NegativeDensity(String),
    #[error("zero-mass basis: {0}")]
    ZeroMassBasis(String),
    #[error("no compact solution: {0}")]
    NoCompactSolution(String),
    #[error("particle blow-up: {0}")]
    BlowUp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
