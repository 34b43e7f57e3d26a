use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),
    #[error("invalid sector: {0}")]
    InvalidSector(String),
    #[error("undefined point: {0}")]
    UndefinedPoint(String),
    #[error("no triggering before sigma_bar = {sigma_bar}; increase the value of sigma_bar")]
    HorizonExceeded { sigma_bar: f64 },
    #[error("abstraction failure: {0}")]
    AbstractionFailure(String),
    #[error("assembly error: {0}")]
    Assembly(String),
}
