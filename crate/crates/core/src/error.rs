use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("estimator undefined: {0}")]
    UndefinedEstimator(String),
    #[error("depth {k} not resolvable: rescaled radius {radius:.3} lattice units is below 2")]
    Resolution { k: u32, radius: f64 },
    #[error("ensemble extinct at shell {shell}")]
    Extinction { shell: u32 },
    #[error("lattice coordinate out of range: {0:?}")]
    CoordinateOverflow([i32; 3]),
    #[error("malformed record: {0}")]
    Decode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
