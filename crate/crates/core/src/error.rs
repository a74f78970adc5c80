use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("too many points for exhaustive search: {got} > {max}")]
    TooManyPoints { max: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("no bracket for r_n(beta): {0}")]
    NoBracket(String),
    #[error("rejection sampler gave up after {0} consecutive rejections")]
    RejectionLimit(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
