use thiserror::Error;

/// Errors raised by the operator calculus and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectrum {values:?} lies outside the open cone P_{p} (min subset sum {margin:e})")]
    OutsideCone { values: Vec<f64>, p: usize, margin: f64 },

    #[error("dimension n = {n} exceeds the supported maximum of {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("cone violation at node {node}: min subset sum {margin:e}")]
    ConeViolation { node: usize, margin: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singular matrix: zero pivot in column {0}")]
    SingularMatrix(usize),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("invalid grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
