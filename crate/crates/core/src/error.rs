use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for a chain with {vertex_count} vertices")]
    VertexOutOfRange { vertex: usize, vertex_count: usize },

    #[error("weight {weight} on pair ({x}, {y}) is not positive and finite")]
    InvalidWeight { x: usize, y: usize, weight: f64 },

    #[error("asymmetric weights on pair ({x}, {y}): {forward} vs {backward}")]
    AsymmetricWeight {
        x: usize,
        y: usize,
        forward: f64,
        backward: f64,
    },

    #[error("support graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("vertex {0} has zero total weight")]
    ZeroDegree(usize),

    #[error("kernel invariant violated: {0}")]
    InvalidKernel(String),

    #[error("laziness parameter {0} is outside (0, 1)")]
    InvalidLaziness(f64),

    #[error("{what}: {size} exceeds the cap of {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}
