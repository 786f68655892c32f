use num_bigint::BigUint;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid crash pattern: {0}")]
    Pattern(String),

    #[error("invalid network: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("evaluation budget exceeded: {required} pattern x input evaluations required, budget is {budget}")]
    BudgetExceeded { required: BigUint, budget: u64 },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("document error: {0}")]
    Document(String),

    #[error("unsupported network document version {0}")]
    UnsupportedVersion(u64),

    #[error("mixed result schemas: {0}")]
    MixedSchemas(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
