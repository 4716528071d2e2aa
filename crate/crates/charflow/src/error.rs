use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("field has {got} components, expected {expected}")]
    ComponentCount { expected: usize, got: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("computation budget exhausted: {0}")]
    ComputationBudgetExhausted(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("conjugate gradient did not converge: residual {0:.3e}")]
    CgNoConvergence(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
