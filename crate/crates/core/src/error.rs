use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum DdrError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("topology error in {entity} {id}: {message}")]
    Topology {
        entity: &'static str,
        id: usize,
        message: String,
    },

    #[error("singular local system on element {element} ({what})")]
    SingularLocal { element: usize, what: &'static str },

    #[error("singular Gram matrix for {0}")]
    SingularGram(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("eigen solver did not converge: {0}")]
    Eigen(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DdrError>;
