use thiserror::Error;

/// Errors raised while building or solving a fracture network problem.
#[derive(Debug, Error)]
pub enum DfnError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("meshing failed: {0}")]
    Mesh(String),
    #[error("overlay failed: {0}")]
    Overlay(String),
    #[error("stabilization setup failed: {0}")]
    Stabilization(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DfnError>;
