use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("serialize error: {0}")]
    Serialize(String),
    #[error("validation error: {0}")]
    Invalid(String),
}

impl ScenarioError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("zero rate: device has bandwidth but the link SNR bound is 0")]
    ZeroRate,
    #[error("allocation error: {0}")]
    Allocation(String),
    #[error("infeasible decisions: {}", .0.join("; "))]
    Infeasible(Vec<String>),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in head {0}")]
    NonFinite(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("training worker failed: {0}")]
    Worker(String),
    #[error("{0} experiment cells failed; see the manifest")]
    CellsFailed(usize),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
