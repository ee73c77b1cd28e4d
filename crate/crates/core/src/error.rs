use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,

    #[error("empty subgraph")]
    EmptySubgraph,

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("diffusion failed: {0}")]
    DiffusionFailed(String),

    #[error("graph too large for exact enumeration ({n} nodes, limit {limit}); use mc_interaction")]
    TooLargeForExact { n: usize, limit: usize },

    #[error("degenerate profile: every interaction is zero")]
    DegenerateProfile,

    #[error("singular separation between particles {0} and {1}")]
    SingularSeparation(usize, usize),

    #[error("simulation diverged at step {0}")]
    Diverged(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            detail: detail.into(),
        }
    }
}
