use crate::graph::NodeId;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) does not exist")]
    MissingEdge(NodeId, NodeId),
    #[error("edge ({u}, {v}) has invalid length {length}")]
    InvalidLength { u: NodeId, v: NodeId, length: f64 },
    #[error("edge ({u}, {v}) has invalid similarity {similarity}")]
    InvalidSimilarity {
        u: NodeId,
        v: NodeId,
        similarity: f64,
    },
    #[error("label signal has {labels} entries but graph has {nodes} nodes")]
    LengthMismatch { labels: usize, nodes: usize },
    #[error("invalid label value {0} (expected -1 or +1)")]
    InvalidLabel(String),
    #[error("node {0} is already labeled")]
    AlreadyLabeled(NodeId),
    #[error("residual component containing node {0} has no labeled member")]
    UnlabeledComponent(NodeId),
    #[error("residual component containing node {0} has conflicting labels")]
    ConflictingComponent(NodeId),
    #[error("the cut is empty")]
    EmptyCut,
    #[error("edge ({0}, {1}) is not a cut edge")]
    NotCutEdge(NodeId, NodeId),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("budget {budget} is invalid for a graph with {n} nodes")]
    InvalidBudget { budget: usize, n: usize },
    #[error("eigen-solver failed at greedy step {step}")]
    EigenFailure { step: usize },
    #[error("sample set is empty")]
    EmptySamples,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vectors have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("graphs do not share the same topology")]
    TopologyMismatch,
    #[error("stability threshold must be nonnegative, got {0}")]
    InvalidThreshold(f64),
    #[error("full-cut stopping requires an oracle that knows the true cut size")]
    UnknownCutSize,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate kernel width (sigma = 0)")]
    DegenerateSigma,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
