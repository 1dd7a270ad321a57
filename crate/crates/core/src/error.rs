use alloc::string::String;

use crate::instance::{RequestId, Time};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("metric has no nodes")]
    EmptyMetric,
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("metric declares n={declared} but has {rows} rows")]
    DimensionMismatch { declared: usize, rows: usize },
    #[error("dist[{0}][{0}] is not zero")]
    NonzeroDiagonal(usize),
    #[error("dist[{0}][{1}] differs from dist[{1}][{0}]")]
    Asymmetry(usize, usize),
    #[error("distinct nodes {0} and {1} are at distance zero")]
    ZeroDistance(usize, usize),
    #[error("triangle inequality fails: dist[{i}][{j}] > dist[{i}][{k}] + dist[{k}][{j}]")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("node {node} is out of range for a metric with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("{what}: size {size} exceeds the exact-solver cap {cap}")]
    InstanceTooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("instance has no requests")]
    EmptyInstance,
    #[error("request {id}: {reason}")]
    InvalidRequest { id: RequestId, reason: &'static str },
    #[error("policy protocol error at t={t}: {reason}")]
    PolicyProtocol { t: Time, reason: String },
    #[error("request source protocol error at t={t}: {reason}")]
    SourceProtocol { t: Time, reason: String },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("transcript mismatch: {0}")]
    TranscriptMismatch(&'static str),
    #[error("request {0} has no counterpart in the other sequence")]
    RequestMismatch(RequestId),
    #[error("cancelled")]
    Cancelled,
}
