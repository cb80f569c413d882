use thiserror::Error;

use crate::graph_store::{VertexId, Weight};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex {0} still has live edges")]
    NotIsolated(VertexId),
    #[error("edge {src}->{dst} (weight {weight}) not found")]
    EdgeNotFound {
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    },
    #[error("negative weight {0} is not allowed for sssp")]
    NegativeWeight(Weight),
    #[error("version {0} has been reclaimed")]
    VersionReclaimed(u64),
    #[error("version {0} does not exist yet")]
    UnknownVersion(u64),
    #[error("no algorithm at index {0}")]
    UnknownAlgorithm(usize),
    #[error("nested transactions are not supported")]
    NestedTxn,
    #[error("wal: {0}")]
    Wal(String),
    #[error("wal record at byte {offset} is corrupt: {reason}")]
    CorruptBody { offset: u64, reason: String },
    #[error("replay diverged at record {seq}: {reason}")]
    ReplayDivergence { seq: u64, reason: String },
    #[error("io: {0}")]
    Io(String),
    #[error("engine is shut down")]
    Shutdown,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
