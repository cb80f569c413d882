//! Update classification and the epoch loop.
//!
//! An update is *safe* when it can change no value and no tree edge for any
//! maintained algorithm. The test is O(1) per algorithm:
//!
//! - vertex insertion, and deletion of an isolated vertex, are safe;
//! - an edge deletion is safe unless it removes the last copy of the
//!   destination's tree edge;
//! - an edge insertion is safe unless it improves its destination.
//!
//! A transaction is safe iff all of its parts are.

mod coordinator;
mod system;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::graph_store::{VertexId, Weight};
use crate::history::VersionId;

pub use coordinator::{Coordinator, CoordinatorConfig, Reply, Session};
pub use system::{RecoveryReport, SafeOutcome, System, SystemConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Update {
    InsEdge {
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    },
    DelEdge {
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    },
    InsVertex,
    DelVertex(VertexId),
    /// Applied atomically; may not contain another transaction.
    Txn(Vec<Update>),
}

impl Update {
    pub fn ins(src: VertexId, dst: VertexId, weight: Weight) -> Self {
        Update::InsEdge { src, dst, weight }
    }

    pub fn del(src: VertexId, dst: VertexId, weight: Weight) -> Self {
        Update::DelEdge { src, dst, weight }
    }

    /// Whether the update adds or removes a vertex anywhere inside it.
    pub fn has_vertex_op(&self) -> bool {
        match self {
            Update::InsVertex | Update::DelVertex(_) => true,
            Update::Txn(ops) => ops.iter().any(Update::has_vertex_op),
            _ => false,
        }
    }

    /// The same update with insertions and deletions of edges swapped.
    pub fn inverse_edge_op(&self) -> Option<Update> {
        match *self {
            Update::InsEdge { src, dst, weight } => Some(Update::DelEdge { src, dst, weight }),
            Update::DelEdge { src, dst, weight } => Some(Update::InsEdge { src, dst, weight }),
            Update::Txn(ref ops) => ops
                .iter()
                .map(Update::inverse_edge_op)
                .collect::<Option<Vec<_>>>()
                .map(Update::Txn),
            _ => None,
        }
    }

    /// Number of primitive operations.
    pub fn op_count(&self) -> usize {
        match self {
            Update::Txn(ops) => ops.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Safe,
    Unsafe,
    /// Queued behind an unsafe update of the same session; classified again
    /// next epoch.
    NextEpoch,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Safe => "safe",
            Class::Unsafe => "unsafe",
            Class::NextEpoch => "next_epoch",
        }
    }
}

/// Outcome of a committed update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub class: Class,
    /// Result version after the update. Safe updates return the existing one.
    pub version: VersionId,
    /// Ids assigned to inserted vertices, in order.
    pub new_vertices: Vec<VertexId>,
}

#[derive(Debug, Clone, Default)]
pub struct EpochReport {
    pub safe_count: u64,
    pub unsafe_count: u64,
    pub deferred_count: u64,
    pub epoch_wall_time: Duration,
    /// Enqueue-to-reply time of every update answered this epoch.
    pub latencies: Vec<Duration>,
}
