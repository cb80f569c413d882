//! Benchmark and verification tooling: edge files, the R-MAT generator,
//! workload generation, closed-loop runners, the oracle harness, AFF
//! analysis and the parallel-mode model fit.

pub mod aff;
pub mod fit;
pub mod io;
pub mod metrics;
pub mod rmat;
pub mod runner;
pub mod verify;
pub mod workload;

pub use aff::{aff_analyze, AffReport};
pub use metrics::RunMetrics;
pub use rmat::rmat_edges;
pub use verify::{verify, Divergence, DivergenceKind, VerifyReport};
pub use workload::{gen_workload, Workload, WorkloadOp, WorkloadSpec};

use crate::graph_store::{VertexId, Weight};

pub type Edge = (VertexId, VertexId, Weight);
