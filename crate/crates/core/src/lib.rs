//! Streaming graph engine for monotonic algorithms.
//!
//! The engine ingests fine-grained edge and vertex updates and keeps a
//! per-update incremental result for BFS, SSSP, SSWP and WCC. Every vertex
//! holds a value and a parent link; the parent links form a dependency tree
//! that lets deletions invalidate only the affected subtree.
//!
//! Updates are split into *safe* ones, which provably leave every value and
//! every tree edge untouched, and *unsafe* ones, which need incremental
//! computation. Safe updates from different sessions run in parallel; unsafe
//! updates run one at a time with parallel propagation inside each. Results
//! are versioned so readers get consistent snapshots.
//!
//! Layout:
//!
//! - [`graph_store`]: indexed adjacency lists with a transpose.
//! - [`algorithms`]: the `init_val` / `gen_next` / `need_upd` contract.
//! - [`engine`]: incremental maintenance, full recomputation, validation.
//! - [`ccontrol`]: classification, the epoch loop and the serial apply path.
//! - [`scheduler`]: decides when the unsafe phase starts.
//! - [`history`]: version chains and modified-vertex lists.
//! - [`wal`]: write-ahead log with CRC-checked records.
//! - [`server`]: newline-delimited JSON over TCP.
//! - [`bench`]: workloads, R-MAT generation, metrics, oracle harness, AFF analysis.

pub mod algorithms;
pub mod bench;
pub mod ccontrol;
pub mod engine;
pub mod error;
pub mod graph_store;
pub mod history;
pub mod scheduler;
pub mod server;
pub mod wal;

pub use algorithms::{AlgorithmDef, AlgorithmKind, Value, UNREACHED};
pub use ccontrol::{Applied, Class, System, SystemConfig, Update};
pub use error::{Error, Result};
pub use graph_store::{GraphStore, VertexId, Weight};
pub use history::VersionId;
