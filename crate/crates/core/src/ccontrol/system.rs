use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rayon::ThreadPool;
use rustc_hash::{FxHashMap, FxHashSet};

use super::{Applied, Class, Update};
use crate::algorithms::{AlgorithmDef, Value};
use crate::engine::{build_pool, ChangeSet, DependencyState, Engine, EngineOptions};
use crate::error::{Error, Result};
use crate::graph_store::{DeleteOutcome, GraphStore, SourceGuard, VertexId, Weight};
use crate::history::{History, VersionId};
use crate::wal::{self, FsyncPolicy, Wal};

#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub algos: Vec<AlgorithmDef>,
    pub threads: usize,
    pub engine: EngineOptions,
    pub wal: Option<PathBuf>,
    pub fsync: FsyncPolicy,
    /// Retained-version count above which reclamation logs a warning.
    pub history_warn: u64,
}

impl SystemConfig {
    pub fn new(algos: Vec<AlgorithmDef>) -> Self {
        SystemConfig {
            algos,
            threads: 1,
            engine: EngineOptions::default(),
            wal: None,
            fsync: FsyncPolicy::default(),
            history_warn: 10_000,
        }
    }
}

/// Result of the parallel safe path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafeOutcome {
    Applied(Applied),
    /// Classified unsafe; nothing was changed.
    Unsafe,
    /// Changes the vertex table; must go through [`System::apply`].
    Serial,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub replayed: u64,
    pub torn_tail: bool,
    pub last_seq: Option<u64>,
}

/// Graph, per-algorithm engines, history and log.
pub struct System {
    graph: GraphStore,
    engines: Vec<Engine>,
    history: Arc<RwLock<History>>,
    wal: Option<Mutex<Wal>>,
    pool: Arc<ThreadPool>,
    threads: usize,
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System")
            .field("vertices", &self.graph.num_vertices())
            .field("edges", &self.graph.num_edges())
            .field("engines", &self.engines)
            .finish()
    }
}

impl System {
    /// Builds a system over `graph`. A configured log file is truncated.
    pub fn new(graph: GraphStore, config: &SystemConfig) -> Result<Self> {
        let mut sys = Self::without_wal(graph, config)?;
        if let Some(path) = &config.wal {
            wal::truncate_to(path, 0)?;
            sys.wal = Some(Mutex::new(Wal::open(path, config.fsync, 1)?));
        }
        Ok(sys)
    }

    fn without_wal(graph: GraphStore, config: &SystemConfig) -> Result<Self> {
        if config.algos.is_empty() {
            return Err(Error::UnknownAlgorithm(0));
        }
        let pool = build_pool(config.threads);
        let engines = config
            .algos
            .iter()
            .map(|&a| Engine::new(&graph, a, pool.clone(), config.engine))
            .collect::<Result<Vec<_>>>()?;
        let states: Vec<DependencyState> = engines.iter().map(Engine::snapshot).collect();
        let mut history = History::new(config.algos.clone(), &states);
        history.set_retain_warning(config.history_warn);
        Ok(System {
            graph,
            engines,
            history: Arc::new(RwLock::new(history)),
            wal: None,
            pool,
            threads: config.threads.max(1),
        })
    }

    /// Rebuilds the committed state from `base` plus the configured log,
    /// replaying each record through [`System::apply`]. A torn tail is cut
    /// off and appends resume after the last intact record.
    pub fn recover(base: GraphStore, config: &SystemConfig) -> Result<(Self, RecoveryReport)> {
        let mut sys = Self::without_wal(base, config)?;
        let Some(path) = &config.wal else {
            return Ok((sys, RecoveryReport::default()));
        };
        let contents = wal::read_wal(path)?;
        if contents.torn_tail {
            tracing::warn!(valid_len = contents.valid_len, "dropping torn log tail");
            wal::truncate_to(path, contents.valid_len)?;
        }
        let mut report = RecoveryReport {
            torn_tail: contents.torn_tail,
            ..RecoveryReport::default()
        };
        for rec in &contents.records {
            let applied = sys
                .apply(&rec.update)
                .map_err(|e| Error::ReplayDivergence {
                    seq: rec.seq,
                    reason: e.to_string(),
                })?;
            if applied.new_vertices != rec.assigned {
                return Err(Error::ReplayDivergence {
                    seq: rec.seq,
                    reason: format!(
                        "assigned vertex ids {:?}, log has {:?}",
                        applied.new_vertices, rec.assigned
                    ),
                });
            }
            report.replayed += 1;
            report.last_seq = Some(rec.seq);
        }
        let next = report.last_seq.map_or(1, |s| s + 1);
        sys.wal = Some(Mutex::new(Wal::open(path, config.fsync, next)?));
        Ok((sys, report))
    }

    pub fn graph(&self) -> &GraphStore {
        &self.graph
    }

    pub fn engines(&self) -> &[Engine] {
        &self.engines
    }

    pub fn engine(&self, algo: usize) -> Result<&Engine> {
        self.engines.get(algo).ok_or(Error::UnknownAlgorithm(algo))
    }

    pub fn engine_mut(&mut self, algo: usize) -> Result<&mut Engine> {
        self.engines
            .get_mut(algo)
            .ok_or(Error::UnknownAlgorithm(algo))
    }

    pub fn algos(&self) -> Vec<AlgorithmDef> {
        self.engines.iter().map(|e| *e.algo()).collect()
    }

    pub fn history(&self) -> &Arc<RwLock<History>> {
        &self.history
    }

    pub fn pool(&self) -> &Arc<ThreadPool> {
        &self.pool
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn current_version(&self) -> VersionId {
        self.history.read().current()
    }

    pub fn values(&self, algo: usize) -> Result<Vec<Value>> {
        Ok(self.engine(algo)?.snapshot().values)
    }

    pub fn state(&self, algo: usize) -> Result<DependencyState> {
        Ok(self.engine(algo)?.snapshot())
    }

    pub fn sync_wal(&self) -> Result<()> {
        if let Some(w) = &self.wal {
            w.lock().sync()?;
        }
        Ok(())
    }

    pub fn has_wal(&self) -> bool {
        self.wal.is_some()
    }

    /// Safe or Unsafe, without changing anything. Errors if the update is
    /// invalid against the current graph.
    pub fn classify(&self, update: &Update) -> Result<Class> {
        let count = |s, d, w| self.graph.lookup_count(s, d, w).unwrap_or(0);
        let mut sim = Sim::new(self, &count, update);
        sim.run(update)?;
        Ok(sim.class())
    }

    /// Applies `update` if it is safe and touches only edges. Holds the
    /// out-list locks of every source for the whole classify-apply-log step,
    /// so concurrent safe updates serialize per source.
    pub fn try_apply_safe(&self, update: &Update) -> Result<SafeOutcome> {
        if update.has_vertex_op() {
            return Ok(SafeOutcome::Serial);
        }
        let mut srcs: Vec<VertexId> = match update {
            Update::Txn(ops) => ops.iter().filter_map(edge_src).collect(),
            op => edge_src(op).into_iter().collect(),
        };
        if matches!(update, Update::Txn(ops) if ops.iter().any(|o| matches!(o, Update::Txn(_)))) {
            return Err(Error::NestedTxn);
        }
        srcs.sort_unstable();
        srcs.dedup();
        let mut guards: Vec<SourceGuard<'_>> = srcs
            .iter()
            .map(|&s| self.graph.lock_source(s))
            .collect::<Result<_>>()?;
        let class = {
            let count = |s: VertexId, d: VertexId, w: Weight| match srcs.binary_search(&s) {
                Ok(i) => guards[i].count(d, w),
                Err(_) => 0,
            };
            let mut sim = Sim::new(self, &count, update);
            sim.run(update)?;
            sim.class()
        };
        if class == Class::Unsafe {
            return Ok(SafeOutcome::Unsafe);
        }
        let mut apply = |op: &Update| -> Result<()> {
            let (s, d, w, ins) = match *op {
                Update::InsEdge { src, dst, weight } => (src, dst, weight, true),
                Update::DelEdge { src, dst, weight } => (src, dst, weight, false),
                _ => unreachable!("vertex ops take the serial path"),
            };
            let g = &mut guards[srcs.binary_search(&s).expect("source locked")];
            if ins {
                g.insert(d, w)?;
            } else {
                g.delete(d, w)?;
            }
            Ok(())
        };
        match update {
            Update::Txn(ops) => ops.iter().try_for_each(&mut apply)?,
            op => apply(op)?,
        }
        if let Some(w) = &self.wal {
            w.lock().append(update, &[])?;
        }
        drop(guards);
        Ok(SafeOutcome::Applied(Applied {
            class: Class::Safe,
            version: self.current_version(),
            new_vertices: Vec::new(),
        }))
    }

    /// Classifies, applies and logs one update on the calling thread.
    /// Unsafe parts run the incremental engines; a version is recorded iff
    /// some value or parent changed.
    pub fn apply(&mut self, update: &Update) -> Result<Applied> {
        let class = self.classify(update)?;
        let mut changes = vec![ChangeSet::new(); self.engines.len()];
        let mut new_vertices = Vec::new();
        // classify validated every part, so no step below fails midway
        match update {
            Update::Txn(ops) => {
                for op in ops {
                    self.apply_one(op, &mut changes, &mut new_vertices)?;
                }
            }
            op => self.apply_one(op, &mut changes, &mut new_vertices)?,
        }
        let version = {
            let mut h = self.history.write();
            h.ensure_len(self.graph.vertex_capacity());
            h.record_version(&changes)
        };
        if let Some(w) = &self.wal {
            w.lock().append(update, &new_vertices)?;
        }
        Ok(Applied {
            class,
            version,
            new_vertices,
        })
    }

    fn apply_one(
        &mut self,
        op: &Update,
        changes: &mut [ChangeSet],
        new_vertices: &mut Vec<VertexId>,
    ) -> Result<()> {
        match *op {
            Update::InsEdge { src, dst, weight } => {
                self.graph.insert_edge(src, dst, weight)?;
                for (e, cs) in self.engines.iter_mut().zip(changes.iter_mut()) {
                    if e.insert_improves(src, dst, weight) {
                        cs.merge(e.apply_unsafe_insert(&self.graph, src, dst, weight));
                    }
                }
            }
            Update::DelEdge { src, dst, weight } => {
                if self.graph.delete_edge(src, dst, weight)? == DeleteOutcome::Removed {
                    for (e, cs) in self.engines.iter_mut().zip(changes.iter_mut()) {
                        if e.is_tree_edge(src, dst, weight) {
                            cs.merge(e.apply_unsafe_delete(&self.graph, src, dst, weight));
                        }
                    }
                }
            }
            Update::InsVertex => {
                let id = self.graph.add_vertex();
                for e in &mut self.engines {
                    e.ensure_vertex(id);
                }
                new_vertices.push(id);
            }
            Update::DelVertex(v) => self.graph.remove_vertex(v)?,
            Update::Txn(_) => return Err(Error::NestedTxn),
        }
        Ok(())
    }
}

fn edge_src(op: &Update) -> Option<VertexId> {
    match *op {
        Update::InsEdge { src, .. } | Update::DelEdge { src, .. } => Some(src),
        _ => None,
    }
}

/// Validates and classifies an update against the graph plus the effects of
/// the earlier parts of its own transaction.
struct Sim<'a> {
    sys: &'a System,
    base_count: &'a dyn Fn(VertexId, VertexId, Weight) -> u32,
    counts: FxHashMap<(VertexId, VertexId, Weight), u32>,
    degree_delta: FxHashMap<VertexId, i64>,
    created: FxHashSet<VertexId>,
    deleted: FxHashSet<VertexId>,
    /// Ids freed inside the transaction; reused first, newest first.
    freed: Vec<VertexId>,
    preview: Vec<VertexId>,
    next_preview: usize,
    safe: bool,
}

impl<'a> Sim<'a> {
    fn new(
        sys: &'a System,
        base_count: &'a dyn Fn(VertexId, VertexId, Weight) -> u32,
        update: &Update,
    ) -> Self {
        let inserts = match update {
            Update::Txn(ops) => ops
                .iter()
                .filter(|o| matches!(o, Update::InsVertex))
                .count(),
            Update::InsVertex => 1,
            _ => 0,
        };
        Sim {
            sys,
            base_count,
            counts: FxHashMap::default(),
            degree_delta: FxHashMap::default(),
            created: FxHashSet::default(),
            deleted: FxHashSet::default(),
            freed: Vec::new(),
            preview: if inserts > 0 {
                sys.graph.preview_new_ids(inserts)
            } else {
                Vec::new()
            },
            next_preview: 0,
            safe: true,
        }
    }

    fn class(&self) -> Class {
        if self.safe {
            Class::Safe
        } else {
            Class::Unsafe
        }
    }

    fn live(&self, v: VertexId) -> bool {
        self.created.contains(&v) || (self.sys.graph.is_live(v) && !self.deleted.contains(&v))
    }

    fn check_live(&self, v: VertexId) -> Result<()> {
        if self.live(v) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    fn count(&self, s: VertexId, d: VertexId, w: Weight) -> u32 {
        match self.counts.get(&(s, d, w)) {
            Some(&c) => c,
            None if self.sys.graph.is_live(s) && !self.created.contains(&s) => {
                (self.base_count)(s, d, w)
            }
            None => 0,
        }
    }

    fn bump_degree(&mut self, s: VertexId, d: VertexId, by: i64) {
        *self.degree_delta.entry(s).or_default() += by;
        *self.degree_delta.entry(d).or_default() += by;
    }

    fn run(&mut self, update: &Update) -> Result<()> {
        match update {
            Update::Txn(ops) => {
                for op in ops {
                    if matches!(op, Update::Txn(_)) {
                        return Err(Error::NestedTxn);
                    }
                    self.step(op)?;
                }
                Ok(())
            }
            op => self.step(op),
        }
    }

    fn step(&mut self, op: &Update) -> Result<()> {
        match *op {
            Update::InsEdge { src, dst, weight } => {
                self.check_live(src)?;
                self.check_live(dst)?;
                for e in &self.sys.engines {
                    e.algo().check_weight(weight)?;
                }
                let c = self.count(src, dst, weight);
                self.counts.insert((src, dst, weight), c + 1);
                if c == 0 {
                    self.bump_degree(src, dst, 1);
                }
                if self.safe
                    && self
                        .sys
                        .engines
                        .iter()
                        .any(|e| e.insert_improves(src, dst, weight))
                {
                    self.safe = false;
                }
            }
            Update::DelEdge { src, dst, weight } => {
                self.check_live(src)?;
                self.check_live(dst)?;
                let c = self.count(src, dst, weight);
                if c == 0 {
                    return Err(Error::EdgeNotFound { src, dst, weight });
                }
                self.counts.insert((src, dst, weight), c - 1);
                if c == 1 {
                    self.bump_degree(src, dst, -1);
                    if self.safe
                        && self
                            .sys
                            .engines
                            .iter()
                            .any(|e| e.is_tree_edge(src, dst, weight))
                    {
                        self.safe = false;
                    }
                }
            }
            Update::InsVertex => {
                let id = match self.freed.pop() {
                    Some(id) => id,
                    None => {
                        let id = self.preview[self.next_preview];
                        self.next_preview += 1;
                        id
                    }
                };
                self.deleted.remove(&id);
                self.created.insert(id);
            }
            Update::DelVertex(v) => {
                self.check_live(v)?;
                let base = if self.sys.graph.is_live(v) && !self.created.contains(&v) {
                    (self.sys.graph.out_degree(v) + self.sys.graph.in_degree(v)) as i64
                } else {
                    0
                };
                if base + self.degree_delta.get(&v).copied().unwrap_or(0) != 0 {
                    return Err(Error::NotIsolated(v));
                }
                self.created.remove(&v);
                self.deleted.insert(v);
                self.freed.push(v);
            }
            Update::Txn(_) => return Err(Error::NestedTxn),
        }
        Ok(())
    }
}
