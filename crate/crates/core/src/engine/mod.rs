//! Incremental maintenance of values and the dependency tree.
//!
//! Each vertex holds a value and an optional parent link `(src, weight)`
//! naming the in-edge that justifies the value. An improving insertion is
//! pushed from its destination until no activation remains. A deletion of a
//! tree edge runs three phases: collect the invalidated subtree, trim each
//! member to the best value offered by in-neighbours outside the subtree,
//! then push from the whole subtree.
//!
//! Push rounds run on a fixed rayon pool. Each round picks vertex-parallel or
//! edge-parallel execution from the active vertex count and their total
//! out-degree. Destination updates are compare-and-improve under a per-vertex
//! lock, so value and parent always change together.

pub mod active;
pub mod mode;
pub mod recompute;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use rayon::prelude::*;
use rayon::ThreadPool;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmDef, Value};
use crate::error::Result;
use crate::graph_store::{EdgeRecord, GraphStore, VertexId, Weight};

pub use active::{to_bitmap, Bitmap, SparseActiveSet};
pub use mode::{choose_parallel_mode, ModePolicy, ParallelMode, ParallelModeModel};
pub use recompute::{check_state, full_recompute, validate_state, Violation};

/// The in-edge `(src → v, weight)` that justifies a vertex's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Parent {
    pub src: VertexId,
    pub weight: Weight,
}

/// Values and parent links indexed by vertex id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyState {
    pub values: Vec<Value>,
    pub parents: Vec<Option<Parent>>,
}

impl DependencyState {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Change {
    pub vertex: VertexId,
    pub old_value: Value,
    pub old_parent: Option<Parent>,
    pub new_value: Value,
    pub new_parent: Option<Parent>,
}

impl Change {
    fn is_noop(&self) -> bool {
        self.old_value == self.new_value && self.old_parent == self.new_parent
    }
}

/// Per-vertex deltas of one update. A vertex appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    changes: Vec<Change>,
}

impl ChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_changes(changes: Vec<Change>) -> Self {
        ChangeSet { changes }
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Change> + '_ {
        self.changes.iter()
    }

    pub fn vertices(&self) -> Vec<VertexId> {
        self.changes.iter().map(|c| c.vertex).collect()
    }

    /// Folds a later change set into this one: old values are kept from
    /// `self`, new values taken from `later`, and no-op entries dropped.
    pub fn merge(&mut self, later: ChangeSet) {
        if later.is_empty() {
            return;
        }
        if self.is_empty() {
            *self = later;
            return;
        }
        let mut pos: FxHashMap<VertexId, usize> = self
            .changes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.vertex, i))
            .collect();
        for c in later.changes {
            match pos.get(&c.vertex) {
                Some(&i) => {
                    self.changes[i].new_value = c.new_value;
                    self.changes[i].new_parent = c.new_parent;
                }
                None => {
                    pos.insert(c.vertex, self.changes.len());
                    self.changes.push(c);
                }
            }
        }
        self.changes.retain(|c| !c.is_noop());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    pub mode: ModePolicy,
    /// Rounds touching fewer edge slots than this run inline.
    pub sequential_cutoff: usize,
    /// Disabling trims re-seeds invalidated vertices with `init_val` only.
    /// Only useful to demonstrate that the oracle harness catches it.
    pub trim: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            mode: ModePolicy::Hybrid(ParallelModeModel::default()),
            sequential_cutoff: 1024,
            trim: true,
        }
    }
}

#[derive(Debug, Default)]
pub struct EngineStats {
    pub sequential_rounds: AtomicU64,
    pub vertex_rounds: AtomicU64,
    pub edge_rounds: AtomicU64,
}

impl EngineStats {
    pub fn snapshot(&self) -> (u64, u64, u64) {
        (
            self.sequential_rounds.load(Ordering::Relaxed),
            self.vertex_rounds.load(Ordering::Relaxed),
            self.edge_rounds.load(Ordering::Relaxed),
        )
    }
}

#[derive(Debug)]
struct Slot {
    value: Value,
    parent: Option<Parent>,
    /// Id of the last update that recorded this vertex's old state.
    stamp: u64,
}

type Touched = (VertexId, Value, Option<Parent>);
type Activation = (VertexId, Value);

#[derive(Default)]
struct Lane {
    next: Vec<Activation>,
    touched: Vec<Touched>,
}

pub struct Engine {
    algo: AlgorithmDef,
    slots: Vec<Mutex<Slot>>,
    marks: Bitmap,
    stamp: u64,
    pool: Arc<ThreadPool>,
    options: EngineOptions,
    stats: EngineStats,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("algo", &self.algo)
            .field("vertices", &self.slots.len())
            .field("options", &self.options)
            .finish()
    }
}

pub fn build_pool(threads: usize) -> Arc<ThreadPool> {
    Arc::new(
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .thread_name(|i| format!("incgraph-worker-{i}"))
            .build()
            .expect("failed to build worker pool"),
    )
}

impl Engine {
    /// Computes the initial state from scratch.
    pub fn new(
        graph: &GraphStore,
        algo: AlgorithmDef,
        pool: Arc<ThreadPool>,
        options: EngineOptions,
    ) -> Result<Self> {
        let state = full_recompute(graph, &algo)?;
        Ok(Self::from_state(algo, state, pool, options))
    }

    pub fn from_state(
        algo: AlgorithmDef,
        state: DependencyState,
        pool: Arc<ThreadPool>,
        options: EngineOptions,
    ) -> Self {
        let slots: Vec<_> = state
            .values
            .into_iter()
            .zip(state.parents)
            .map(|(value, parent)| {
                Mutex::new(Slot {
                    value,
                    parent,
                    stamp: 0,
                })
            })
            .collect();
        let marks = Bitmap::with_len(slots.len());
        Engine {
            algo,
            slots,
            marks,
            stamp: 0,
            pool,
            options,
            stats: EngineStats::default(),
        }
    }

    pub fn algo(&self) -> &AlgorithmDef {
        &self.algo
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn set_mode(&mut self, mode: ModePolicy) {
        self.options.mode = mode;
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn value(&self, v: VertexId) -> Value {
        self.slots
            .get(v as usize)
            .map_or_else(|| self.algo.init_val(v), |s| s.lock().value)
    }

    pub fn parent(&self, v: VertexId) -> Option<Parent> {
        self.slots.get(v as usize).and_then(|s| s.lock().parent)
    }

    pub fn snapshot(&self) -> DependencyState {
        let mut values = Vec::with_capacity(self.slots.len());
        let mut parents = Vec::with_capacity(self.slots.len());
        for s in &self.slots {
            let s = s.lock();
            values.push(s.value);
            parents.push(s.parent);
        }
        DependencyState { values, parents }
    }

    /// Extends the state so `v` has a slot holding its initial value.
    pub fn ensure_vertex(&mut self, v: VertexId) {
        while self.slots.len() <= v as usize {
            let id = self.slots.len() as VertexId;
            self.slots.push(Mutex::new(Slot {
                value: self.algo.init_val(id),
                parent: None,
                stamp: 0,
            }));
        }
        self.marks.ensure_len(self.slots.len());
    }

    /// Whether inserting `src → dst` would improve `dst`.
    pub fn insert_improves(&self, src: VertexId, dst: VertexId, weight: Weight) -> bool {
        let next = self.algo.gen_next(weight, self.value(src));
        self.algo.need_upd(dst, self.value(dst), next)
    }

    /// Whether `src → dst` is the tree edge of `dst`.
    pub fn is_tree_edge(&self, src: VertexId, dst: VertexId, weight: Weight) -> bool {
        self.parent(dst) == Some(Parent { src, weight })
    }

    /// Propagates an inserted edge that improves its destination. The edge
    /// must already be in `graph`.
    pub fn apply_unsafe_insert(
        &mut self,
        graph: &GraphStore,
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    ) -> ChangeSet {
        self.stamp += 1;
        let stamp = self.stamp;
        let next = self.algo.gen_next(weight, self.value(src));
        let mut touched = Vec::new();
        {
            let mut s = self.slots[dst as usize].lock();
            if !self.algo.need_upd(dst, s.value, next) {
                return ChangeSet::new();
            }
            touched.push((dst, s.value, s.parent));
            s.stamp = stamp;
            s.value = next;
            s.parent = Some(Parent { src, weight });
        }
        touched.extend(self.push_rounds(graph, SparseActiveSet::single(dst, next), stamp));
        self.finish(touched)
    }

    /// Repairs the state after the tree edge `src → dst` lost its last copy.
    /// The edge must already be gone from `graph`.
    pub fn apply_unsafe_delete(
        &mut self,
        graph: &GraphStore,
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    ) -> ChangeSet {
        if !self.is_tree_edge(src, dst, weight)
            || graph.lookup_count(src, dst, weight).unwrap_or(0) > 0
        {
            return ChangeSet::new();
        }
        self.stamp += 1;
        let stamp = self.stamp;

        let members = self.invalidation_closure(graph, dst);
        let (seeds, mut touched) = if self.options.trim {
            self.trim(graph, &members, stamp)
        } else {
            self.reset_members(&members, stamp)
        };
        self.marks.clear_members(&members);

        touched.extend(self.push_rounds(graph, seeds, stamp));
        self.finish(touched)
    }

    /// The subtree hanging below `root` through parent links.
    fn invalidation_closure(&self, graph: &GraphStore, root: VertexId) -> Vec<VertexId> {
        self.marks.set(root);
        let mut members = vec![root];
        let mut frontier = vec![root];
        while !frontier.is_empty() {
            let work: usize = frontier.iter().map(|&x| graph.out_degree(x)).sum();
            let next: Vec<VertexId> = if work < self.options.sequential_cutoff {
                let mut next = Vec::new();
                for &x in &frontier {
                    self.collect_children(graph, x, &mut next);
                }
                next
            } else {
                self.pool.install(|| {
                    frontier
                        .par_iter()
                        .fold(Vec::new, |mut acc, &x| {
                            self.collect_children(graph, x, &mut acc);
                            acc
                        })
                        .reduce(Vec::new, |mut a, mut b| {
                            a.append(&mut b);
                            a
                        })
                })
            };
            members.extend_from_slice(&next);
            frontier = next;
        }
        members
    }

    fn collect_children(&self, graph: &GraphStore, x: VertexId, out: &mut Vec<VertexId>) {
        let list = graph.out_list(x);
        for rec in list.iter() {
            let link = Some(Parent {
                src: x,
                weight: rec.weight,
            });
            if self.slots[rec.dst as usize].lock().parent == link && self.marks.set(rec.dst) {
                out.push(rec.dst);
            }
        }
    }

    /// Pulls the best candidate for each member from in-neighbours outside
    /// the member set.
    fn trim(
        &self,
        graph: &GraphStore,
        members: &[VertexId],
        stamp: u64,
    ) -> (SparseActiveSet, Vec<Touched>) {
        let pull = |lane: &mut Lane, x: VertexId| {
            let mut best = self.algo.init_val(x);
            let mut parent = None;
            {
                let list = graph.in_list(x);
                for rec in list.iter() {
                    let y = rec.dst;
                    if self.marks.get(y) {
                        continue;
                    }
                    let cand = self
                        .algo
                        .gen_next(rec.weight, self.slots[y as usize].lock().value);
                    if self.algo.need_upd(x, best, cand) {
                        best = cand;
                        parent = Some(Parent {
                            src: y,
                            weight: rec.weight,
                        });
                    }
                }
            }
            let mut s = self.slots[x as usize].lock();
            if s.stamp != stamp {
                lane.touched.push((x, s.value, s.parent));
                s.stamp = stamp;
            }
            s.value = best;
            s.parent = parent;
            if !self.algo.is_unreached(best) {
                lane.next.push((x, best));
            }
        };
        let work: usize = members.iter().map(|&x| graph.in_degree(x)).sum();
        let lanes = if work < self.options.sequential_cutoff {
            let mut lane = Lane::default();
            for &x in members {
                pull(&mut lane, x);
            }
            vec![lane]
        } else {
            self.pool.install(|| {
                members
                    .par_iter()
                    .fold(Lane::default, |mut lane, &x| {
                        pull(&mut lane, x);
                        lane
                    })
                    .collect::<Vec<_>>()
            })
        };
        split_lanes(lanes)
    }

    fn reset_members(&self, members: &[VertexId], stamp: u64) -> (SparseActiveSet, Vec<Touched>) {
        let mut lane = Lane::default();
        for &x in members {
            let mut s = self.slots[x as usize].lock();
            if s.stamp != stamp {
                lane.touched.push((x, s.value, s.parent));
                s.stamp = stamp;
            }
            s.value = self.algo.init_val(x);
            s.parent = None;
            if !self.algo.is_unreached(s.value) {
                lane.next.push((x, s.value));
            }
        }
        split_lanes(vec![lane])
    }

    /// Runs push rounds until no activation remains. Returns the old state of
    /// every vertex first modified under `stamp`.
    pub fn push_rounds(
        &self,
        graph: &GraphStore,
        active: SparseActiveSet,
        stamp: u64,
    ) -> Vec<(VertexId, Value, Option<Parent>)> {
        let mut touched = Vec::new();
        let mut frontier = active.into_vec();
        while !frontier.is_empty() {
            // drop activations superseded by a later improvement
            frontier.retain(|&(v, val)| self.slots[v as usize].lock().value == val);
            let degrees: Vec<usize> = frontier
                .iter()
                .map(|&(v, _)| graph.out_list(v).records().len())
                .collect();
            let total: usize = degrees.iter().sum();
            let lanes = if total < self.options.sequential_cutoff {
                self.stats.sequential_rounds.fetch_add(1, Ordering::Relaxed);
                let mut lane = Lane::default();
                for &(v, val) in &frontier {
                    let list = graph.out_list(v);
                    for rec in list.iter() {
                        self.relax(v, val, rec, stamp, &mut lane);
                    }
                }
                vec![lane]
            } else {
                match self
                    .options
                    .mode
                    .choose(frontier.len() as u64, total as u64)
                {
                    ParallelMode::VertexParallel => {
                        self.stats.vertex_rounds.fetch_add(1, Ordering::Relaxed);
                        self.vertex_parallel(graph, &frontier, stamp)
                    }
                    ParallelMode::EdgeParallel => {
                        self.stats.edge_rounds.fetch_add(1, Ordering::Relaxed);
                        self.edge_parallel(graph, &frontier, &degrees, stamp)
                    }
                }
            };
            let (next, t) = split_lanes(lanes);
            touched.extend(t);
            frontier = next.into_vec();
        }
        touched
    }

    #[inline]
    fn relax(&self, src: VertexId, src_val: Value, rec: &EdgeRecord, stamp: u64, lane: &mut Lane) {
        let next = self.algo.gen_next(rec.weight, src_val);
        if self.algo.is_unreached(next) {
            return;
        }
        let mut s = self.slots[rec.dst as usize].lock();
        if self.algo.need_upd(rec.dst, s.value, next) {
            if s.stamp != stamp {
                lane.touched.push((rec.dst, s.value, s.parent));
                s.stamp = stamp;
            }
            s.value = next;
            s.parent = Some(Parent {
                src,
                weight: rec.weight,
            });
            drop(s);
            lane.next.push((rec.dst, next));
        }
    }

    fn vertex_parallel(
        &self,
        graph: &GraphStore,
        frontier: &[Activation],
        stamp: u64,
    ) -> Vec<Lane> {
        self.pool.install(|| {
            frontier
                .par_iter()
                .fold(Lane::default, |mut lane, &(v, val)| {
                    let list = graph.out_list(v);
                    for rec in list.iter() {
                        self.relax(v, val, rec, stamp, &mut lane);
                    }
                    lane
                })
                .collect()
        })
    }

    fn edge_parallel(
        &self,
        graph: &GraphStore,
        frontier: &[Activation],
        degrees: &[usize],
        stamp: u64,
    ) -> Vec<Lane> {
        let mut prefix = Vec::with_capacity(degrees.len() + 1);
        prefix.push(0usize);
        for d in degrees {
            prefix.push(prefix.last().unwrap() + d);
        }
        let total = *prefix.last().unwrap();
        let chunk = (total / (self.pool.current_num_threads() * 4)).max(256);
        let chunks = total.div_ceil(chunk);
        self.pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .fold(Lane::default, |mut lane, c| {
                    let start = c * chunk;
                    let end = (start + chunk).min(total);
                    let mut i = prefix.partition_point(|&p| p <= start) - 1;
                    while i < frontier.len() && prefix[i] < end {
                        let (v, val) = frontier[i];
                        let list = graph.out_list(v);
                        let recs = list.records();
                        let lo = start.max(prefix[i]) - prefix[i];
                        let hi = (end.min(prefix[i + 1]) - prefix[i]).min(recs.len());
                        for rec in recs.get(lo..hi).unwrap_or(&[]) {
                            if rec.count > 0 {
                                self.relax(v, val, rec, stamp, &mut lane);
                            }
                        }
                        i += 1;
                    }
                    lane
                })
                .collect()
        })
    }

    fn finish(&self, touched: Vec<Touched>) -> ChangeSet {
        let changes = touched
            .into_iter()
            .filter_map(|(vertex, old_value, old_parent)| {
                let s = self.slots[vertex as usize].lock();
                let c = Change {
                    vertex,
                    old_value,
                    old_parent,
                    new_value: s.value,
                    new_parent: s.parent,
                };
                (!c.is_noop()).then_some(c)
            })
            .collect();
        ChangeSet { changes }
    }

    /// Times one push round from `active` in `mode` without writing any
    /// state: candidates are compared under the destination lock only.
    pub fn time_dry_round(
        &self,
        graph: &GraphStore,
        active: &[Activation],
        mode: ParallelMode,
    ) -> Duration {
        let probe = |v: VertexId, val: Value, rec: &EdgeRecord, hits: &mut usize| {
            let next = self.algo.gen_next(rec.weight, val);
            let s = self.slots[rec.dst as usize].lock();
            if self.algo.need_upd(rec.dst, s.value, next) && v != rec.dst {
                *hits += 1;
            }
        };
        let t0 = Instant::now();
        let hits: usize = match mode {
            ParallelMode::VertexParallel => self.pool.install(|| {
                active
                    .par_iter()
                    .map(|&(v, val)| {
                        let mut hits = 0;
                        for rec in graph.out_list(v).iter() {
                            probe(v, val, rec, &mut hits);
                        }
                        hits
                    })
                    .sum()
            }),
            ParallelMode::EdgeParallel => {
                let lists: Vec<_> = active.iter().map(|&(v, _)| graph.out_list(v)).collect();
                let flat: Vec<(usize, usize)> = lists
                    .iter()
                    .enumerate()
                    .flat_map(|(i, l)| (0..l.records().len()).map(move |j| (i, j)))
                    .collect();
                self.pool.install(|| {
                    flat.par_iter()
                        .with_min_len(256)
                        .map(|&(i, j)| {
                            let rec = &lists[i].records()[j];
                            let mut hits = 0;
                            if rec.count > 0 {
                                probe(active[i].0, active[i].1, rec, &mut hits);
                            }
                            hits
                        })
                        .sum()
                })
            }
        };
        std::hint::black_box(hits);
        t0.elapsed()
    }
}

fn split_lanes(lanes: Vec<Lane>) -> (SparseActiveSet, Vec<Touched>) {
    let mut next = Vec::with_capacity(lanes.len());
    let mut touched = Vec::new();
    for lane in lanes {
        next.push(lane.next);
        touched.extend(lane.touched);
    }
    (SparseActiveSet::from_lanes(next), touched)
}
