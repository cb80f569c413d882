//! Indexed adjacency lists.
//!
//! Every vertex owns a contiguous array of [`EdgeRecord`]s for its outgoing
//! edges and a second one for its incoming edges (the transpose). A record
//! carries a duplicate count, so inserting an existing `(dst, weight)` pair
//! only bumps the count. Deleting the last copy leaves a tomb in place; tombs
//! are reclaimed when the array fills up. Vertices whose live degree ever
//! exceeds the index threshold get a hash index from `(dst, weight)` to the
//! record offset; scans never consult the index.
//!
//! Locking: each adjacency list sits behind its own `RwLock`. Edge mutations
//! take `&self` and lock the source's out-list, then the destination's
//! in-list, so mutations on distinct sources proceed in parallel. Adding or
//! removing vertices needs `&mut self`.

use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

pub type VertexId = u64;
pub type Weight = i64;

pub const DEFAULT_INDEX_THRESHOLD: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeRecord {
    /// Destination for out-lists, source for in-lists.
    pub dst: VertexId,
    pub weight: Weight,
    /// Duplicate multiplicity; zero marks a tomb.
    pub count: u32,
}

impl EdgeRecord {
    pub fn is_tomb(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    NewEdge,
    DuplicateIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteOutcome {
    Removed,
    DuplicateDecrement,
}

#[derive(Debug, Default)]
pub struct AdjacencyList {
    records: Vec<EdgeRecord>,
    capacity: usize,
    index: Option<FxHashMap<(VertexId, Weight), usize>>,
    live_degree: usize,
    tombs: usize,
    growths: u64,
}

impl AdjacencyList {
    fn find(&self, dst: VertexId, weight: Weight) -> Option<usize> {
        match &self.index {
            Some(index) => index.get(&(dst, weight)).copied(),
            None => self
                .records
                .iter()
                .position(|r| r.dst == dst && r.weight == weight),
        }
    }

    /// Live multiplicity of `(dst, weight)`.
    pub fn count(&self, dst: VertexId, weight: Weight) -> u32 {
        self.find(dst, weight).map_or(0, |i| self.records[i].count)
    }

    fn insert(&mut self, dst: VertexId, weight: Weight, threshold: usize) -> InsertOutcome {
        if let Some(i) = self.find(dst, weight) {
            let rec = &mut self.records[i];
            if rec.count > 0 {
                rec.count += 1;
                return InsertOutcome::DuplicateIncrement;
            }
            rec.count = 1;
            self.tombs -= 1;
            self.live_degree += 1;
            self.maybe_build_index(threshold);
            return InsertOutcome::NewEdge;
        }
        if self.records.len() == self.capacity {
            self.grow();
        }
        let offset = self.records.len();
        self.records.push(EdgeRecord {
            dst,
            weight,
            count: 1,
        });
        if let Some(index) = &mut self.index {
            index.insert((dst, weight), offset);
        }
        self.live_degree += 1;
        self.maybe_build_index(threshold);
        InsertOutcome::NewEdge
    }

    fn delete(&mut self, dst: VertexId, weight: Weight) -> Option<DeleteOutcome> {
        let i = self.find(dst, weight)?;
        let rec = &mut self.records[i];
        match rec.count {
            0 => None,
            1 => {
                rec.count = 0;
                self.tombs += 1;
                self.live_degree -= 1;
                Some(DeleteOutcome::Removed)
            }
            _ => {
                rec.count -= 1;
                Some(DeleteOutcome::DuplicateDecrement)
            }
        }
    }

    fn maybe_build_index(&mut self, threshold: usize) {
        if self.index.is_none() && self.live_degree > threshold {
            self.rebuild_index(true);
        }
    }

    fn rebuild_index(&mut self, force: bool) {
        if self.index.is_none() && !force {
            return;
        }
        let mut index = FxHashMap::default();
        index.reserve(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            index.insert((r.dst, r.weight), i);
        }
        self.index = Some(index);
    }

    /// Called when the array is full: reclaim tombs, then double unless the
    /// reclaimed space already leaves at least half the array free.
    fn grow(&mut self) {
        let reclaimed = self.tombs;
        self.compact();
        if self.capacity == 0 || reclaimed * 2 < self.capacity {
            self.capacity = (self.capacity * 2).max(4);
        }
        self.records
            .reserve_exact(self.capacity.saturating_sub(self.records.len()));
        self.growths += 1;
    }

    /// Drops every tomb and rebuilds the index offsets.
    pub fn compact(&mut self) {
        if self.tombs == 0 {
            return;
        }
        self.records.retain(|r| r.count > 0);
        self.tombs = 0;
        self.rebuild_index(false);
    }

    /// Live records in array order.
    pub fn iter(&self) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.records.iter().filter(|r| r.count > 0)
    }

    /// Raw slots, tombs included.
    pub fn records(&self) -> &[EdgeRecord] {
        &self.records
    }

    pub fn live_degree(&self) -> usize {
        self.live_degree
    }

    pub fn has_index(&self) -> bool {
        self.index.is_some()
    }

    pub fn tomb_count(&self) -> usize {
        self.tombs
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of full-array growth events so far.
    pub fn growths(&self) -> u64 {
        self.growths
    }

    /// Checks the index against a linear scan. Test support.
    pub fn index_consistent(&self) -> bool {
        let Some(index) = &self.index else {
            return true;
        };
        if index.len() != self.records.len() {
            return false;
        }
        self.records
            .iter()
            .enumerate()
            .all(|(i, r)| index.get(&(r.dst, r.weight)) == Some(&i))
    }

    fn clear(&mut self) {
        *self = AdjacencyList::default();
    }
}

/// A locked view of one adjacency list.
pub struct EdgeView<'a> {
    guard: RwLockReadGuard<'a, AdjacencyList>,
}

impl EdgeView<'_> {
    pub fn iter(&self) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.guard.iter()
    }

    pub fn records(&self) -> &[EdgeRecord] {
        self.guard.records()
    }

    pub fn list(&self) -> &AdjacencyList {
        &self.guard
    }
}

/// Write access to one vertex's out-list. Mutations through the guard are
/// mirrored into the destination's in-list.
pub struct SourceGuard<'a> {
    store: &'a GraphStore,
    src: VertexId,
    list: RwLockWriteGuard<'a, AdjacencyList>,
}

impl SourceGuard<'_> {
    pub fn src(&self) -> VertexId {
        self.src
    }

    pub fn count(&self, dst: VertexId, weight: Weight) -> u32 {
        self.list.count(dst, weight)
    }

    pub fn live_degree(&self) -> usize {
        self.list.live_degree()
    }

    pub fn insert(&mut self, dst: VertexId, weight: Weight) -> Result<InsertOutcome> {
        self.store.check_live(dst)?;
        let threshold = self.store.index_threshold;
        let outcome = self.list.insert(dst, weight, threshold);
        let mirrored = self.store.inc[dst as usize]
            .write()
            .insert(self.src, weight, threshold);
        debug_assert_eq!(outcome, mirrored);
        self.store.num_edges.fetch_add(1, Ordering::Relaxed);
        Ok(outcome)
    }

    pub fn delete(&mut self, dst: VertexId, weight: Weight) -> Result<DeleteOutcome> {
        let src = self.src;
        let outcome =
            self.list
                .delete(dst, weight)
                .ok_or(Error::EdgeNotFound { src, dst, weight })?;
        let mirrored = self.store.inc[dst as usize].write().delete(src, weight);
        debug_assert_eq!(Some(outcome), mirrored);
        self.store.num_edges.fetch_sub(1, Ordering::Relaxed);
        Ok(outcome)
    }
}

#[derive(Debug)]
pub struct GraphStore {
    out: Vec<RwLock<AdjacencyList>>,
    inc: Vec<RwLock<AdjacencyList>>,
    alive: Vec<bool>,
    pool: Vec<VertexId>,
    live_vertices: usize,
    num_edges: AtomicU64,
    index_threshold: usize,
}

impl Default for GraphStore {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphStore {
    pub fn new() -> Self {
        Self::with_index_threshold(DEFAULT_INDEX_THRESHOLD)
    }

    /// `threshold` must be a power of two.
    pub fn with_index_threshold(threshold: usize) -> Self {
        assert!(
            threshold.is_power_of_two(),
            "index threshold must be a power of two, got {threshold}"
        );
        GraphStore {
            out: Vec::new(),
            inc: Vec::new(),
            alive: Vec::new(),
            pool: Vec::new(),
            live_vertices: 0,
            num_edges: AtomicU64::new(0),
            index_threshold: threshold,
        }
    }

    /// A store with vertices `0..n` already live.
    pub fn with_vertices(n: usize) -> Self {
        let mut g = Self::new();
        g.reserve_vertices(n);
        g
    }

    /// Makes ids `0..n` live, without touching the recycling pool.
    pub fn reserve_vertices(&mut self, n: usize) {
        while self.out.len() < n {
            self.out.push(RwLock::default());
            self.inc.push(RwLock::default());
            self.alive.push(true);
            self.live_vertices += 1;
        }
    }

    pub fn index_threshold(&self) -> usize {
        self.index_threshold
    }

    pub fn add_vertex(&mut self) -> VertexId {
        if let Some(v) = self.pool.pop() {
            self.alive[v as usize] = true;
            self.live_vertices += 1;
            return v;
        }
        let v = self.out.len() as VertexId;
        self.reserve_vertices(self.out.len() + 1);
        v
    }

    /// The ids that `n` successive `add_vertex` calls would return.
    pub fn preview_new_ids(&self, n: usize) -> Vec<VertexId> {
        let mut ids: Vec<VertexId> = self.pool.iter().rev().take(n).copied().collect();
        let mut next = self.out.len() as VertexId;
        while ids.len() < n {
            ids.push(next);
            next += 1;
        }
        ids
    }

    pub fn remove_vertex(&mut self, v: VertexId) -> Result<()> {
        self.check_live(v)?;
        let i = v as usize;
        if self.out[i].get_mut().live_degree() > 0 || self.inc[i].get_mut().live_degree() > 0 {
            return Err(Error::NotIsolated(v));
        }
        self.out[i].get_mut().clear();
        self.inc[i].get_mut().clear();
        self.alive[i] = false;
        self.live_vertices -= 1;
        self.pool.push(v);
        Ok(())
    }

    pub fn is_live(&self, v: VertexId) -> bool {
        self.alive.get(v as usize).copied().unwrap_or(false)
    }

    pub fn check_live(&self, v: VertexId) -> Result<()> {
        if self.is_live(v) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// Upper bound (exclusive) of ids ever handed out.
    pub fn vertex_capacity(&self) -> usize {
        self.out.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.live_vertices
    }

    /// Live edges counting multiplicity.
    pub fn num_edges(&self) -> u64 {
        self.num_edges.load(Ordering::Relaxed)
    }

    pub fn live_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(i, _)| i as VertexId)
    }

    pub fn recycled_ids(&self) -> &[VertexId] {
        &self.pool
    }

    pub fn lock_source(&self, src: VertexId) -> Result<SourceGuard<'_>> {
        self.check_live(src)?;
        Ok(SourceGuard {
            store: self,
            src,
            list: self.out[src as usize].write(),
        })
    }

    pub fn insert_edge(
        &self,
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    ) -> Result<InsertOutcome> {
        self.lock_source(src)?.insert(dst, weight)
    }

    pub fn delete_edge(
        &self,
        src: VertexId,
        dst: VertexId,
        weight: Weight,
    ) -> Result<DeleteOutcome> {
        self.lock_source(src)?.delete(dst, weight)
    }

    pub fn lookup_count(&self, src: VertexId, dst: VertexId, weight: Weight) -> Result<u32> {
        self.check_live(src)?;
        Ok(self.out[src as usize].read().count(dst, weight))
    }

    pub fn out_edges(&self, v: VertexId) -> Result<EdgeView<'_>> {
        self.check_live(v)?;
        Ok(EdgeView {
            guard: self.out[v as usize].read(),
        })
    }

    pub fn in_edges(&self, v: VertexId) -> Result<EdgeView<'_>> {
        self.check_live(v)?;
        Ok(EdgeView {
            guard: self.inc[v as usize].read(),
        })
    }

    /// Out-list without the liveness check; dead vertices have empty lists.
    pub(crate) fn out_list(&self, v: VertexId) -> RwLockReadGuard<'_, AdjacencyList> {
        self.out[v as usize].read()
    }

    pub(crate) fn in_list(&self, v: VertexId) -> RwLockReadGuard<'_, AdjacencyList> {
        self.inc[v as usize].read()
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.out
            .get(v as usize)
            .map_or(0, |l| l.read().live_degree())
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.inc
            .get(v as usize)
            .map_or(0, |l| l.read().live_degree())
    }

    /// Reclaims tombs in every list.
    pub fn compact(&mut self) {
        for l in self.out.iter_mut().chain(self.inc.iter_mut()) {
            l.get_mut().compact();
        }
    }

    /// Every live edge as `(src, dst, weight, count)`, sorted.
    pub fn edge_multiset(&self) -> Vec<(VertexId, VertexId, Weight, u32)> {
        let mut out = Vec::new();
        for v in self.live_vertices() {
            for r in self.out_list(v).iter() {
                out.push((v, r.dst, r.weight, r.count));
            }
        }
        out.sort_unstable();
        out
    }

    /// Transposed multiset read from the in-lists, in the same shape as
    /// [`GraphStore::edge_multiset`].
    pub fn transpose_multiset(&self) -> Vec<(VertexId, VertexId, Weight, u32)> {
        let mut out = Vec::new();
        for v in self.live_vertices() {
            for r in self.in_list(v).iter() {
                out.push((r.dst, v, r.weight, r.count));
            }
        }
        out.sort_unstable();
        out
    }

    /// Builds a store from an edge list; vertices are `0..=max id`.
    pub fn from_edges(num_vertices: usize, edges: &[(VertexId, VertexId, Weight)]) -> Result<Self> {
        let mut g = GraphStore::new();
        let n = edges
            .iter()
            .map(|&(s, d, _)| s.max(d) as usize + 1)
            .max()
            .unwrap_or(0)
            .max(num_vertices);
        g.reserve_vertices(n);
        for &(s, d, w) in edges {
            g.insert_edge(s, d, w)?;
        }
        Ok(g)
    }
}
