//! Multi-version result store.
//!
//! Each modified vertex keeps a chain of `(version, value, parent)` entries,
//! oldest at the front. A vertex that was never modified has no chain and is
//! read from `heads`. Every version keeps the list of vertices its commit
//! changed. Versions below the reclamation bound are unreadable; chain tails
//! that only serve reclaimed versions are trimmed when the vertex is next
//! modified.

use std::collections::{BTreeMap, VecDeque};

use rustc_hash::FxHashMap;

use crate::algorithms::{AlgorithmDef, Value};
use crate::engine::{ChangeSet, DependencyState, Parent};
use crate::error::{Error, Result};
use crate::graph_store::VertexId;

pub type VersionId = u64;
pub type SessionId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    version: VersionId,
    value: Value,
    parent: Option<Parent>,
}

#[derive(Debug)]
pub struct History {
    algos: Vec<AlgorithmDef>,
    /// Committed value and parent per algorithm per vertex.
    heads: Vec<Vec<(Value, Option<Parent>)>>,
    chains: Vec<FxHashMap<VertexId, VecDeque<Entry>>>,
    /// Per version, the changed vertices of each algorithm.
    modified: BTreeMap<VersionId, Vec<Vec<VertexId>>>,
    current: VersionId,
    /// Versions strictly below this are reclaimed.
    reclaim_bound: VersionId,
    /// Per session, versions strictly below this are released.
    sessions: FxHashMap<SessionId, VersionId>,
    retain_warn: u64,
}

impl History {
    /// Starts at version 0 with the given per-algorithm states.
    pub fn new(algos: Vec<AlgorithmDef>, states: &[DependencyState]) -> Self {
        assert_eq!(algos.len(), states.len());
        let heads = states
            .iter()
            .map(|s| {
                s.values
                    .iter()
                    .copied()
                    .zip(s.parents.iter().copied())
                    .collect()
            })
            .collect();
        History {
            chains: vec![FxHashMap::default(); algos.len()],
            algos,
            heads,
            modified: BTreeMap::new(),
            current: 0,
            reclaim_bound: 0,
            sessions: FxHashMap::default(),
            retain_warn: 10_000,
        }
    }

    pub fn set_retain_warning(&mut self, versions: u64) {
        self.retain_warn = versions;
    }

    pub fn algos(&self) -> &[AlgorithmDef] {
        &self.algos
    }

    pub fn current(&self) -> VersionId {
        self.current
    }

    /// Highest reclaimed version, if any.
    pub fn frontier(&self) -> Option<VersionId> {
        self.reclaim_bound.checked_sub(1)
    }

    pub fn retained_versions(&self) -> u64 {
        self.current - self.reclaim_bound + 1
    }

    /// Grows the vertex range; new vertices hold their initial value.
    pub fn ensure_len(&mut self, n: usize) {
        for (a, heads) in self.heads.iter_mut().enumerate() {
            while heads.len() < n {
                let v = heads.len() as VertexId;
                heads.push((self.algos[a].init_val(v), None));
            }
        }
    }

    /// Commits one version. Returns the current version unchanged if every
    /// change set is empty.
    pub fn record_version(&mut self, changes: &[ChangeSet]) -> VersionId {
        assert_eq!(changes.len(), self.algos.len());
        if changes.iter().all(ChangeSet::is_empty) {
            return self.current;
        }
        let version = self.current + 1;
        let mut lists = Vec::with_capacity(changes.len());
        for (a, cs) in changes.iter().enumerate() {
            let max = cs.iter().map(|c| c.vertex as usize + 1).max().unwrap_or(0);
            if self.heads[a].len() < max {
                self.ensure_len(max);
            }
            let mut list = Vec::with_capacity(cs.len());
            for c in cs.iter() {
                let chain = self.chains[a].entry(c.vertex).or_insert_with(|| {
                    VecDeque::from([Entry {
                        version: 0,
                        value: c.old_value,
                        parent: c.old_parent,
                    }])
                });
                while chain.len() >= 2 && chain[1].version <= self.reclaim_bound {
                    chain.pop_front();
                }
                chain.push_back(Entry {
                    version,
                    value: c.new_value,
                    parent: c.new_parent,
                });
                self.heads[a][c.vertex as usize] = (c.new_value, c.new_parent);
                list.push(c.vertex);
            }
            lists.push(list);
        }
        self.modified.insert(version, lists);
        self.current = version;
        version
    }

    fn check_version(&self, version: VersionId) -> Result<()> {
        if version > self.current {
            return Err(Error::UnknownVersion(version));
        }
        if version < self.reclaim_bound {
            return Err(Error::VersionReclaimed(version));
        }
        Ok(())
    }

    fn check_algo(&self, algo: usize) -> Result<()> {
        if algo >= self.algos.len() {
            return Err(Error::UnknownAlgorithm(algo));
        }
        Ok(())
    }

    fn entry(
        &self,
        version: VersionId,
        algo: usize,
        vid: VertexId,
    ) -> Result<(Value, Option<Parent>)> {
        self.check_algo(algo)?;
        self.check_version(version)?;
        let head = *self.heads[algo]
            .get(vid as usize)
            .ok_or(Error::UnknownVertex(vid))?;
        let Some(chain) = self.chains[algo].get(&vid) else {
            return Ok(head);
        };
        // greatest entry with entry.version <= version
        let idx = chain.partition_point(|e| e.version <= version);
        if idx == 0 {
            return Err(Error::VersionReclaimed(version));
        }
        let e = chain[idx - 1];
        Ok((e.value, e.parent))
    }

    pub fn get_value(&self, version: VersionId, algo: usize, vid: VertexId) -> Result<Value> {
        self.entry(version, algo, vid).map(|e| e.0)
    }

    pub fn get_parent(
        &self,
        version: VersionId,
        algo: usize,
        vid: VertexId,
    ) -> Result<Option<Parent>> {
        self.entry(version, algo, vid).map(|e| e.1)
    }

    pub fn head(&self, algo: usize, vid: VertexId) -> Option<(Value, Option<Parent>)> {
        self.heads.get(algo)?.get(vid as usize).copied()
    }

    /// Values of every vertex at `version`.
    pub fn snapshot_values(&self, version: VersionId, algo: usize) -> Result<Vec<Value>> {
        let n = self
            .heads
            .get(algo)
            .ok_or(Error::UnknownAlgorithm(algo))?
            .len();
        (0..n as VertexId)
            .map(|v| self.get_value(version, algo, v))
            .collect()
    }

    pub fn get_modified_vertices(&self, version: VersionId, algo: usize) -> Result<Vec<VertexId>> {
        self.check_algo(algo)?;
        self.check_version(version)?;
        if version == 0 {
            return Ok(Vec::new());
        }
        Ok(self.modified[&version][algo].clone())
    }

    pub fn register_session(&mut self, session: SessionId) {
        self.sessions.entry(session).or_insert(self.reclaim_bound);
    }

    pub fn unregister_session(&mut self, session: SessionId) {
        self.sessions.remove(&session);
    }

    /// Marks every version up to and including `version` unused by `session`.
    pub fn release(&mut self, session: SessionId, version: VersionId) -> Result<()> {
        if version > self.current {
            return Err(Error::UnknownVersion(version));
        }
        let bound = self.sessions.entry(session).or_insert(self.reclaim_bound);
        *bound = (*bound).max(version + 1);
        Ok(())
    }

    /// Advances the reclamation bound to the minimum released version over
    /// all sessions. The current version is never reclaimed.
    pub fn reclaim_tick(&mut self) {
        let bound = self
            .sessions
            .values()
            .copied()
            .min()
            .unwrap_or(self.current)
            .min(self.current);
        if bound > self.reclaim_bound {
            self.reclaim_bound = bound;
            let keep = self.modified.split_off(&bound);
            self.modified = keep;
        }
        if self.retained_versions() > self.retain_warn {
            tracing::warn!(
                retained = self.retained_versions(),
                "history is pinned by sessions that never release versions"
            );
        }
    }

    /// Chain entries across all vertices, for tests and diagnostics.
    pub fn chain_len(&self, algo: usize, vid: VertexId) -> usize {
        self.chains[algo].get(&vid).map_or(1, VecDeque::len)
    }
}
