use std::sync::atomic::{AtomicU64, Ordering};

use crate::algorithms::Value;
use crate::graph_store::VertexId;

/// Active vertices as per-worker lanes of `(vertex, candidate value)`.
///
/// Clearing walks only the stored entries, never the vertex range.
#[derive(Debug, Default, Clone)]
pub struct SparseActiveSet {
    lanes: Vec<Vec<(VertexId, Value)>>,
}

impl SparseActiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_lanes(lanes: Vec<Vec<(VertexId, Value)>>) -> Self {
        SparseActiveSet { lanes }
    }

    pub fn single(v: VertexId, value: Value) -> Self {
        SparseActiveSet {
            lanes: vec![vec![(v, value)]],
        }
    }

    pub fn push(&mut self, v: VertexId, value: Value) {
        if self.lanes.is_empty() {
            self.lanes.push(Vec::new());
        }
        self.lanes[0].push((v, value));
    }

    pub fn len(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.iter().all(Vec::is_empty)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(VertexId, Value)> + '_ {
        self.lanes.iter().flatten()
    }

    pub fn lanes(&self) -> &[Vec<(VertexId, Value)>] {
        &self.lanes
    }

    /// Flattens the lanes into one list.
    pub fn into_vec(self) -> Vec<(VertexId, Value)> {
        let mut lanes = self.lanes;
        if lanes.len() == 1 {
            return lanes.pop().unwrap_or_default();
        }
        let total = lanes.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(total);
        for lane in lanes {
            out.extend(lane);
        }
        out
    }

    pub fn clear(&mut self) {
        for lane in &mut self.lanes {
            lane.clear();
        }
    }
}

/// Vertex membership bitmap, used only while pulling during trims.
#[derive(Debug, Default)]
pub struct Bitmap {
    words: Vec<AtomicU64>,
}

impl Bitmap {
    pub fn with_len(n: usize) -> Self {
        let mut b = Bitmap::default();
        b.ensure_len(n);
        b
    }

    pub fn ensure_len(&mut self, n: usize) {
        let words = n.div_ceil(64);
        while self.words.len() < words {
            self.words.push(AtomicU64::new(0));
        }
    }

    /// Sets the bit; returns true if it was previously clear.
    #[inline]
    pub fn set(&self, v: VertexId) -> bool {
        let (w, bit) = (v as usize / 64, 1u64 << (v % 64));
        self.words[w].fetch_or(bit, Ordering::Relaxed) & bit == 0
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> bool {
        let (w, bit) = (v as usize / 64, 1u64 << (v % 64));
        self.words
            .get(w)
            .is_some_and(|x| x.load(Ordering::Relaxed) & bit != 0)
    }

    #[inline]
    pub fn unset(&self, v: VertexId) {
        let (w, bit) = (v as usize / 64, 1u64 << (v % 64));
        self.words[w].fetch_and(!bit, Ordering::Relaxed);
    }

    /// Marks every vertex of `members`. O(|members|).
    pub fn set_all<'a>(&self, members: impl IntoIterator<Item = &'a VertexId>) {
        for &v in members {
            self.set(v);
        }
    }

    /// Clears by re-walking the members that were set.
    pub fn clear_members<'a>(&self, members: impl IntoIterator<Item = &'a VertexId>) {
        for &v in members {
            self.unset(v);
        }
    }

    pub fn is_all_clear(&self) -> bool {
        self.words.iter().all(|w| w.load(Ordering::Relaxed) == 0)
    }
}

/// Converts an active set into bitmap membership.
pub fn to_bitmap(active: &SparseActiveSet, bitmap: &Bitmap) {
    for &(v, _) in active.iter() {
        bitmap.set(v);
    }
}
