//! Monotonic algorithm definitions.
//!
//! An algorithm is three pure functions: `init_val` gives the starting value
//! of a vertex, `gen_next` derives a candidate for an edge's destination from
//! its source value, and `need_upd` says whether a candidate improves on the
//! current value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::{VertexId, Weight};

pub type Value = u64;

/// "Infinity": unreached for BFS/SSSP, the root's width for SSWP.
pub const UNREACHED: Value = u64::MAX;

/// The unreached value for SSWP.
pub const SSWP_UNREACHED: Value = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Bfs,
    Sssp,
    Sswp,
    Wcc,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [
        AlgorithmKind::Bfs,
        AlgorithmKind::Sssp,
        AlgorithmKind::Sswp,
        AlgorithmKind::Wcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Bfs => "bfs",
            AlgorithmKind::Sssp => "sssp",
            AlgorithmKind::Sswp => "sswp",
            AlgorithmKind::Wcc => "wcc",
        }
    }

    /// WCC runs on an undirected view; workloads insert both directions.
    pub fn is_undirected(self) -> bool {
        self == AlgorithmKind::Wcc
    }

    pub fn uses_weights(self) -> bool {
        matches!(self, AlgorithmKind::Sssp | AlgorithmKind::Sswp)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bfs" => Ok(AlgorithmKind::Bfs),
            "sssp" => Ok(AlgorithmKind::Sssp),
            "sswp" => Ok(AlgorithmKind::Sswp),
            "wcc" => Ok(AlgorithmKind::Wcc),
            other => Err(format!(
                "unknown algorithm '{other}' (expected bfs|sssp|sswp|wcc)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmDef {
    pub kind: AlgorithmKind,
    /// Ignored by WCC.
    pub root: VertexId,
}

impl AlgorithmDef {
    pub fn new(kind: AlgorithmKind, root: VertexId) -> Self {
        AlgorithmDef { kind, root }
    }

    pub fn bfs(root: VertexId) -> Self {
        Self::new(AlgorithmKind::Bfs, root)
    }

    pub fn sssp(root: VertexId) -> Self {
        Self::new(AlgorithmKind::Sssp, root)
    }

    pub fn sswp(root: VertexId) -> Self {
        Self::new(AlgorithmKind::Sswp, root)
    }

    pub fn wcc() -> Self {
        Self::new(AlgorithmKind::Wcc, 0)
    }

    pub fn init_val(&self, vid: VertexId) -> Value {
        match self.kind {
            AlgorithmKind::Bfs | AlgorithmKind::Sssp => {
                if vid == self.root {
                    0
                } else {
                    UNREACHED
                }
            }
            AlgorithmKind::Sswp => {
                if vid == self.root {
                    UNREACHED
                } else {
                    SSWP_UNREACHED
                }
            }
            AlgorithmKind::Wcc => vid,
        }
    }

    /// The value that means "not reached", if the algorithm has one.
    pub fn unreached(&self) -> Option<Value> {
        match self.kind {
            AlgorithmKind::Bfs | AlgorithmKind::Sssp => Some(UNREACHED),
            AlgorithmKind::Sswp => Some(SSWP_UNREACHED),
            AlgorithmKind::Wcc => None,
        }
    }

    pub fn is_unreached(&self, value: Value) -> bool {
        self.unreached() == Some(value)
    }

    pub fn check_weight(&self, weight: Weight) -> Result<()> {
        if self.kind == AlgorithmKind::Sssp && weight < 0 {
            return Err(Error::NegativeWeight(weight));
        }
        Ok(())
    }

    /// Candidate for the destination of an edge with `weight` whose source
    /// holds `src_value`. The unreached value is absorbing.
    ///
    /// Negative SSSP weights must be rejected with [`check_weight`] first;
    /// here they are treated as zero. SSWP clamps negative widths to zero.
    ///
    /// [`check_weight`]: AlgorithmDef::check_weight
    #[inline]
    pub fn gen_next(&self, weight: Weight, src_value: Value) -> Value {
        match self.kind {
            AlgorithmKind::Bfs => {
                if src_value == UNREACHED {
                    UNREACHED
                } else {
                    src_value.saturating_add(1)
                }
            }
            AlgorithmKind::Sssp => {
                if src_value == UNREACHED {
                    UNREACHED
                } else {
                    src_value.saturating_add(weight.max(0) as u64)
                }
            }
            AlgorithmKind::Sswp => src_value.min(weight.max(0) as u64),
            AlgorithmKind::Wcc => src_value,
        }
    }

    pub fn try_gen_next(&self, weight: Weight, src_value: Value) -> Result<Value> {
        self.check_weight(weight)?;
        Ok(self.gen_next(weight, src_value))
    }

    /// Whether `next` strictly improves on `cur` for vertex `vid`.
    #[inline]
    pub fn need_upd(&self, _vid: VertexId, cur: Value, next: Value) -> bool {
        match self.kind {
            AlgorithmKind::Sswp => next > cur,
            _ => next < cur,
        }
    }

    /// Whether `a` is at least as good as `b`.
    #[inline]
    pub fn at_least_as_good(&self, a: Value, b: Value) -> bool {
        !self.need_upd(0, a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_values() {
        assert_eq!(AlgorithmDef::bfs(3).init_val(3), 0);
        assert_eq!(AlgorithmDef::bfs(3).init_val(4), UNREACHED);
        assert_eq!(AlgorithmDef::sssp(0).init_val(0), 0);
        assert_eq!(AlgorithmDef::sswp(0).init_val(1), 0);
        assert_eq!(AlgorithmDef::sswp(0).init_val(0), UNREACHED);
        assert_eq!(AlgorithmDef::wcc().init_val(7), 7);
    }

    #[test]
    fn gen_next_values() {
        assert_eq!(AlgorithmDef::sssp(0).gen_next(4, 3), 7);
        assert_eq!(AlgorithmDef::bfs(0).gen_next(0, UNREACHED), UNREACHED);
        assert_eq!(AlgorithmDef::sssp(0).gen_next(9, UNREACHED), UNREACHED);
        assert_eq!(AlgorithmDef::sswp(0).gen_next(5, 9), 5);
        assert_eq!(AlgorithmDef::sswp(0).gen_next(5, 0), 0);
        assert_eq!(AlgorithmDef::wcc().gen_next(3, 11), 11);
        assert_eq!(AlgorithmDef::bfs(0).gen_next(100, 2), 3);
    }

    #[test]
    fn negative_weight_rejected_for_sssp_only() {
        assert_eq!(
            AlgorithmDef::sssp(0).try_gen_next(-1, 3),
            Err(Error::NegativeWeight(-1))
        );
        assert_eq!(AlgorithmDef::bfs(0).try_gen_next(-1, 3), Ok(4));
        assert_eq!(AlgorithmDef::sswp(0).try_gen_next(-1, 3), Ok(0));
    }

    #[test]
    fn need_upd_values() {
        assert!(AlgorithmDef::bfs(0).need_upd(1, UNREACHED, 1));
        assert!(!AlgorithmDef::sswp(0).need_upd(1, 5, 3));
        assert!(AlgorithmDef::sswp(0).need_upd(1, 3, 5));
        for kind in AlgorithmKind::ALL {
            let a = AlgorithmDef::new(kind, 0);
            assert!(!a.need_upd(0, 42, 42));
        }
    }

    #[test]
    fn parse_names() {
        for kind in AlgorithmKind::ALL {
            assert_eq!(kind.name().parse::<AlgorithmKind>().unwrap(), kind);
        }
        assert!("pagerank".parse::<AlgorithmKind>().is_err());
    }

    fn any_algo() -> impl Strategy<Value = AlgorithmDef> {
        prop_oneof![
            Just(AlgorithmDef::bfs(0)),
            Just(AlgorithmDef::sssp(0)),
            Just(AlgorithmDef::sswp(0)),
            Just(AlgorithmDef::wcc()),
        ]
    }

    proptest! {
        #[test]
        fn pushed_value_never_beats_source(algo in any_algo(), x in any::<u64>(), w in 0i64..i64::MAX) {
            prop_assume!(!algo.is_unreached(x));
            let next = algo.gen_next(w, x);
            prop_assert!(!algo.need_upd(1, x, next));
        }

        #[test]
        fn need_upd_is_a_strict_order(algo in any_algo(), a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
            prop_assert!(!algo.need_upd(0, a, a));
            if algo.need_upd(0, a, b) && algo.need_upd(0, b, c) {
                prop_assert!(algo.need_upd(0, a, c));
            }
        }

        #[test]
        fn gen_next_is_deterministic(algo in any_algo(), x in any::<u64>(), w in any::<i64>()) {
            prop_assert_eq!(algo.gen_next(w, x), algo.gen_next(w, x));
        }
    }
}
