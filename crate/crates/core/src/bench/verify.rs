//! Oracle harness: after every update, each engine's state must equal a
//! from-scratch recomputation and satisfy every state invariant.

use crate::algorithms::{AlgorithmDef, Value};
use crate::ccontrol::{Class, System, Update};
use crate::engine::{check_state, full_recompute, DependencyState, Violation};
use crate::error::Error;
use crate::graph_store::VertexId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DivergenceKind {
    ApplyFailed(Error),
    ValueMismatch {
        algo: usize,
        vertex: VertexId,
        expected: Value,
        got: Value,
    },
    InvalidState {
        algo: usize,
        violation: Violation,
    },
    /// A safe update changed a value or parent: a classification bug.
    SafeChangedState {
        algo: usize,
        vertex: VertexId,
    },
    /// An unsafe edge insertion that changed nothing.
    UnsafeChangedNothing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Zero-based index of the offending update in the stream.
    pub index: usize,
    pub update: Update,
    pub kind: DivergenceKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub updates: usize,
    pub safe: usize,
    pub unsafe_: usize,
    pub failure: Option<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// A slot missing from the shorter state counts as `(init_val, no parent)`,
/// so growing the vertex range is not a change.
fn first_diff(algo: &AlgorithmDef, a: &DependencyState, b: &DependencyState) -> Option<VertexId> {
    let n = a.values.len().max(b.values.len());
    let at = |s: &DependencyState, i: usize| {
        let init = algo.init_val(i as VertexId);
        (
            s.values.get(i).copied().unwrap_or(init),
            s.parents.get(i).copied().flatten(),
        )
    };
    (0..n)
        .find(|&i| at(a, i) != at(b, i))
        .map(|i| i as VertexId)
}

/// Applies `updates` serially, checking after each one. Stops at the first
/// divergence.
pub fn verify(system: &mut System, updates: impl IntoIterator<Item = Update>) -> VerifyReport {
    let mut report = VerifyReport::default();
    let algos = system.algos();
    for (index, update) in updates.into_iter().enumerate() {
        let fail = |kind| {
            Some(Divergence {
                index,
                update: update.clone(),
                kind,
            })
        };
        let before: Vec<DependencyState> =
            (0..algos.len()).map(|a| system.state(a).unwrap()).collect();
        let applied = match system.apply(&update) {
            Ok(a) => a,
            Err(e) => {
                report.failure = fail(DivergenceKind::ApplyFailed(e));
                break;
            }
        };
        report.updates += 1;
        let after: Vec<DependencyState> =
            (0..algos.len()).map(|a| system.state(a).unwrap()).collect();
        match applied.class {
            Class::Safe => {
                report.safe += 1;
                if let Some((algo, v)) = (0..algos.len())
                    .find_map(|a| first_diff(&algos[a], &before[a], &after[a]).map(|v| (a, v)))
                {
                    report.failure = fail(DivergenceKind::SafeChangedState { algo, vertex: v });
                    break;
                }
            }
            _ => {
                report.unsafe_ += 1;
                let is_insert = matches!(update, Update::InsEdge { .. });
                if is_insert
                    && (0..algos.len())
                        .all(|a| first_diff(&algos[a], &before[a], &after[a]).is_none())
                {
                    report.failure = fail(DivergenceKind::UnsafeChangedNothing);
                    break;
                }
            }
        }
        for (a, algo) in algos.iter().enumerate() {
            let oracle = match full_recompute(system.graph(), algo) {
                Ok(s) => s,
                Err(e) => {
                    report.failure = fail(DivergenceKind::ApplyFailed(e));
                    return report;
                }
            };
            let state = &after[a];
            if let Some(v) =
                (0..oracle.values.len()).find(|&v| state.values.get(v) != Some(&oracle.values[v]))
            {
                report.failure = fail(DivergenceKind::ValueMismatch {
                    algo: a,
                    vertex: v as VertexId,
                    expected: oracle.values[v],
                    got: state
                        .values
                        .get(v)
                        .copied()
                        .unwrap_or(algo.init_val(v as VertexId)),
                });
                return report;
            }
            if let Err(violation) = check_state(system.graph(), algo, state) {
                report.failure = fail(DivergenceKind::InvalidState { algo: a, violation });
                return report;
            }
        }
    }
    report
}
