//! From-scratch computation and state validation. Both are sequential and
//! share no code with the incremental push path, so they serve as oracles.

use std::collections::VecDeque;

use crate::algorithms::{AlgorithmDef, Value};
use crate::error::Result;
use crate::graph_store::{GraphStore, VertexId};

use super::{DependencyState, Parent};

/// Least fixpoint from `init_val` by FIFO label correction.
pub fn full_recompute(graph: &GraphStore, algo: &AlgorithmDef) -> Result<DependencyState> {
    let n = graph.vertex_capacity();
    let mut values: Vec<Value> = (0..n as VertexId).map(|v| algo.init_val(v)).collect();
    let mut parents: Vec<Option<Parent>> = vec![None; n];
    let mut queued = vec![false; n];
    let mut queue = VecDeque::new();
    for v in graph.live_vertices() {
        if !algo.is_unreached(values[v as usize]) {
            queue.push_back(v);
            queued[v as usize] = true;
        }
    }
    while let Some(u) = queue.pop_front() {
        queued[u as usize] = false;
        let src_val = values[u as usize];
        let edges = graph.out_edges(u)?;
        for rec in edges.iter() {
            let next = algo.try_gen_next(rec.weight, src_val)?;
            let d = rec.dst as usize;
            if algo.need_upd(rec.dst, values[d], next) {
                values[d] = next;
                parents[d] = Some(Parent {
                    src: u,
                    weight: rec.weight,
                });
                if !queued[d] {
                    queued[d] = true;
                    queue.push_back(rec.dst);
                }
            }
        }
    }
    Ok(DependencyState { values, parents })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A parentless vertex whose value is not its initial value.
    Unjustified(VertexId),
    /// An unreached vertex with a parent link.
    UnreachedWithParent(VertexId),
    /// Parent edge is not live in the graph.
    DanglingParent(VertexId),
    /// Value does not equal `gen_next` over the parent edge.
    ParentMismatch(VertexId),
    /// Following parent links never reaches a root.
    ParentCycle(VertexId),
    /// A live edge would still improve its destination.
    Improvable { src: VertexId, dst: VertexId },
    /// State vector shorter than the vertex range.
    Truncated,
}

/// Checks every dependency-state invariant. Returns the first violation.
pub fn check_state(
    graph: &GraphStore,
    algo: &AlgorithmDef,
    state: &DependencyState,
) -> std::result::Result<(), Violation> {
    let n = graph.vertex_capacity();
    if state.values.len() < n || state.parents.len() < n {
        return Err(Violation::Truncated);
    }
    for v in graph.live_vertices() {
        let i = v as usize;
        let value = state.values[i];
        match state.parents[i] {
            None => {
                if value != algo.init_val(v) {
                    return Err(Violation::Unjustified(v));
                }
            }
            Some(p) => {
                if algo.is_unreached(value) {
                    return Err(Violation::UnreachedWithParent(v));
                }
                if !graph.is_live(p.src) || graph.lookup_count(p.src, v, p.weight).unwrap_or(0) == 0
                {
                    return Err(Violation::DanglingParent(v));
                }
                if algo.gen_next(p.weight, state.values[p.src as usize]) != value {
                    return Err(Violation::ParentMismatch(v));
                }
            }
        }
    }
    // every parent chain must end at a parentless vertex
    // 0 = unvisited, 1 = on current walk, 2 = known good
    let mut mark = vec![0u8; n];
    for v in graph.live_vertices() {
        let mut path = Vec::new();
        let mut cur = v;
        loop {
            match mark[cur as usize] {
                2 => break,
                1 => return Err(Violation::ParentCycle(cur)),
                _ => {}
            }
            mark[cur as usize] = 1;
            path.push(cur);
            match state.parents[cur as usize] {
                Some(p) => cur = p.src,
                None => break,
            }
        }
        for p in path {
            mark[p as usize] = 2;
        }
    }
    for u in graph.live_vertices() {
        let src_val = state.values[u as usize];
        let edges = graph.out_edges(u).map_err(|_| Violation::Truncated)?;
        for rec in edges.iter() {
            let next = algo.gen_next(rec.weight, src_val);
            if algo.need_upd(rec.dst, state.values[rec.dst as usize], next) {
                return Err(Violation::Improvable {
                    src: u,
                    dst: rec.dst,
                });
            }
        }
    }
    Ok(())
}

pub fn validate_state(graph: &GraphStore, algo: &AlgorithmDef, state: &DependencyState) -> bool {
    check_state(graph, algo, state).is_ok()
}
