//! Affected-area analysis.
//!
//! Deleting tree edge `i → j` can modify at most the subtree under `j`
//! (AFFV) and inspect at most the edges incident to it (AFFE); non-tree
//! edges affect nothing. Averaged over all edges, with tree depth `D` and
//! mean degree `d̄ = |E| / |V|`:
//!
//! - mean AFFV ≤ (D + 1) / d̄, i.e. ΣAFFV ≤ (D + 1)·|V|;
//! - mean AFFE ≤ 2(D + 1), i.e. ΣAFFE ≤ 2(D + 1)·|E|.
//!
//! Both checks use exact integer arithmetic. Edges are distinct live
//! records; a vertex's degree is its in-degree plus out-degree.

use crate::algorithms::AlgorithmDef;
use crate::engine::{full_recompute, Parent};
use crate::error::Result;
use crate::graph_store::{GraphStore, VertexId};

#[derive(Debug, Clone, PartialEq)]
pub struct AffReport {
    pub vertices: u64,
    pub edges: u64,
    pub sum_affv: u128,
    pub sum_affe: u128,
    pub tree_depth: u64,
    pub mean_affv: f64,
    pub mean_affe: f64,
    pub mean_degree: f64,
    pub bound_v: f64,
    pub bound_e: f64,
    pub holds_v: bool,
    pub holds_e: bool,
}

impl AffReport {
    pub fn holds(&self) -> bool {
        self.holds_v && self.holds_e
    }
}

pub fn aff_analyze(graph: &GraphStore, algo: &AlgorithmDef) -> Result<AffReport> {
    let state = full_recompute(graph, algo)?;
    let n = graph.vertex_capacity();
    let live: Vec<VertexId> = graph.live_vertices().collect();

    let mut depth: Vec<Option<u64>> = vec![None; n];
    for &v in &live {
        let mut path = Vec::new();
        let mut cur = v;
        let base = loop {
            if let Some(d) = depth[cur as usize] {
                break d;
            }
            match state.parents[cur as usize] {
                Some(p) => {
                    path.push(cur);
                    cur = p.src;
                }
                None => {
                    depth[cur as usize] = Some(0);
                    break 0;
                }
            }
        };
        for (k, &u) in path.iter().rev().enumerate() {
            depth[u as usize] = Some(base + k as u64 + 1);
        }
    }

    let mut order = live.clone();
    order.sort_unstable_by_key(|&v| std::cmp::Reverse(depth[v as usize]));
    let mut size = vec![0u128; n];
    let mut deg_sum = vec![0u128; n];
    for &v in &order {
        let i = v as usize;
        size[i] += 1;
        deg_sum[i] += (graph.out_degree(v) + graph.in_degree(v)) as u128;
        if let Some(p) = state.parents[i] {
            let (s, d) = (size[i], deg_sum[i]);
            size[p.src as usize] += s;
            deg_sum[p.src as usize] += d;
        }
    }

    let (mut edges, mut sum_affv, mut sum_affe) = (0u64, 0u128, 0u128);
    for &u in &live {
        let list = graph.out_edges(u)?;
        for rec in list.iter() {
            edges += 1;
            let j = rec.dst as usize;
            if state.parents[j]
                == Some(Parent {
                    src: u,
                    weight: rec.weight,
                })
            {
                sum_affv += size[j];
                sum_affe += deg_sum[j];
            }
        }
    }

    let vertices = live.len() as u64;
    let tree_depth = live
        .iter()
        .filter_map(|&v| depth[v as usize])
        .max()
        .unwrap_or(0);
    let d1 = tree_depth as u128 + 1;
    let mean_degree = if vertices == 0 {
        0.0
    } else {
        edges as f64 / vertices as f64
    };
    let per_edge = |s: u128| {
        if edges == 0 {
            0.0
        } else {
            s as f64 / edges as f64
        }
    };
    Ok(AffReport {
        vertices,
        edges,
        sum_affv,
        sum_affe,
        tree_depth,
        mean_affv: per_edge(sum_affv),
        mean_affe: per_edge(sum_affe),
        mean_degree,
        bound_v: if edges == 0 {
            f64::INFINITY
        } else {
            d1 as f64 / mean_degree
        },
        bound_e: 2.0 * d1 as f64,
        holds_v: sum_affv <= d1 * vertices as u128,
        holds_e: sum_affe <= 2 * d1 * edges as u128,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star() {
        let k = 10u64;
        let edges: Vec<_> = (1..=k).map(|v| (0, v, 1)).collect();
        let g = GraphStore::from_edges(k as usize + 1, &edges).unwrap();
        let r = aff_analyze(&g, &AlgorithmDef::bfs(0)).unwrap();
        assert_eq!((r.sum_affv, r.edges, r.tree_depth), (k as u128, k, 1));
        // each leaf has degree 1
        assert_eq!(r.sum_affe, k as u128);
        assert!(r.holds());
    }

    #[test]
    fn chain_by_direct_summation() {
        let n = 50u64;
        let edges: Vec<_> = (0..n - 1).map(|v| (v, v + 1, 1)).collect();
        let g = GraphStore::from_edges(n as usize, &edges).unwrap();
        let r = aff_analyze(&g, &AlgorithmDef::bfs(0)).unwrap();
        // edge v→v+1 invalidates n-1-v vertices: (n-1) + ... + 1
        let direct: u128 = (1..n as u128).sum();
        assert_eq!(r.sum_affv, direct);
        assert_eq!(r.tree_depth, n - 1);
        assert!((r.mean_affv - n as f64 / 2.0).abs() < 1e-9);
        assert!(r.holds());
    }
}
