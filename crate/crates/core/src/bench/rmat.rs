//! Recursive-matrix power-law generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Edge;

/// Quadrant probabilities `(a, b, c)`; `d = 1 - a - b - c`.
pub const DEFAULT_PROBS: (f64, f64, f64) = (0.57, 0.19, 0.19);

/// `num_edges` directed edges over `2^scale` vertices with weights in
/// `1..=100`. Self-loops are redrawn; duplicates are kept.
pub fn rmat_edges(scale: u32, num_edges: usize, seed: u64) -> Vec<Edge> {
    rmat_edges_with(scale, num_edges, seed, DEFAULT_PROBS, 100)
}

pub fn rmat_edges_with(
    scale: u32,
    num_edges: usize,
    seed: u64,
    (a, b, c): (f64, f64, f64),
    max_weight: i64,
) -> Vec<Edge> {
    assert!((1..63).contains(&scale));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(num_edges);
    while edges.len() < num_edges {
        let (mut s, mut d) = (0u64, 0u64);
        for _ in 0..scale {
            let r: f64 = rng.gen();
            let (sb, db) = if r < a {
                (0, 0)
            } else if r < a + b {
                (0, 1)
            } else if r < a + b + c {
                (1, 0)
            } else {
                (1, 1)
            };
            s = (s << 1) | sb;
            d = (d << 1) | db;
        }
        if s == d {
            continue;
        }
        let w = rng.gen_range(1..=max_weight.max(1));
        edges.push((s, d, w));
    }
    edges
}
