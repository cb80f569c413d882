//! Fits the parallel-mode boundary from micro-benchmarks.
//!
//! For each grid point `(active vertices x, total out-degree y)` a graph is
//! built where `x` vertices each have `y / x` out-edges, and one dry push
//! round is timed in both modes. The label is +1 when edge-parallel is
//! faster. A least-squares fit of the label on `(ln x, ln y, 1)` gives the
//! boundary `a·ln x + b·ln y ≥ c`.

use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::AlgorithmDef;
use crate::engine::{build_pool, Engine, EngineOptions, ParallelMode, ParallelModeModel};
use crate::error::Result;
use crate::graph_store::GraphStore;

#[derive(Debug, Clone, PartialEq)]
pub struct FitSample {
    pub active: u64,
    pub degree_sum: u64,
    pub vertex_time: Duration,
    pub edge_time: Duration,
}

impl FitSample {
    pub fn edge_faster(&self) -> bool {
        self.edge_time < self.vertex_time
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ParallelModeModel,
    /// False when the samples cannot separate the modes (all one label or a
    /// singular system); `model` is then the default.
    pub fitted: bool,
    pub training_accuracy: f64,
}

/// Times both modes on every `(x, per-vertex degree)` grid point whose
/// edge total stays within `max_edges`.
pub fn benchmark_modes(
    threads: usize,
    actives: &[u64],
    degrees: &[u64],
    max_edges: u64,
    reps: usize,
    seed: u64,
) -> Result<Vec<FitSample>> {
    let pool = build_pool(threads);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &x in actives {
        for &d in degrees {
            if x * d > max_edges || x == 0 || d == 0 {
                continue;
            }
            let n = (x * 2).max(1024);
            let mut edges = Vec::with_capacity((x * d) as usize);
            for s in 0..x {
                for _ in 0..d {
                    edges.push((s, rng.gen_range(0..n), 1));
                }
            }
            let g = GraphStore::from_edges(n as usize, &edges)?;
            // the root is outside the active range so every probe misses
            let engine = Engine::new(
                &g,
                AlgorithmDef::bfs(n - 1),
                Arc::clone(&pool),
                EngineOptions::default(),
            )?;
            let active: Vec<_> = (0..x).map(|v| (v, 0)).collect();
            let time = |mode| {
                let mut ts: Vec<Duration> = (0..reps.max(1))
                    .map(|_| engine.time_dry_round(&g, &active, mode))
                    .collect();
                ts.sort_unstable();
                ts[ts.len() / 2]
            };
            out.push(FitSample {
                active: x,
                degree_sum: x * d,
                vertex_time: time(ParallelMode::VertexParallel),
                edge_time: time(ParallelMode::EdgeParallel),
            });
        }
    }
    Ok(out)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn fit_linear_boundary(samples: &[FitSample]) -> FitResult {
    let default = |acc| FitResult {
        model: ParallelModeModel::default(),
        fitted: false,
        training_accuracy: acc,
    };
    let pos = samples.iter().filter(|s| s.edge_faster()).count();
    if pos == 0 || pos == samples.len() {
        return default(f64::NAN);
    }
    // normal equations for w·(ln x, ln y, 1) ≈ label
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for s in samples {
        let f = [
            (s.active.max(1) as f64).ln(),
            (s.degree_sum.max(1) as f64).ln(),
            1.0,
        ];
        let label = if s.edge_faster() { 1.0 } else { -1.0 };
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += f[i] * f[j];
            }
            aty[i] += f[i] * label;
        }
    }
    let det = det3(ata);
    if det.abs() < 1e-9 {
        return default(f64::NAN);
    }
    let mut w = [0.0; 3];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut m = ata;
        for i in 0..3 {
            m[i][k] = aty[i];
        }
        *wk = det3(m) / det;
    }
    let model = ParallelModeModel {
        a: w[0],
        b: w[1],
        c: -w[2],
    };
    let correct = samples
        .iter()
        .filter(|s| {
            (model.choose(s.active, s.degree_sum) == ParallelMode::EdgeParallel) == s.edge_faster()
        })
        .count();
    FitResult {
        model,
        fitted: true,
        training_accuracy: correct as f64 / samples.len() as f64,
    }
}
