use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParallelMode {
    VertexParallel,
    EdgeParallel,
}

/// Linear decision boundary in log space:
/// edge-parallel iff `a·ln(max(1, vertices)) + b·ln(max(1, degree)) >= c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelModeModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for ParallelModeModel {
    /// Hand-set boundary: edge-parallel when few vertices carry many edges.
    fn default() -> Self {
        ParallelModeModel {
            a: -2.0,
            b: 1.0,
            c: 4.0,
        }
    }
}

impl ParallelModeModel {
    pub fn choose(&self, active_vertices: u64, active_out_degree: u64) -> ParallelMode {
        let x = (active_vertices.max(1) as f64).ln();
        let y = (active_out_degree.max(1) as f64).ln();
        if self.a * x + self.b * y >= self.c {
            ParallelMode::EdgeParallel
        } else {
            ParallelMode::VertexParallel
        }
    }

    /// Reads three whitespace-separated decimals `a b c`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, format!("{self}\n"))?;
        Ok(())
    }
}

impl fmt::Display for ParallelModeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.a, self.b, self.c)
    }
}

impl FromStr for ParallelModeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let nums: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Io(format!("bad model coefficient: {e}")))?;
        match nums.as_slice() {
            [a, b, c] if nums.iter().all(|x| x.is_finite()) => Ok(ParallelModeModel {
                a: *a,
                b: *b,
                c: *c,
            }),
            _ => Err(Error::Io(format!(
                "model file needs exactly 3 finite numbers, got {}",
                nums.len()
            ))),
        }
    }
}

/// How push rounds pick their parallel mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModePolicy {
    Vertex,
    Edge,
    /// Linear classifier.
    Hybrid(ParallelModeModel),
    /// Used when no model file is configured: edge-parallel iff
    /// `vertices < 4 × workers` and `degree / max(1, vertices) > 32`.
    Heuristic {
        workers: usize,
    },
}

impl ModePolicy {
    pub fn choose(&self, active_vertices: u64, active_out_degree: u64) -> ParallelMode {
        match self {
            ModePolicy::Vertex => ParallelMode::VertexParallel,
            ModePolicy::Edge => ParallelMode::EdgeParallel,
            ModePolicy::Hybrid(m) => m.choose(active_vertices, active_out_degree),
            ModePolicy::Heuristic { workers } => {
                let avg = active_out_degree / active_vertices.max(1);
                if active_vertices < 4 * *workers as u64 && avg > 32 {
                    ParallelMode::EdgeParallel
                } else {
                    ParallelMode::VertexParallel
                }
            }
        }
    }
}

/// Mode choice under `policy`.
pub fn choose_parallel_mode(
    policy: &ModePolicy,
    active_vertices: u64,
    active_out_degree: u64,
) -> ParallelMode {
    policy.choose(active_vertices, active_out_degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ParallelMode::*;

    #[test]
    fn degenerate_counts_pick_vertex() {
        assert_eq!(ParallelModeModel::default().choose(0, 0), VertexParallel);
        assert_eq!(
            ModePolicy::Heuristic { workers: 8 }.choose(0, 0),
            VertexParallel
        );
    }

    #[test]
    fn few_vertices_many_edges_pick_edge() {
        assert_eq!(
            ParallelModeModel::default().choose(2, 1_000_000),
            EdgeParallel
        );
        assert_eq!(
            ModePolicy::Heuristic { workers: 8 }.choose(2, 1_000_000),
            EdgeParallel
        );
    }

    #[test]
    fn many_vertices_pick_vertex() {
        assert_eq!(
            ParallelModeModel::default().choose(1_000_000, 1_000_000),
            VertexParallel
        );
        assert_eq!(
            ModePolicy::Heuristic { workers: 8 }.choose(1_000_000, 1_000_000),
            VertexParallel
        );
    }

    #[test]
    fn forced_modes() {
        assert_eq!(ModePolicy::Edge.choose(1_000_000, 1), EdgeParallel);
        assert_eq!(ModePolicy::Vertex.choose(1, 1_000_000), VertexParallel);
    }

    #[test]
    fn parse_model_text() {
        let m: ParallelModeModel = " -2.21 0.58\n14.52 ".parse().unwrap();
        assert_eq!(
            m,
            ParallelModeModel {
                a: -2.21,
                b: 0.58,
                c: 14.52
            }
        );
        assert!("1 2".parse::<ParallelModeModel>().is_err());
        assert!("1 2 x".parse::<ParallelModeModel>().is_err());
        let round: ParallelModeModel = m.to_string().parse().unwrap();
        assert_eq!(round, m);
    }

    #[test]
    fn choice_is_pure() {
        let m = ParallelModeModel::default();
        for &(x, y) in &[(1u64, 1u64), (3, 900), (50, 50_000), (10_000, 20)] {
            assert_eq!(m.choose(x, y), m.choose(x, y));
        }
    }
}
