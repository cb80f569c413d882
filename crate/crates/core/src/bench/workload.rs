//! Workload generation.
//!
//! A fraction of the edges is preloaded. The remaining edges form the
//! insertion set; an equally sized deletion set is taken from the start of
//! the preload. With timestamped input the edge order is time order, so
//! insertions are the newest edges and deletions the oldest. Otherwise the
//! edges are shuffled by seed first.
//!
//! The stream interleaves insertions and deletions by `insert_ratio` and
//! assigns updates to sessions round-robin. Long runs replay the stream in
//! rounds, inverting every update on odd rounds so each round is valid
//! after the previous one. An update and its inverse land in the same
//! session.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Edge;
use crate::ccontrol::Update;
use crate::error::{Error, Result};
use crate::graph_store::GraphStore;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub preload_fraction: f64,
    pub insert_ratio: f64,
    pub timestamped: bool,
    pub seed: u64,
    pub session_count: usize,
    pub txn_size: usize,
    /// Each edge update covers both directions as one transaction.
    pub undirected: bool,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            preload_fraction: 0.9,
            insert_ratio: 0.5,
            timestamped: false,
            seed: 0,
            session_count: 1,
            txn_size: 1,
            undirected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadOp {
    pub session: usize,
    pub update: Update,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub num_vertices: usize,
    pub preload: Vec<Edge>,
    pub insertions: Vec<Edge>,
    pub deletions: Vec<Edge>,
    pub stream: Vec<WorkloadOp>,
    pub sessions: usize,
    pub undirected: bool,
}

pub fn gen_workload(num_vertices: usize, edges: &[Edge], spec: &WorkloadSpec) -> Workload {
    assert!((0.0..=1.0).contains(&spec.preload_fraction));
    assert!((0.0..=1.0).contains(&spec.insert_ratio));
    let sessions = spec.session_count.max(1);
    let mut order = edges.to_vec();
    if !spec.timestamped {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    }
    let n_pre = ((order.len() as f64) * spec.preload_fraction).round() as usize;
    let n_pre = n_pre.min(order.len());
    let insertions = order.split_off(n_pre);
    let preload = order;
    let deletions = preload[..insertions.len().min(preload.len())].to_vec();

    let edge_update = |ins: bool, (s, d, w): Edge| {
        let one = |s, d| {
            if ins {
                Update::ins(s, d, w)
            } else {
                Update::del(s, d, w)
            }
        };
        if spec.undirected {
            Update::Txn(vec![one(s, d), one(d, s)])
        } else {
            one(s, d)
        }
    };
    let total = insertions.len() + deletions.len();
    let (mut i, mut d) = (0usize, 0usize);
    let mut prims = Vec::with_capacity(total);
    for k in 0..total {
        let want_ins = (i as f64) < spec.insert_ratio * (k + 1) as f64 - 1e-9;
        let ins = (want_ins && i < insertions.len()) || d >= deletions.len();
        if ins {
            prims.push(edge_update(true, insertions[i]));
            i += 1;
        } else {
            prims.push(edge_update(false, deletions[d]));
            d += 1;
        }
    }

    let stream = if spec.txn_size <= 1 {
        prims
            .into_iter()
            .enumerate()
            .map(|(j, update)| WorkloadOp {
                session: j % sessions,
                update,
            })
            .collect()
    } else {
        // group consecutive updates of each session, ordered by first member
        let mut groups: Vec<(usize, usize, Vec<Update>)> = Vec::new();
        let mut open: Vec<Option<usize>> = vec![None; sessions];
        for (j, u) in prims.into_iter().enumerate() {
            let s = j % sessions;
            let g = match open[s] {
                Some(g) if groups[g].2.len() < spec.txn_size => g,
                _ => {
                    groups.push((j, s, Vec::new()));
                    open[s] = Some(groups.len() - 1);
                    groups.len() - 1
                }
            };
            groups[g].2.push(u);
        }
        groups
            .into_iter()
            .map(|(_, s, us)| {
                let mut flat = Vec::new();
                for u in us {
                    match u {
                        Update::Txn(ops) => flat.extend(ops),
                        op => flat.push(op),
                    }
                }
                WorkloadOp {
                    session: s,
                    update: Update::Txn(flat),
                }
            })
            .collect()
    };
    Workload {
        num_vertices,
        preload,
        insertions,
        deletions,
        stream,
        sessions,
        undirected: spec.undirected,
    }
}

impl Workload {
    /// Graph holding the preloaded edges, both directions if undirected.
    pub fn preload_graph(&self) -> Result<GraphStore> {
        let g = GraphStore::with_vertices(self.num_vertices);
        for &(s, d, w) in &self.preload {
            g.insert_edge(s, d, w)?;
            if self.undirected {
                g.insert_edge(d, s, w)?;
            }
        }
        Ok(g)
    }

    /// The `k`-th update of the cycled stream.
    pub fn op(&self, k: usize) -> WorkloadOp {
        let len = self.stream.len();
        let base = &self.stream[k % len];
        if (k / len).is_multiple_of(2) {
            base.clone()
        } else {
            WorkloadOp {
                session: base.session,
                update: base
                    .update
                    .inverse_edge_op()
                    .expect("generated streams hold only edge updates"),
            }
        }
    }

    /// The first `n` updates of the cycled stream.
    pub fn cycled(&self, n: usize) -> Vec<WorkloadOp> {
        if self.stream.is_empty() {
            return Vec::new();
        }
        (0..n).map(|k| self.op(k)).collect()
    }

    /// Per-session update sequences of the cycled stream, `rounds` long.
    pub fn per_session(&self, rounds: usize) -> Vec<Vec<Update>> {
        let mut out = vec![Vec::new(); self.sessions];
        for op in self.cycled(self.stream.len() * rounds) {
            out[op.session].push(op.update);
        }
        out
    }
}

fn write_op(out: &mut String, u: &Update) {
    match u {
        Update::InsEdge { src, dst, weight } => writeln!(out, "a {src} {dst} {weight}"),
        Update::DelEdge { src, dst, weight } => writeln!(out, "d {src} {dst} {weight}"),
        Update::InsVertex => writeln!(out, "av"),
        Update::DelVertex(v) => writeln!(out, "dv {v}"),
        Update::Txn(ops) => {
            writeln!(out, "txn {}", ops.len()).unwrap();
            for op in ops {
                write_op(out, op);
            }
            Ok(())
        }
    }
    .unwrap();
}

/// Text workload: `a src dst w`, `d src dst w`, `av`, `dv v`, and
/// `txn n` followed by its `n` lines.
pub fn format_updates<'a>(updates: impl IntoIterator<Item = &'a Update>) -> String {
    let mut out = String::new();
    for u in updates {
        write_op(&mut out, u);
    }
    out
}

pub fn parse_updates(r: impl BufRead) -> Result<Vec<Update>> {
    let mut lines = r.lines().enumerate().filter_map(|(n, l)| match l {
        Ok(l) => {
            let t = l.split('#').next().unwrap_or("").trim().to_string();
            (!t.is_empty()).then_some(Ok((n + 1, t)))
        }
        Err(e) => Some(Err(Error::from(e))),
    });
    let mut out = Vec::new();
    while let Some(item) = lines.next() {
        let (n, line) = item?;
        let bad = |n: usize| Error::Io(format!("workload line {n}: cannot parse"));
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "txn" {
            let k: usize = toks
                .get(1)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(n))?;
            let mut ops = Vec::with_capacity(k);
            for _ in 0..k {
                let (m, l) = lines.next().ok_or_else(|| bad(n))??;
                let toks: Vec<&str> = l.split_whitespace().collect();
                ops.push(parse_simple(&toks).ok_or_else(|| bad(m))?);
            }
            out.push(Update::Txn(ops));
        } else {
            out.push(parse_simple(&toks).ok_or_else(|| bad(n))?);
        }
    }
    Ok(out)
}

fn parse_simple(toks: &[&str]) -> Option<Update> {
    let num = |i: usize| toks.get(i)?.parse::<u64>().ok();
    match (toks.first().copied()?, toks.len()) {
        ("a", 4) => Some(Update::ins(num(1)?, num(2)?, toks[3].parse().ok()?)),
        ("d", 4) => Some(Update::del(num(1)?, num(2)?, toks[3].parse().ok()?)),
        ("av", 1) => Some(Update::InsVertex),
        ("dv", 2) => Some(Update::DelVertex(num(1)?)),
        _ => None,
    }
}

pub fn read_workload_file(path: &Path) -> Result<Vec<Update>> {
    let f = std::fs::File::open(path)?;
    parse_updates(std::io::BufReader::new(f))
}
