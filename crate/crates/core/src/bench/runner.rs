//! Closed-loop runners: each session submits one update and waits for its
//! reply before sending the next.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value as Json};

use super::metrics::{RunMetrics, Sample};
use super::workload::Workload;
use crate::ccontrol::{Class, Coordinator, Update};
use crate::server::Client;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Stop after this long.
    pub duration: Option<Duration>,
    /// Stop after this many updates in total.
    pub max_ops: Option<usize>,
    pub latency_limit: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            duration: Some(Duration::from_secs(10)),
            max_ops: None,
            latency_limit: Duration::from_millis(20),
        }
    }
}

/// Cycled per-session update source.
struct SessionOps<'a> {
    workload: &'a Workload,
    positions: Vec<usize>,
    next: usize,
}

impl<'a> SessionOps<'a> {
    fn new(workload: &'a Workload, session: usize) -> Self {
        let positions = workload
            .stream
            .iter()
            .enumerate()
            .filter(|(_, o)| o.session == session)
            .map(|(j, _)| j)
            .collect();
        SessionOps {
            workload,
            positions,
            next: 0,
        }
    }
}

impl Iterator for SessionOps<'_> {
    type Item = Update;

    fn next(&mut self) -> Option<Update> {
        if self.positions.is_empty() {
            return None;
        }
        let round = self.next / self.positions.len();
        let pos = self.positions[self.next % self.positions.len()];
        self.next += 1;
        Some(
            self.workload
                .op(round * self.workload.stream.len() + pos)
                .update,
        )
    }
}

fn budget(cfg: &BenchConfig, done: &AtomicU64, start: Instant) -> bool {
    let n = done.fetch_add(1, Ordering::Relaxed) as usize;
    if cfg.max_ops.is_some_and(|m| n >= m) {
        return false;
    }
    !cfg.duration.is_some_and(|d| start.elapsed() >= d)
}

/// Runs `workload.sessions` closed-loop sessions against an in-process
/// coordinator. Latency is the server-side enqueue-to-reply time.
pub fn run_in_process(coord: &Coordinator, workload: &Workload, cfg: &BenchConfig) -> RunMetrics {
    let start = Instant::now();
    let issued = AtomicU64::new(0);
    let completed = AtomicU64::new(0);
    let results: Vec<(Vec<Sample>, usize)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workload.sessions)
            .map(|s| {
                let session = coord.open_session();
                let (issued, completed) = (&issued, &completed);
                scope.spawn(move || {
                    let mut samples = Vec::new();
                    let mut errors = 0;
                    for update in SessionOps::new(workload, s) {
                        if !budget(cfg, issued, start) {
                            break;
                        }
                        let reply = match session
                            .submit(update)
                            .and_then(|rx| rx.recv().map_err(|_| crate::error::Error::Shutdown))
                        {
                            Ok(r) => r,
                            Err(_) => {
                                errors += 1;
                                break;
                            }
                        };
                        let class = match (&reply.result, reply.deferred) {
                            (Err(_), _) => "error",
                            (Ok(_), true) => Class::NextEpoch.as_str(),
                            (Ok(a), false) => a.class.as_str(),
                        };
                        if reply.result.is_err() {
                            errors += 1;
                        }
                        samples.push(Sample {
                            ts: start.elapsed(),
                            op_index: completed.fetch_add(1, Ordering::Relaxed),
                            class,
                            latency: reply.latency,
                        });
                    }
                    (samples, errors)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("session thread panicked"))
            .collect()
    });
    let elapsed = start.elapsed();
    let errors = results.iter().map(|r| r.1).sum();
    let mut samples: Vec<Sample> = results.into_iter().flat_map(|r| r.0).collect();
    samples.sort_by_key(|s| s.op_index);
    RunMetrics::from_samples(
        samples,
        errors,
        elapsed,
        cfg.latency_limit,
        coord.stats().threshold_trace,
        false,
    )
}

/// Wire form of an update: `(op, args)`.
pub fn update_to_request(update: &Update) -> (&'static str, Vec<Json>) {
    match update {
        Update::InsEdge { src, dst, weight } => {
            ("ins_edge", vec![json!(src), json!(dst), json!(weight)])
        }
        Update::DelEdge { src, dst, weight } => {
            ("del_edge", vec![json!(src), json!(dst), json!(weight)])
        }
        Update::InsVertex => ("ins_vertex", vec![]),
        Update::DelVertex(v) => ("del_vertex", vec![json!(v)]),
        Update::Txn(ops) => (
            "txn_updates",
            ops.iter()
                .map(|op| {
                    let (name, mut args) = update_to_request(op);
                    args.insert(0, json!(name));
                    Json::Array(args)
                })
                .collect(),
        ),
    }
}

/// Same as [`run_in_process`] over TCP. Latency is measured at the client.
pub fn run_tcp(addr: SocketAddr, workload: &Workload, cfg: &BenchConfig) -> RunMetrics {
    let start = Instant::now();
    let issued = Arc::new(AtomicU64::new(0));
    let completed = Arc::new(AtomicU64::new(0));
    let results: Vec<(Vec<Sample>, usize, bool)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workload.sessions)
            .map(|s| {
                let (issued, completed) = (issued.clone(), completed.clone());
                scope.spawn(move || {
                    let mut samples = Vec::new();
                    let mut errors = 0;
                    let Ok(mut client) = Client::connect(addr) else {
                        return (samples, 1, true);
                    };
                    for update in SessionOps::new(workload, s) {
                        if !budget(cfg, &issued, start) {
                            break;
                        }
                        let (op, args) = update_to_request(&update);
                        let t0 = Instant::now();
                        let class = match client.write(op, args) {
                            Ok(Ok(_)) => "ok",
                            Ok(Err(_)) => {
                                errors += 1;
                                "error"
                            }
                            Err(_) => return (samples, errors + 1, true),
                        };
                        samples.push(Sample {
                            ts: start.elapsed(),
                            op_index: completed.fetch_add(1, Ordering::Relaxed),
                            class,
                            latency: t0.elapsed(),
                        });
                    }
                    (samples, errors, false)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("client thread panicked"))
            .collect()
    });
    let elapsed = start.elapsed();
    let errors = results.iter().map(|r| r.1).sum();
    let partial = results.iter().any(|r| r.2);
    let mut samples: Vec<Sample> = results.into_iter().flat_map(|r| r.0).collect();
    samples.sort_by_key(|s| s.op_index);
    RunMetrics::from_samples(
        samples,
        errors,
        elapsed,
        cfg.latency_limit,
        Vec::new(),
        partial,
    )
}
