//! End-to-end acceptance checks. Runs every criterion, prints one
//! `PASS`/`FAIL` line each and exits non-zero if any failed.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use incgraph::bench::io::write_edge_file;
use incgraph::bench::runner::{run_in_process, update_to_request, BenchConfig};
use incgraph::bench::{
    aff_analyze, gen_workload, rmat_edges, verify, DivergenceKind, Workload, WorkloadSpec,
};
use incgraph::ccontrol::{Coordinator, CoordinatorConfig, EpochReport};
use incgraph::engine::{check_state, full_recompute, DependencyState};
use incgraph::graph_store::{DeleteOutcome, InsertOutcome};
use incgraph::scheduler::{Scheduler, SchedulerConfig};
use incgraph::server::Client;
use incgraph::wal::read_wal;
use incgraph::{AlgorithmDef, AlgorithmKind, GraphStore, System, SystemConfig, Update, VersionId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn workload(scale: u32, degree: usize, seed: u64, sessions: usize, undirected: bool) -> Workload {
    let n = 1usize << scale;
    gen_workload(
        n,
        &rmat_edges(scale, n * degree, seed),
        &WorkloadSpec {
            seed,
            session_count: sessions,
            undirected,
            ..WorkloadSpec::default()
        },
    )
}

// ---------------------------------------------------------------- 1, 2, 3

/// Per-algorithm result of the serial oracle run shared by criteria 1-3.
struct OracleRun {
    kind: AlgorithmKind,
    updates: usize,
    safe: usize,
    unsafe_: usize,
    failure: Option<DivergenceKind>,
}

fn oracle_runs() -> Vec<OracleRun> {
    AlgorithmKind::ALL
        .iter()
        .map(|&kind| {
            let w = workload(14, 8, 1, 1, kind.is_undirected());
            let algo = AlgorithmDef::new(kind, 0);
            let mut sys =
                System::new(w.preload_graph().unwrap(), &SystemConfig::new(vec![algo])).unwrap();
            let r = verify(&mut sys, w.cycled(10_000).into_iter().map(|o| o.update));
            OracleRun {
                kind,
                updates: r.updates,
                safe: r.safe,
                unsafe_: r.unsafe_,
                failure: r.failure.map(|d| d.kind),
            }
        })
        .collect()
}

fn judge_oracle(runs: &[OracleRun], owns: impl Fn(&DivergenceKind) -> bool) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let note = match &r.failure {
            None if r.updates == 10_000 => "ok".to_string(),
            None => format!("only {} updates", r.updates),
            Some(k) if owns(k) => format!("violation {k:?}"),
            Some(k) => format!("run stopped early by {k:?}"),
        };
        pass &= note == "ok";
        parts.push(format!(
            "{} {} ({} safe/{} unsafe)",
            r.kind, note, r.safe, r.unsafe_
        ));
    }
    outcome(pass, parts.join("; "))
}

// ---------------------------------------------------------------------- 4

fn serial_equivalence() -> Outcome {
    let mut failures = Vec::new();
    let mut total = 0usize;
    for trial in 0..20u64 {
        let dir = TempDir::new().unwrap();
        let w = gen_workload(
            1 << 10,
            &rmat_edges(10, 8 << 10, 100 + trial),
            &WorkloadSpec {
                seed: 100 + trial,
                session_count: 8,
                txn_size: 1 + (trial % 3) as usize,
                ..WorkloadSpec::default()
            },
        );
        let mut cfg = SystemConfig::new(vec![
            AlgorithmDef::bfs(0),
            AlgorithmDef::sssp(0),
            AlgorithmDef::sswp(0),
        ]);
        cfg.threads = 4;
        cfg.wal = Some(dir.path().join("log"));
        let coord = Arc::new(Coordinator::start(
            System::new(w.preload_graph().unwrap(), &cfg).unwrap(),
            CoordinatorConfig::default(),
        ));
        let mut rounds = 100_000usize.div_ceil(w.stream.len());
        let per_session = loop {
            let p = w.per_session(rounds);
            if p.iter().all(|ops| ops.len() >= 100_000 / 8) {
                break p;
            }
            rounds += 1;
        };
        let committed = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for ops in &per_session {
                let session = coord.open_session();
                let committed = &committed;
                s.spawn(move || {
                    for u in ops.iter().take(100_000 / 8) {
                        session.call(u.clone()).unwrap();
                        committed.fetch_add(1, Ordering::Relaxed);
                    }
                });
            }
        });
        total += committed.load(Ordering::Relaxed);
        let live = Arc::into_inner(coord).unwrap().shutdown();
        cfg.wal = None;
        let records = read_wal(&dir.path().join("log")).unwrap().records;
        let mut serial = System::new(w.preload_graph().unwrap(), &cfg).unwrap();
        for r in &records {
            serial.apply(&r.update).unwrap();
        }
        let mut why = Vec::new();
        if records.len() != committed.load(Ordering::Relaxed) {
            why.push(format!(
                "log holds {} of {} commits",
                records.len(),
                committed.load(Ordering::Relaxed)
            ));
        }
        if live.graph().edge_multiset() != serial.graph().edge_multiset() {
            why.push("graph differs".into());
        }
        for (a, algo) in live.algos().iter().enumerate() {
            let (x, y) = (live.state(a).unwrap(), serial.state(a).unwrap());
            if x.values != y.values {
                why.push(format!("{} values differ", algo.kind));
            }
            if check_state(live.graph(), algo, &x).is_err() {
                why.push(format!("{} live state invalid", algo.kind));
            }
        }
        if !why.is_empty() {
            failures.push(format!("trial {trial}: {}", why.join(", ")));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("20 trials, {total} committed updates, zero divergences")
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------- 5

fn graph_store_oracle() -> Outcome {
    let n = 128u64;
    let mut g = GraphStore::with_index_threshold(32);
    g.reserve_vertices(n as usize);
    let mut reference: BTreeMap<(u64, u64, i64), u32> = BTreeMap::new();
    let mut max_degree = vec![0usize; n as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut mismatches, mut index_errors, mut tomb_errors, mut growths) = (0, 0, 0, 0);
    for _ in 0..100_000 {
        let s = (rng.gen_range(0..n) * rng.gen_range(0..n)) / n;
        let (d, w) = (rng.gen_range(0..n), rng.gen_range(0..3));
        let before = g.out_edges(s).unwrap().list().growths();
        match rng.gen_range(0..10) {
            0..=4 => {
                let c = reference.entry((s, d, w)).or_default();
                *c += 1;
                let got = g.insert_edge(s, d, w).unwrap();
                mismatches += usize::from((got == InsertOutcome::NewEdge) != (*c == 1));
            }
            5..=7 => {
                let got = g.delete_edge(s, d, w);
                match reference.get_mut(&(s, d, w)) {
                    Some(c) => {
                        *c -= 1;
                        let want = if *c == 0 {
                            DeleteOutcome::Removed
                        } else {
                            DeleteOutcome::DuplicateDecrement
                        };
                        mismatches += usize::from(got.ok() != Some(want));
                        if *c == 0 {
                            reference.remove(&(s, d, w));
                        }
                    }
                    None => mismatches += usize::from(got.is_ok()),
                }
            }
            _ => {
                let want = reference.get(&(s, d, w)).copied().unwrap_or(0);
                mismatches += usize::from(g.lookup_count(s, d, w).unwrap() != want);
            }
        }
        let view = g.out_edges(s).unwrap();
        let list = view.list();
        if list.growths() > before {
            growths += 1;
            tomb_errors += usize::from(list.tomb_count() != 0);
        }
        max_degree[s as usize] = max_degree[s as usize].max(list.live_degree());
        index_errors +=
            usize::from(list.has_index() != (max_degree[s as usize] > g.index_threshold()));
        index_errors += usize::from(!list.index_consistent());
    }
    let got: BTreeMap<_, _> = g
        .edge_multiset()
        .into_iter()
        .map(|(s, d, w, c)| ((s, d, w), c))
        .collect();
    let transpose: BTreeMap<_, _> = g
        .transpose_multiset()
        .into_iter()
        .map(|(s, d, w, c)| ((s, d, w), c))
        .collect();
    mismatches += usize::from(got != reference) + usize::from(transpose != reference);
    let indexed = (0..n)
        .filter(|&v| g.out_edges(v).unwrap().list().has_index())
        .count();
    outcome(
        mismatches + index_errors + tomb_errors == 0 && indexed > 0,
        format!(
            "100000 ops: {mismatches} multiset mismatches, {index_errors} index errors, \
             {tomb_errors} tomb errors over {growths} growths, {indexed} indexed lists"
        ),
    )
}

// ---------------------------------------------------------------------- 6

fn history_fidelity() -> Outcome {
    let w = workload(10, 6, 6, 1, false);
    let cfg = SystemConfig::new(vec![
        AlgorithmDef::bfs(0),
        AlgorithmDef::sssp(0),
        AlgorithmDef::sswp(0),
    ]);
    let mut sys = System::new(w.preload_graph().unwrap(), &cfg).unwrap();
    let snap = |sys: &System| {
        (0..3)
            .map(|a| sys.state(a).unwrap())
            .collect::<Vec<DependencyState>>()
    };
    let mut states = BTreeMap::new();
    states.insert(0, snap(&sys));
    for op in w.cycled(3000) {
        let v = sys.apply(&op.update).unwrap().version;
        states.entry(v).or_insert_with(|| snap(&sys));
    }
    let mut sample: Vec<VersionId> = states.keys().copied().collect();
    sample.shuffle(&mut ChaCha8Rng::seed_from_u64(60));
    sample.truncate(100);

    let mismatches = |sys: &System, versions: &[VersionId]| {
        let h = sys.history().read();
        let mut bad = 0usize;
        for &v in versions {
            for (a, s) in states[&v].iter().enumerate() {
                for vid in 0..s.values.len() {
                    let ok = h.get_value(v, a, vid as u64).ok() == Some(s.values[vid])
                        && h.get_parent(v, a, vid as u64).ok() == Some(s.parents[vid]);
                    bad += usize::from(!ok);
                }
            }
        }
        bad
    };
    let before = mismatches(&sys, &sample);

    let cut = *states.keys().nth(states.len() / 2).unwrap();
    {
        let mut h = sys.history().write();
        h.register_session(1);
        h.release(1, cut - 1).unwrap();
        h.reclaim_tick();
    }
    // continue the stream so chains touched after reclamation get trimmed
    for k in 3000..4000 {
        sys.apply(&w.op(k).update).unwrap();
    }
    let kept: Vec<VersionId> = sample.iter().copied().filter(|&v| v >= cut).collect();
    let after = mismatches(&sys, &kept);
    let reclaimed_readable = {
        let h = sys.history().read();
        sample
            .iter()
            .filter(|&&v| v < cut && h.get_value(v, 0, 0).is_ok())
            .count()
    };
    outcome(
        before == 0 && after == 0 && reclaimed_readable == 0 && sample.len() == 100,
        format!(
            "{} versions sampled, {before} mismatches before reclamation, {after} after \
             ({} retained, {reclaimed_readable} reclaimed still readable)",
            sample.len(),
            kept.len()
        ),
    )
}

// ---------------------------------------------------------------------- 7

fn scheduler_constants() -> Outcome {
    let report = |ms: &[u64]| EpochReport {
        latencies: ms.iter().map(|&m| Duration::from_millis(m)).collect(),
        ..EpochReport::default()
    };
    let mut checks = Vec::new();
    let cfg = SchedulerConfig::default();
    checks.push((
        "limit 20 ms",
        cfg.latency_limit == Duration::from_millis(20),
    ));
    checks.push(("target 0.999", cfg.target_fraction == 0.999));
    for w in [1usize, 4, 8, 48] {
        checks.push((
            "initial threshold = workers",
            Scheduler::new(cfg, w).threshold() == w as f64,
        ));
    }
    let s = Scheduler::new(cfg, 1000);
    let t0 = Instant::now();
    checks.push((
        "no trigger at 15.999 ms",
        !s.should_start_unsafe_phase(t0 + Duration::from_micros(15_999), Some(t0), 1),
    ));
    checks.push((
        "trigger at 16 ms",
        s.should_start_unsafe_phase(t0 + Duration::from_millis(16), Some(t0), 1),
    ));
    checks.push((
        "deadline 16 ms",
        s.trigger_deadline(t0) == t0 + Duration::from_millis(16),
    ));

    let mut s = Scheduler::new(cfg, 8);
    s.on_epoch_complete(&report(&[1, 19]));
    s.on_epoch_complete(&report(&[20]));
    checks.push(("no change inside window", s.threshold() == 8.0));
    s.on_epoch_complete(&report(&[5]));
    checks.push((
        "x1.01 after qualified window",
        (s.threshold() - 8.08).abs() < 1e-12,
    ));
    for _ in 0..3 {
        s.on_epoch_complete(&report(&[1, 1, 21]));
    }
    checks.push((
        "x0.90 after failing window",
        (s.threshold() - 8.08 * 0.9).abs() < 1e-12,
    ));
    checks.push(("trace records both", s.trace().len() == 2));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

// ---------------------------------------------------------------------- 8

fn parallelism_effect() -> Outcome {
    let w = workload(14, 8, 8, 8, false);
    let run = |epoch_loop: bool| {
        let mut cfg = SystemConfig::new(vec![AlgorithmDef::bfs(0)]);
        cfg.threads = 8;
        let coord = Coordinator::start(
            System::new(w.preload_graph().unwrap(), &cfg).unwrap(),
            CoordinatorConfig {
                epoch_loop,
                ..CoordinatorConfig::default()
            },
        );
        let m = run_in_process(
            &coord,
            &w,
            &BenchConfig {
                duration: Some(Duration::from_secs(20)),
                max_ops: Some(60_000),
                latency_limit: Duration::from_millis(20),
            },
        );
        (m, coord.stats())
    };
    let (base, _) = run(false);
    let (epoch, stats) = run(true);
    let safe_share = stats.safe as f64 / (stats.safe + stats.unsafe_).max(1) as f64;
    let speedup = epoch.throughput / base.throughput.max(1e-9);
    outcome(
        speedup >= 1.5 && safe_share >= 0.9,
        format!(
            "epoch loop {:.0} ops/s vs baseline {:.0} ops/s = {speedup:.2}x, safe share {safe_share:.3}, \
             {} hardware threads",
            epoch.throughput,
            base.throughput,
            workers()
        ),
    )
}

// ---------------------------------------------------------------------- 9

/// Independent sums: a vertex lies in the subtree of each of its `depth`
/// tree ancestors' incoming tree edges, so ΣAFFV = Σ depth and
/// ΣAFFE = Σ depth·degree.
fn aff_by_depths(g: &GraphStore, algo: &AlgorithmDef) -> (u128, u128, u64) {
    let state = full_recompute(g, algo).unwrap();
    let (mut sv, mut se, mut max_depth) = (0u128, 0u128, 0u64);
    for v in g.live_vertices() {
        let mut depth = 0u64;
        let mut cur = v;
        while let Some(p) = state.parents[cur as usize] {
            depth += 1;
            cur = p.src;
        }
        max_depth = max_depth.max(depth);
        sv += depth as u128;
        se += depth as u128 * (g.out_degree(v) + g.in_degree(v)) as u128;
    }
    (sv, se, max_depth)
}

fn aff_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut violations = Vec::new();
    let mut cases = 0;
    for i in 0..50 {
        let n = rng.gen_range(8..400usize);
        let m = rng.gen_range(n / 2..n * 6);
        let edges: Vec<_> = if i % 2 == 0 {
            (0..m)
                .map(|_| {
                    (
                        rng.gen_range(0..n as u64),
                        rng.gen_range(0..n as u64),
                        rng.gen_range(1..9),
                    )
                })
                .collect()
        } else {
            let scale = (n as f64).log2().ceil() as u32;
            rmat_edges(scale, m, i as u64)
        };
        let n = edges
            .iter()
            .map(|e| e.0.max(e.1) as usize + 1)
            .max()
            .unwrap_or(1)
            .max(n);
        for kind in AlgorithmKind::ALL {
            let g = GraphStore::with_vertices(n);
            for &(s, d, w) in &edges {
                g.insert_edge(s, d, w).unwrap();
                if kind.is_undirected() {
                    g.insert_edge(d, s, w).unwrap();
                }
            }
            let algo = AlgorithmDef::new(kind, 0);
            let r = aff_analyze(&g, &algo).unwrap();
            let (sv, se, depth) = aff_by_depths(&g, &algo);
            cases += 1;
            let d1 = depth as u128 + 1;
            let bound_v = sv <= d1 * r.vertices as u128;
            let bound_e = se <= 2 * d1 * r.edges as u128;
            if (r.sum_affv, r.sum_affe, r.tree_depth) != (sv, se, depth)
                || !r.holds()
                || !bound_v
                || !bound_e
            {
                violations.push(format!("graph {i} {kind}"));
            }
        }
    }
    let k = 100u64;
    let star = GraphStore::from_edges(
        k as usize + 1,
        &(1..=k).map(|v| (0, v, 1)).collect::<Vec<_>>(),
    )
    .unwrap();
    let r = aff_analyze(&star, &AlgorithmDef::bfs(0)).unwrap();
    if (r.sum_affv, r.sum_affe, r.tree_depth) != (k as u128, k as u128, 1) || !r.holds() {
        violations.push("star".into());
    }
    let c = 200u64;
    let chain = GraphStore::from_edges(
        c as usize,
        &(0..c - 1).map(|v| (v, v + 1, 1)).collect::<Vec<_>>(),
    )
    .unwrap();
    let r = aff_analyze(&chain, &AlgorithmDef::bfs(0)).unwrap();
    // edge v→v+1 invalidates c-1-v vertices
    let chain_v = (c as u128 - 1) * c as u128 / 2;
    if r.sum_affv != chain_v || r.tree_depth != c - 1 || !r.holds() {
        violations.push("chain".into());
    }
    outcome(
        violations.is_empty(),
        format!(
            "{} cases plus star and chain, {} violations {:?}",
            cases,
            violations.len(),
            violations
        ),
    )
}

// --------------------------------------------------------------------- 10

fn crash_trial(trial: u64) -> Result<String, String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let w = workload(10, 6, 1000 + trial, 4, false);
    let preload = dir.path().join("preload.txt");
    let log = dir.path().join("log");
    write_edge_file(&preload, &w.preload).map_err(|e| e.to_string())?;
    let mut child = Command::new(env!("CARGO_BIN_EXE_incgraph"))
        .args([
            "serve",
            "--algorithm",
            "bfs,sssp",
            "--threads",
            "2",
            "--port",
            "0",
        ])
        .arg("--vertices")
        .arg(w.num_vertices.to_string())
        .arg("--graph")
        .arg(&preload)
        .arg("--wal")
        .arg(&log)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .map_err(|e| e.to_string())?;
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .ok_or(format!("bad banner {line:?}"))?
        .to_string();

    let target = 1000 + ChaCha8Rng::seed_from_u64(trial).gen_range(0..800);
    let acks = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let acked: Mutex<Vec<Update>> = Mutex::new(Vec::new());
    let per_session = w.per_session(4);
    std::thread::scope(|s| {
        for ops in &per_session {
            let (acks, stop, acked, addr) = (&acks, &stop, &acked, &addr);
            s.spawn(move || {
                let Ok(mut c) = Client::connect(addr.as_str()) else {
                    return;
                };
                for u in ops {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let (op, args) = update_to_request(u);
                    match c.write(op, args) {
                        Ok(Ok(_)) => {
                            acked.lock().unwrap().push(u.clone());
                            acks.fetch_add(1, Ordering::Relaxed);
                        }
                        _ => break,
                    }
                }
            });
        }
        while acks.load(Ordering::Relaxed) < target {
            std::thread::sleep(Duration::from_micros(200));
        }
        // SIGKILL while the sessions are still writing
        child.kill().unwrap();
        stop.store(true, Ordering::Relaxed);
    });
    child.wait().map_err(|e| e.to_string())?;

    let records = read_wal(&log).map_err(|e| e.to_string())?.records;
    let acked = acked.into_inner().unwrap();
    let algos = vec![AlgorithmDef::bfs(0), AlgorithmDef::sssp(0)];
    let mut cfg = SystemConfig::new(algos.clone());
    cfg.wal = Some(log.clone());
    let (recovered, report) = System::recover(w.preload_graph().map_err(|e| e.to_string())?, &cfg)
        .map_err(|e| format!("recovery failed: {e}"))?;
    let mut oracle = System::new(
        w.preload_graph().unwrap(),
        &SystemConfig::new(algos.clone()),
    )
    .unwrap();
    for r in &records {
        oracle
            .apply(&r.update)
            .map_err(|e| format!("oracle apply failed: {e}"))?;
    }

    let mut why = Vec::new();
    if report.replayed as usize != records.len() {
        why.push(format!(
            "replayed {} of {} records",
            report.replayed,
            records.len()
        ));
    }
    // every acknowledged update is durable
    let mut logged: BTreeMap<String, i64> = BTreeMap::new();
    for r in &records {
        *logged.entry(format!("{:?}", r.update)).or_default() += 1;
    }
    for u in &acked {
        *logged.entry(format!("{u:?}")).or_default() -= 1;
    }
    if logged.values().any(|&c| c < 0) || records.len() < acked.len() {
        why.push(format!(
            "{} acknowledged but only {} logged",
            acked.len(),
            records.len()
        ));
    }
    if recovered.graph().edge_multiset() != oracle.graph().edge_multiset() {
        why.push("graph differs".into());
    }
    for (a, algo) in algos.iter().enumerate() {
        let state = recovered.state(a).unwrap();
        if state.values != oracle.state(a).unwrap().values
            || state.values != full_recompute(recovered.graph(), algo).unwrap().values
        {
            why.push(format!("{} values differ", algo.kind));
        }
    }
    if why.is_empty() {
        Ok(format!("{} acked/{} logged", acked.len(), records.len()))
    } else {
        Err(why.join(", "))
    }
}

fn crash_recovery() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for trial in 0..10 {
        match crash_trial(trial) {
            Ok(d) => details.push(d),
            Err(e) => {
                pass = false;
                details.push(format!("trial {trial} FAILED: {e}"));
            }
        }
    }
    outcome(pass, details.join("; "))
}

// --------------------------------------------------------------------- 11

fn latency_compliance() -> Outcome {
    let w = workload(14, 8, 11, 8, false);
    let mut cfg = SystemConfig::new(vec![AlgorithmDef::bfs(0)]);
    cfg.threads = workers();
    let coord = Coordinator::start(
        System::new(w.preload_graph().unwrap(), &cfg).unwrap(),
        CoordinatorConfig::default(),
    );
    let m = run_in_process(
        &coord,
        &w,
        &BenchConfig {
            duration: Some(Duration::from_secs(60)),
            max_ops: None,
            latency_limit: Duration::from_millis(20),
        },
    );
    let within = m.within_limit_fraction();
    outcome(
        within >= 0.99 && m.errors == 0 && m.elapsed >= Duration::from_secs(60),
        format!(
            "{} updates in {:.1}s, {:.4} within 20 ms, p999 {:?}, {} errors",
            m.ops,
            m.elapsed.as_secs_f64(),
            within,
            m.p999,
            m.errors
        ),
    )
}

// -------------------------------------------------------------------------

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));
    // silence the default hook; failures are reported per criterion
    std::panic::set_hook(Box::new(|info| eprintln!("panic: {info}")));

    let t = Instant::now();
    let oracle = if (1..=3).any(wanted) {
        catch_unwind(oracle_runs).ok()
    } else {
        None
    };
    if oracle.is_some() {
        println!(
            "shared oracle run for criteria 1-3: {:.1}s",
            t.elapsed().as_secs_f64()
        );
    }
    let oracle = &oracle;
    let from_oracle = move |owns: fn(&DivergenceKind) -> bool| -> Box<dyn Fn() -> Outcome> {
        Box::new(move || match oracle {
            Some(runs) => judge_oracle(runs, owns),
            None => outcome(false, "oracle run panicked"),
        })
    };
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "oracle equivalence",
            from_oracle(|k| {
                matches!(
                    k,
                    DivergenceKind::ValueMismatch { .. } | DivergenceKind::ApplyFailed(_)
                )
            }),
        ),
        (
            2,
            "fixpoint validity",
            from_oracle(|k| matches!(k, DivergenceKind::InvalidState { .. })),
        ),
        (
            3,
            "safe no-op and classification soundness",
            from_oracle(|k| {
                matches!(
                    k,
                    DivergenceKind::SafeChangedState { .. } | DivergenceKind::UnsafeChangedNothing
                )
            }),
        ),
        (
            4,
            "serial equivalence under concurrency",
            Box::new(serial_equivalence),
        ),
        (5, "graph store oracle", Box::new(graph_store_oracle)),
        (6, "history fidelity", Box::new(history_fidelity)),
        (7, "scheduler behavior", Box::new(scheduler_constants)),
        (
            8,
            "inter-update parallelism effect",
            Box::new(parallelism_effect),
        ),
        (9, "affected-area bounds", Box::new(aff_bounds)),
        (10, "crash recovery", Box::new(crash_recovery)),
        (11, "latency compliance", Box::new(latency_compliance)),
    ];

    let mut failed = Vec::new();
    for (n, name, run) in &criteria {
        if !wanted(*n) {
            continue;
        }
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| outcome(false, "panicked"));
        println!(
            "criterion {n:>2} {name}: {} ({:.1}s) {}",
            if r.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            r.detail
        );
        if !r.pass {
            failed.push(*n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
