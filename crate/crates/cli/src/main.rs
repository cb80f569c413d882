use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use incgraph::bench::fit::{benchmark_modes, fit_linear_boundary};
use incgraph::bench::io::{read_edge_file, vertex_count, write_edge_file};
use incgraph::bench::runner::{run_in_process, run_tcp, BenchConfig};
use incgraph::bench::workload::format_updates;
use incgraph::bench::{
    aff_analyze, gen_workload, rmat_edges, verify, Edge, Workload, WorkloadSpec,
};
use incgraph::ccontrol::{Coordinator, CoordinatorConfig};
use incgraph::engine::{EngineOptions, ModePolicy, ParallelModeModel};
use incgraph::scheduler::SchedulerConfig;
use incgraph::wal::FsyncPolicy;
use incgraph::{AlgorithmDef, AlgorithmKind, GraphStore, System, SystemConfig};

#[derive(Parser)]
#[command(
    name = "incgraph",
    version,
    about = "Streaming graph engine for monotonic algorithms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the line protocol over TCP.
    Serve(ServeArgs),
    /// Closed-loop throughput and latency benchmark.
    Bench(BenchArgs),
    /// Check every update against from-scratch recomputation.
    Verify(VerifyArgs),
    /// Affected-area analysis with exact bound checks.
    Aff(AffArgs),
    /// Micro-benchmark both push modes and fit the mode boundary.
    FitModeModel(FitArgs),
    /// Write a workload file and its preload edge file.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Vertex,
    Edge,
    Hybrid,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Edge file: text `src dst [weight]` or `.bin` triples.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Generate an R-MAT graph with 2^scale vertices instead.
    #[arg(long, default_value_t = 14)]
    rmat_scale: u32,
    /// Average out-degree of the generated graph.
    #[arg(long, default_value_t = 8)]
    avg_degree: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl GraphArgs {
    fn load(&self) -> Result<(usize, Vec<Edge>)> {
        match &self.graph {
            Some(p) => {
                let e = read_edge_file(p).with_context(|| format!("reading {}", p.display()))?;
                Ok((vertex_count(&e), e))
            }
            None => {
                let n = 1usize << self.rmat_scale;
                Ok((
                    n,
                    rmat_edges(self.rmat_scale, n * self.avg_degree, self.seed),
                ))
            }
        }
    }
}

#[derive(Args, Clone)]
struct AlgoArgs {
    /// Algorithms to maintain, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "bfs")]
    algorithm: Vec<AlgorithmKind>,
    #[arg(long, default_value_t = 0)]
    root: u64,
}

impl AlgoArgs {
    fn defs(&self) -> Vec<AlgorithmDef> {
        self.algorithm
            .iter()
            .map(|&k| AlgorithmDef::new(k, self.root))
            .collect()
    }

    fn undirected(&self) -> bool {
        self.algorithm.iter().any(|k| k.is_undirected())
    }
}

#[derive(Args, Clone)]
struct EngineArgs {
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Hybrid)]
    mode: ModeArg,
    /// Mode model file `a b c`; without it hybrid mode uses a fixed heuristic.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl EngineArgs {
    fn options(&self) -> Result<EngineOptions> {
        let mode = match (self.mode, &self.model) {
            (ModeArg::Vertex, _) => ModePolicy::Vertex,
            (ModeArg::Edge, _) => ModePolicy::Edge,
            (ModeArg::Hybrid, Some(p)) => ModePolicy::Hybrid(ParallelModeModel::load(p)?),
            (ModeArg::Hybrid, None) => ModePolicy::Heuristic {
                workers: self.threads,
            },
        };
        Ok(EngineOptions {
            mode,
            ..EngineOptions::default()
        })
    }
}

#[derive(Args, Clone)]
struct SchedArgs {
    #[arg(long, default_value_t = 20)]
    latency_ms: u64,
    /// Fraction of updates that should meet the latency limit.
    #[arg(long, default_value_t = 0.999)]
    target_percentile: f64,
}

impl SchedArgs {
    fn config(&self) -> Result<SchedulerConfig> {
        let c = SchedulerConfig {
            latency_limit: Duration::from_millis(self.latency_ms),
            target_fraction: self.target_percentile,
            ..SchedulerConfig::default()
        };
        c.validate().map_err(anyhow::Error::msg)?;
        Ok(c)
    }
}

#[derive(Args)]
struct ServeArgs {
    /// Base graph; the log is replayed on top of it.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Minimum vertex count of the base graph.
    #[arg(long, default_value_t = 0)]
    vertices: usize,
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    sched: SchedArgs,
    #[arg(long)]
    wal: Option<PathBuf>,
    #[arg(long, default_value = "every-epoch-phase")]
    fsync: FsyncPolicy,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 7878)]
    port: u16,
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long, default_value_t = 0.9)]
    preload: f64,
    #[arg(long, default_value_t = 0.5)]
    insert_ratio: f64,
    /// Treat the edge file order as time order.
    #[arg(long)]
    timestamped: bool,
    #[arg(long, default_value_t = 8)]
    sessions: usize,
    #[arg(long, default_value_t = 1)]
    txn_size: usize,
    #[arg(long, default_value_t = 7)]
    workload_seed: u64,
}

impl WorkloadArgs {
    fn build(&self, n: usize, edges: &[Edge], undirected: bool) -> Workload {
        gen_workload(
            n,
            edges,
            &WorkloadSpec {
                preload_fraction: self.preload,
                insert_ratio: self.insert_ratio,
                timestamped: self.timestamped,
                seed: self.workload_seed,
                session_count: self.sessions,
                txn_size: self.txn_size,
                undirected,
            },
        )
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    sched: SchedArgs,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[arg(long, default_value_t = 10)]
    duration_secs: u64,
    #[arg(long)]
    max_ops: Option<usize>,
    /// Run the single-executor baseline instead of the epoch loop.
    #[arg(long)]
    no_epoch_loop: bool,
    /// Metrics CSV output.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Drive a running server instead of an in-process engine. The server
    /// must already hold the preload.
    #[arg(long)]
    connect: Option<SocketAddr>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[arg(long, default_value_t = 10_000)]
    updates: usize,
    /// Disable the trim phase of deletions.
    #[arg(long)]
    no_trim: bool,
}

#[derive(Args)]
struct AffArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    algo: AlgoArgs,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    #[arg(long, default_value_t = 2_000_000)]
    max_edges: u64,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = "mode_model.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Emit both directions of every edge.
    #[arg(long)]
    undirected: bool,
    #[arg(long, default_value_t = 0)]
    updates: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    preload_out: PathBuf,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve(a) => serve(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Aff(a) => aff(a),
        Command::FitModeModel(a) => fit(a),
        Command::Gen(a) => gen(a),
    }
}

fn system_config(algo: &AlgoArgs, engine: &EngineArgs) -> Result<SystemConfig> {
    let mut cfg = SystemConfig::new(algo.defs());
    cfg.threads = engine.threads.max(1);
    cfg.engine = engine.options()?;
    Ok(cfg)
}

fn serve(a: ServeArgs) -> Result<()> {
    let edges = match &a.graph {
        Some(p) => read_edge_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let n = vertex_count(&edges).max(a.vertices);
    let mut base = GraphStore::with_vertices(n);
    for &(s, d, w) in &edges {
        base.insert_edge(s, d, w)?;
        if a.algo.undirected() {
            base.insert_edge(d, s, w)?;
        }
    }
    base.compact();
    let mut cfg = system_config(&a.algo, &a.engine)?;
    cfg.wal = a.wal.clone();
    cfg.fsync = a.fsync;
    let (system, report) = System::recover(base, &cfg)?;
    tracing::info!(
        replayed = report.replayed,
        torn_tail = report.torn_tail,
        "state ready"
    );
    let coord = Arc::new(Coordinator::start(
        system,
        CoordinatorConfig {
            scheduler: a.sched.config()?,
            ..CoordinatorConfig::default()
        },
    ));
    let handle = incgraph::server::spawn(coord, (a.host.as_str(), a.port))?;
    println!("listening on {}", handle.local_addr());
    std::io::stdout().flush()?;
    handle.join();
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let (n, edges) = a.graph.load()?;
    let workload = a.workload.build(n, &edges, a.algo.undirected());
    let cfg = BenchConfig {
        duration: Some(Duration::from_secs(a.duration_secs)),
        max_ops: a.max_ops,
        latency_limit: Duration::from_millis(a.sched.latency_ms),
    };
    let metrics = if let Some(addr) = a.connect {
        run_tcp(addr, &workload, &cfg)
    } else {
        let sys = System::new(
            workload.preload_graph()?,
            &system_config(&a.algo, &a.engine)?,
        )?;
        let coord = Coordinator::start(
            sys,
            CoordinatorConfig {
                scheduler: a.sched.config()?,
                epoch_loop: !a.no_epoch_loop,
                ..CoordinatorConfig::default()
            },
        );
        let m = run_in_process(&coord, &workload, &cfg);
        let st = coord.stats();
        println!(
            "epochs {} safe {} unsafe {} deferred {}",
            st.epochs, st.safe, st.unsafe_, st.deferred
        );
        m
    };
    println!("{}", metrics.summary());
    if let Some(p) = &a.csv {
        metrics.write_csv(p)?;
    }
    Ok(())
}

fn verify_cmd(a: VerifyArgs) -> Result<()> {
    let (n, edges) = a.graph.load()?;
    let workload = a.workload.build(n, &edges, a.algo.undirected());
    let mut cfg = system_config(&a.algo, &a.engine)?;
    cfg.engine.trim = !a.no_trim;
    let mut sys = System::new(workload.preload_graph()?, &cfg)?;
    let ops = workload.cycled(a.updates).into_iter().map(|o| o.update);
    let r = verify(&mut sys, ops);
    println!("updates {} safe {} unsafe {}", r.updates, r.safe, r.unsafe_);
    match r.failure {
        None => {
            println!("PASS");
            Ok(())
        }
        Some(d) => {
            println!("FAIL at update {}: {:?}", d.index, d.update);
            println!("  {:?}", d.kind);
            bail!("verification failed")
        }
    }
}

fn aff(a: AffArgs) -> Result<()> {
    let (n, edges) = a.graph.load()?;
    let g = GraphStore::with_vertices(n);
    for &(s, d, w) in &edges {
        g.insert_edge(s, d, w)?;
        if a.algo.undirected() {
            g.insert_edge(d, s, w)?;
        }
    }
    let mut ok = true;
    for def in a.algo.defs() {
        let r = aff_analyze(&g, &def)?;
        println!(
            "{}: |V| {} |E| {} depth {} mean_degree {:.3} mean_affv {:.4} <= {:.4} [{}] mean_affe {:.4} <= {:.4} [{}]",
            def.kind,
            r.vertices,
            r.edges,
            r.tree_depth,
            r.mean_degree,
            r.mean_affv,
            r.bound_v,
            if r.holds_v { "ok" } else { "VIOLATED" },
            r.mean_affe,
            r.bound_e,
            if r.holds_e { "ok" } else { "VIOLATED" },
        );
        ok &= r.holds();
    }
    if !ok {
        bail!("affected-area bound violated");
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let actives = [1u64, 2, 4, 16, 64, 256, 1024, 4096, 16384, 65536];
    let degrees = [1u64, 4, 16, 64, 256, 1024, 4096, 16384];
    let samples = benchmark_modes(a.threads, &actives, &degrees, a.max_edges, a.reps, 1)?;
    for s in &samples {
        println!(
            "x {:>6} y {:>8} vertex {:>10.1?} edge {:>10.1?} {}",
            s.active,
            s.degree_sum,
            s.vertex_time,
            s.edge_time,
            if s.edge_faster() { "edge" } else { "vertex" }
        );
    }
    let r = fit_linear_boundary(&samples);
    if !r.fitted {
        println!("samples do not separate the modes; writing the default model");
    } else {
        println!("training accuracy {:.3}", r.training_accuracy);
    }
    r.model.save(&a.out)?;
    println!("model {} -> {}", r.model, a.out.display());
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let (n, edges) = a.graph.load()?;
    let w = a.workload.build(n, &edges, a.undirected);
    let count = if a.updates == 0 {
        w.stream.len()
    } else {
        a.updates
    };
    let ops = w.cycled(count);
    std::fs::write(&a.out, format_updates(ops.iter().map(|o| &o.update)))?;
    write_edge_file(&a.preload_out, &w.preload)?;
    println!(
        "{} updates -> {}, {} preload edges -> {}",
        ops.len(),
        a.out.display(),
        w.preload.len(),
        a.preload_out.display()
    );
    Ok(())
}
