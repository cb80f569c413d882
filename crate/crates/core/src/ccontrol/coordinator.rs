//! The epoch loop.
//!
//! Each epoch has two phases. In the safe phase every session's queue is
//! drained in order on the worker pool, applying safe updates in place. The
//! first update of a session that is unsafe, or that changes the vertex
//! table, moves to a FIFO queue and blocks the rest of that session until
//! the next epoch. The scheduler decides when to stop the safe phase. The
//! FIFO queue then runs serially through [`System::apply`].
//!
//! Replies are sent only after the log is synced for the phase that
//! committed them.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use super::system::{SafeOutcome, System};
use super::{Applied, Class, EpochReport, Update};
use crate::algorithms::Value;
use crate::engine::Parent;
use crate::error::{Error, Result};
use crate::graph_store::VertexId;
use crate::history::{History, SessionId, VersionId};
use crate::scheduler::{Scheduler, SchedulerConfig};

#[derive(Debug, Clone)]
pub struct CoordinatorConfig {
    pub scheduler: SchedulerConfig,
    /// False runs a single executor that commits and syncs one update at a
    /// time, in arrival order per session.
    pub epoch_loop: bool,
    pub reclaim_period: Duration,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        CoordinatorConfig {
            scheduler: SchedulerConfig::default(),
            epoch_loop: true,
            reclaim_period: Duration::from_secs(1),
        }
    }
}

#[derive(Debug)]
pub struct Reply {
    pub result: Result<Applied>,
    /// Enqueue-to-reply time.
    pub latency: Duration,
    /// Whether the update waited behind an unsafe update of its session.
    pub deferred: bool,
}

struct Envelope {
    session: SessionId,
    update: Update,
    enqueue: Instant,
    reply: Sender<Reply>,
    deferred: bool,
}

enum Msg {
    Submit(Envelope),
    Shutdown,
}

#[derive(Debug, Clone, Default)]
pub struct CoordinatorStats {
    pub epochs: u64,
    pub safe: u64,
    pub unsafe_: u64,
    pub deferred: u64,
    pub threshold_trace: Vec<f64>,
}

pub struct Coordinator {
    tx: Sender<Msg>,
    handle: Option<JoinHandle<System>>,
    history: Arc<RwLock<History>>,
    next_session: Arc<AtomicU64>,
    open_sessions: Arc<AtomicUsize>,
    stats: Arc<Mutex<CoordinatorStats>>,
    algos: usize,
}

impl Coordinator {
    pub fn start(system: System, config: CoordinatorConfig) -> Self {
        let (tx, rx) = crossbeam_channel::unbounded();
        let history = system.history().clone();
        let algos = system.engines().len();
        let stats = Arc::new(Mutex::new(CoordinatorStats::default()));
        let loop_stats = stats.clone();
        let open_sessions = Arc::new(AtomicUsize::new(0));
        let loop_open = open_sessions.clone();
        let handle = std::thread::Builder::new()
            .name("incgraph-epoch".into())
            .spawn(move || EpochLoop::new(system, rx, config, loop_stats, loop_open).run())
            .expect("failed to spawn epoch loop");
        Coordinator {
            tx,
            handle: Some(handle),
            history,
            next_session: Arc::new(AtomicU64::new(1)),
            open_sessions,
            stats,
            algos,
        }
    }

    pub fn open_session(&self) -> Session {
        let id = self.next_session.fetch_add(1, Ordering::Relaxed);
        self.history.write().register_session(id);
        self.open_sessions.fetch_add(1, Ordering::SeqCst);
        Session {
            id,
            tx: self.tx.clone(),
            history: self.history.clone(),
            open_sessions: self.open_sessions.clone(),
            algos: self.algos,
        }
    }

    pub fn history(&self) -> &Arc<RwLock<History>> {
        &self.history
    }

    pub fn stats(&self) -> CoordinatorStats {
        self.stats.lock().clone()
    }

    /// Finishes queued work and returns the system.
    pub fn shutdown(mut self) -> System {
        self.stop().expect("epoch loop already stopped")
    }

    fn stop(&mut self) -> Option<System> {
        let handle = self.handle.take()?;
        let _ = self.tx.send(Msg::Shutdown);
        Some(handle.join().expect("epoch loop panicked"))
    }
}

impl Drop for Coordinator {
    fn drop(&mut self) {
        self.stop();
    }
}

/// A client's ordered stream of updates. Reads go straight to history.
pub struct Session {
    id: SessionId,
    tx: Sender<Msg>,
    history: Arc<RwLock<History>>,
    open_sessions: Arc<AtomicUsize>,
    algos: usize,
}

impl Session {
    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn submit(&self, update: Update) -> Result<Receiver<Reply>> {
        let (reply, rx) = crossbeam_channel::bounded(1);
        self.tx
            .send(Msg::Submit(Envelope {
                session: self.id,
                update,
                enqueue: Instant::now(),
                reply,
                deferred: false,
            }))
            .map_err(|_| Error::Shutdown)?;
        Ok(rx)
    }

    /// Submits and waits for the reply.
    pub fn call(&self, update: Update) -> Result<Applied> {
        self.call_with_latency(update).map(|r| r.0)
    }

    pub fn call_with_latency(&self, update: Update) -> Result<(Applied, Duration, bool)> {
        let r = self.submit(update)?.recv().map_err(|_| Error::Shutdown)?;
        r.result.map(|a| (a, r.latency, r.deferred))
    }

    pub fn num_algorithms(&self) -> usize {
        self.algos
    }

    pub fn current_version(&self) -> VersionId {
        self.history.read().current()
    }

    pub fn get_value(&self, version: VersionId, algo: usize, v: VertexId) -> Result<Value> {
        self.history.read().get_value(version, algo, v)
    }

    pub fn get_parent(
        &self,
        version: VersionId,
        algo: usize,
        v: VertexId,
    ) -> Result<Option<Parent>> {
        self.history.read().get_parent(version, algo, v)
    }

    pub fn get_modified_vertices(&self, version: VersionId, algo: usize) -> Result<Vec<VertexId>> {
        self.history.read().get_modified_vertices(version, algo)
    }

    pub fn release_history(&self, version: VersionId) -> Result<()> {
        self.history.write().release(self.id, version)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.history.write().unregister_session(self.id);
        self.open_sessions.fetch_sub(1, Ordering::SeqCst);
    }
}

struct EpochLoop {
    sys: System,
    rx: Receiver<Msg>,
    config: CoordinatorConfig,
    sched: Scheduler,
    queues: FxHashMap<SessionId, VecDeque<Envelope>>,
    stats: Arc<Mutex<CoordinatorStats>>,
    /// Sessions that can still submit; when all are blocked, waiting for
    /// the trigger cannot admit any more safe work.
    open_sessions: Arc<AtomicUsize>,
    shutting_down: bool,
    last_reclaim: Instant,
}

type Done = (Envelope, Result<Applied>);

/// A session's leftover queue, finished updates and the update that blocked it.
type SessionPass = (SessionId, VecDeque<Envelope>, Vec<Done>, Option<Envelope>);

impl EpochLoop {
    fn new(
        sys: System,
        rx: Receiver<Msg>,
        config: CoordinatorConfig,
        stats: Arc<Mutex<CoordinatorStats>>,
        open_sessions: Arc<AtomicUsize>,
    ) -> Self {
        let sched = Scheduler::new(config.scheduler, sys.threads());
        EpochLoop {
            sys,
            rx,
            config,
            sched,
            queues: FxHashMap::default(),
            stats,
            open_sessions,
            shutting_down: false,
            last_reclaim: Instant::now(),
        }
    }

    fn run(mut self) -> System {
        loop {
            if self.pending() == 0 {
                if self.shutting_down {
                    break;
                }
                match self.rx.recv_timeout(self.config.reclaim_period) {
                    Ok(m) => self.accept(m),
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            }
            self.drain_inbox();
            if self.pending() > 0 {
                if self.config.epoch_loop {
                    self.run_epoch();
                } else {
                    self.run_serial();
                }
            }
            if self.last_reclaim.elapsed() >= self.config.reclaim_period {
                self.sys.history().write().reclaim_tick();
                self.last_reclaim = Instant::now();
            }
        }
        self.sys
    }

    fn all_blocked(&self, blocked: &FxHashSet<SessionId>) -> bool {
        blocked.len() >= self.open_sessions.load(Ordering::SeqCst)
    }

    fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    fn accept(&mut self, m: Msg) {
        match m {
            Msg::Submit(env) => self.queues.entry(env.session).or_default().push_back(env),
            Msg::Shutdown => self.shutting_down = true,
        }
    }

    fn drain_inbox(&mut self) {
        while let Ok(m) = self.rx.try_recv() {
            self.accept(m);
        }
    }

    fn reply(&self, done: Vec<Done>, report: &mut EpochReport) {
        if let Err(e) = self.sys.sync_wal() {
            tracing::error!(error = %e, "log sync failed; failing the phase's replies");
            for (env, _) in done {
                let latency = env.enqueue.elapsed();
                let _ = env.reply.send(Reply {
                    result: Err(e.clone()),
                    latency,
                    deferred: env.deferred,
                });
            }
            return;
        }
        for (env, result) in done {
            let latency = env.enqueue.elapsed();
            report.latencies.push(latency);
            let _ = env.reply.send(Reply {
                result,
                latency,
                deferred: env.deferred,
            });
        }
    }

    fn run_epoch(&mut self) {
        let start = Instant::now();
        let mut report = EpochReport::default();
        let mut fifo: VecDeque<Envelope> = VecDeque::new();
        let mut blocked: FxHashSet<SessionId> = FxHashSet::default();

        loop {
            let runnable: Vec<SessionId> = self
                .queues
                .iter()
                .filter(|(s, q)| !q.is_empty() && !blocked.contains(s))
                .map(|(&s, _)| s)
                .collect();
            if runnable.is_empty() {
                let Some(oldest) = fifo.front().map(|e| e.enqueue) else {
                    break;
                };
                if self.all_blocked(&blocked)
                    || self.sched.should_start_unsafe_phase(
                        Instant::now(),
                        Some(oldest),
                        fifo.len(),
                    )
                {
                    break;
                }
                // wait for safe work from unblocked sessions until the trigger
                match self.rx.recv_deadline(self.sched.trigger_deadline(oldest)) {
                    Ok(m) => {
                        self.accept(m);
                        self.drain_inbox();
                        continue;
                    }
                    Err(_) => break,
                }
            }
            let work: Vec<(SessionId, VecDeque<Envelope>)> = runnable
                .into_iter()
                .map(|s| (s, self.queues.remove(&s).unwrap_or_default()))
                .collect();
            let sys = &self.sys;
            let results: Vec<SessionPass> = sys.pool().install(|| {
                work.into_par_iter()
                    .map(|(sid, mut q)| {
                        let mut done = Vec::new();
                        let mut stopper = None;
                        while let Some(env) = q.pop_front() {
                            match sys.try_apply_safe(&env.update) {
                                Ok(SafeOutcome::Applied(a)) => done.push((env, Ok(a))),
                                Ok(SafeOutcome::Unsafe | SafeOutcome::Serial) => {
                                    stopper = Some(env);
                                    break;
                                }
                                Err(e) => done.push((env, Err(e))),
                            }
                        }
                        (sid, q, done, stopper)
                    })
                    .collect()
            });
            let mut done_all = Vec::new();
            let mut stoppers = Vec::new();
            for (sid, q, done, stopper) in results {
                if !q.is_empty() {
                    self.queues.insert(sid, q);
                }
                if let Some(env) = stopper {
                    blocked.insert(sid);
                    stoppers.push(env);
                }
                report.safe_count += done.len() as u64;
                done_all.extend(done);
            }
            stoppers.sort_by_key(|e| e.enqueue);
            fifo.extend(stoppers);
            self.reply(done_all, &mut report);
            self.drain_inbox();
            if let Some(oldest) = fifo.front().map(|e| e.enqueue) {
                if self
                    .sched
                    .should_start_unsafe_phase(Instant::now(), Some(oldest), fifo.len())
                {
                    break;
                }
            }
        }

        for sid in &blocked {
            if let Some(q) = self.queues.get_mut(sid) {
                for env in q.iter_mut() {
                    env.deferred = true;
                }
                report.deferred_count += q.len() as u64;
            }
        }

        let mut done = Vec::with_capacity(fifo.len());
        for env in fifo {
            let result = self.sys.apply(&env.update);
            match &result {
                Ok(a) if a.class == Class::Unsafe => report.unsafe_count += 1,
                _ => report.safe_count += 1,
            }
            done.push((env, result));
        }
        self.reply(done, &mut report);

        self.queues.retain(|_, q| !q.is_empty());
        report.epoch_wall_time = start.elapsed();
        self.sched.on_epoch_complete(&report);
        let mut st = self.stats.lock();
        st.epochs += 1;
        st.safe += report.safe_count;
        st.unsafe_ += report.unsafe_count;
        st.deferred += report.deferred_count;
        if st.threshold_trace.len() < self.sched.trace().len() {
            st.threshold_trace = self.sched.trace().to_vec();
        }
    }

    fn run_serial(&mut self) {
        let sessions: Vec<SessionId> = self.queues.keys().copied().collect();
        let mut report = EpochReport::default();
        for sid in sessions {
            let Some(mut q) = self.queues.remove(&sid) else {
                continue;
            };
            while let Some(env) = q.pop_front() {
                let result = self.sys.apply(&env.update);
                match &result {
                    Ok(a) if a.class == Class::Unsafe => report.unsafe_count += 1,
                    _ => report.safe_count += 1,
                }
                self.reply(vec![(env, result)], &mut report);
            }
        }
        let mut st = self.stats.lock();
        st.epochs += 1;
        st.safe += report.safe_count;
        st.unsafe_ += report.unsafe_count;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::AlgorithmDef;
    use crate::ccontrol::SystemConfig;
    use crate::graph_store::GraphStore;

    fn coordinator(epoch_loop: bool) -> Coordinator {
        let g = GraphStore::from_edges(6, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1)]).unwrap();
        let mut cfg = SystemConfig::new(vec![AlgorithmDef::bfs(0)]);
        cfg.threads = 2;
        let sys = System::new(g, &cfg).unwrap();
        Coordinator::start(
            sys,
            CoordinatorConfig {
                epoch_loop,
                ..CoordinatorConfig::default()
            },
        )
    }

    #[test]
    fn safe_then_unsafe_then_safe_in_one_session() {
        let c = coordinator(true);
        let s = c.open_session();
        let r1 = s.submit(Update::ins(1, 3, 1)).unwrap();
        let r2 = s.submit(Update::del(1, 2, 1)).unwrap();
        let r3 = s.submit(Update::ins(1, 3, 1)).unwrap();
        let a1 = r1.recv().unwrap();
        let a2 = r2.recv().unwrap();
        let a3 = r3.recv().unwrap();
        assert_eq!(a1.result.unwrap().class, Class::Safe);
        let a2 = a2.result.unwrap();
        assert_eq!((a2.class, a2.version), (Class::Unsafe, 1));
        assert_eq!(a3.result.unwrap().version, 1);
        assert_eq!(s.get_value(1, 0, 2).unwrap(), u64::MAX);
        assert_eq!(s.get_value(0, 0, 2).unwrap(), 2);
        let sys = c.shutdown();
        assert_eq!(sys.graph().lookup_count(1, 3, 1).unwrap(), 2);
    }

    #[test]
    fn two_unsafe_sessions_get_distinct_versions() {
        let c = coordinator(true);
        let a = c.open_session();
        let b = c.open_session();
        let ra = a.submit(Update::ins(0, 2, 1)).unwrap();
        let rb = b.submit(Update::del(0, 3, 1)).unwrap();
        let mut vs = vec![
            ra.recv().unwrap().result.unwrap().version,
            rb.recv().unwrap().result.unwrap().version,
        ];
        vs.sort();
        assert_eq!(vs, vec![1, 2]);
    }

    #[test]
    fn all_sessions_blocked_starts_unsafe_phase_early() {
        let g = GraphStore::from_edges(4, &[(0, 1, 1), (1, 2, 1)]).unwrap();
        let sys = System::new(g, &SystemConfig::new(vec![AlgorithmDef::bfs(0)])).unwrap();
        let mut config = CoordinatorConfig::default();
        config.scheduler.latency_limit = Duration::from_secs(5);
        let c = Coordinator::start(sys, config);
        let s = c.open_session();
        // with the waiting trigger at 4 s, only the blocked-session rule fires
        let (a, latency, _) = s.call_with_latency(Update::del(1, 2, 1)).unwrap();
        assert_eq!(a.class, Class::Unsafe);
        assert!(latency < Duration::from_secs(2), "{latency:?}");
    }

    #[test]
    fn errors_are_replied() {
        let c = coordinator(true);
        let s = c.open_session();
        assert_eq!(
            s.call(Update::del(5, 4, 0)),
            Err(Error::EdgeNotFound {
                src: 5,
                dst: 4,
                weight: 0
            })
        );
        assert_eq!(s.call(Update::InsVertex).unwrap().new_vertices, vec![6]);
    }

    #[test]
    fn serial_baseline_commits_in_order() {
        let c = coordinator(false);
        let s = c.open_session();
        assert_eq!(s.call(Update::del(1, 2, 1)).unwrap().version, 1);
        assert_eq!(s.call(Update::ins(1, 2, 1)).unwrap().version, 2);
        let sys = c.shutdown();
        assert_eq!(sys.values(0).unwrap(), vec![0, 1, 2, 1, u64::MAX, u64::MAX]);
    }
}
