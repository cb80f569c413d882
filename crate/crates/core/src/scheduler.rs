use std::time::{Duration, Instant};

use crate::ccontrol::EpochReport;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub latency_limit: Duration,
    /// Fraction of updates that should finish within `latency_limit`.
    pub target_fraction: f64,
    /// The unsafe phase starts once the oldest unsafe update has waited this
    /// fraction of `latency_limit`.
    pub trigger_fraction: f64,
    pub adjust_period_epochs: u32,
    pub increase_rate: f64,
    pub decrease_rate: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            latency_limit: Duration::from_millis(20),
            target_fraction: 0.999,
            trigger_fraction: 0.8,
            adjust_period_epochs: 3,
            increase_rate: 0.01,
            decrease_rate: 0.10,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.trigger_fraction > 0.0 && self.trigger_fraction < 1.0) {
            return Err(format!(
                "trigger fraction {} not in (0,1)",
                self.trigger_fraction
            ));
        }
        for (name, r) in [
            ("increase", self.increase_rate),
            ("decrease", self.decrease_rate),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return Err(format!("{name} rate {r} not in (0,1)"));
            }
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(format!(
                "target fraction {} not in (0,1]",
                self.target_fraction
            ));
        }
        if self.adjust_period_epochs == 0 {
            return Err("adjust period must be at least one epoch".into());
        }
        Ok(())
    }
}

/// Decides when to leave the safe phase. The queue-length threshold adapts
/// to the observed fraction of updates that met the latency limit.
#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    /// Always ≥ 1; compared against queue length by ceiling.
    threshold: f64,
    epochs_since_adjust: u32,
    window_qualified: u64,
    window_total: u64,
    trace: Vec<f64>,
}

impl Scheduler {
    /// The threshold starts at the worker count.
    pub fn new(config: SchedulerConfig, workers: usize) -> Self {
        Scheduler {
            config,
            threshold: workers.max(1) as f64,
            epochs_since_adjust: 0,
            window_qualified: 0,
            window_total: 0,
            trace: Vec::new(),
        }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Threshold after each adjustment, oldest first.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn should_start_unsafe_phase(
        &self,
        now: Instant,
        oldest_enqueue: Option<Instant>,
        queue_len: usize,
    ) -> bool {
        let Some(oldest) = oldest_enqueue else {
            return false;
        };
        if queue_len == 0 {
            return false;
        }
        let waited = now.saturating_duration_since(oldest);
        waited
            >= self
                .config
                .latency_limit
                .mul_f64(self.config.trigger_fraction)
            || queue_len as f64 >= self.threshold.ceil()
    }

    /// Time at which the oldest unsafe update reaches the waiting trigger.
    pub fn trigger_deadline(&self, oldest_enqueue: Instant) -> Instant {
        oldest_enqueue
            + self
                .config
                .latency_limit
                .mul_f64(self.config.trigger_fraction)
    }

    pub fn on_epoch_complete(&mut self, report: &EpochReport) {
        let limit = self.config.latency_limit;
        self.window_total += report.latencies.len() as u64;
        self.window_qualified += report.latencies.iter().filter(|&&l| l <= limit).count() as u64;
        self.epochs_since_adjust += 1;
        if self.epochs_since_adjust < self.config.adjust_period_epochs {
            return;
        }
        // an empty window carries no evidence either way
        if self.window_total > 0 {
            let fraction = self.window_qualified as f64 / self.window_total as f64;
            if fraction >= self.config.target_fraction {
                self.threshold *= 1.0 + self.config.increase_rate;
            } else {
                self.threshold *= 1.0 - self.config.decrease_rate;
            }
            self.threshold = self.threshold.max(1.0);
            self.trace.push(self.threshold);
        }
        self.epochs_since_adjust = 0;
        self.window_qualified = 0;
        self.window_total = 0;
    }
}
