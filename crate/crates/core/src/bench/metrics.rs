use std::io::Write;
use std::path::Path;
use std::time::Duration;

use crate::error::Result;

/// P999 is not reported for runs shorter than this.
pub const MIN_OPS_FOR_P999: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Completion time since the run started.
    pub ts: Duration,
    pub op_index: u64,
    pub class: &'static str,
    pub latency: Duration,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub ops: usize,
    pub errors: usize,
    pub elapsed: Duration,
    pub throughput: f64,
    pub mean_latency: Duration,
    /// Exact 99.9th percentile; `None` below [`MIN_OPS_FOR_P999`] samples.
    pub p999: Option<Duration>,
    pub latency_limit: Duration,
    /// Fraction of updates slower than `latency_limit`.
    pub timeout_fraction: f64,
    pub threshold_trace: Vec<f64>,
    pub samples: Vec<Sample>,
    /// Set when a connection or session failed before the run finished.
    pub partial: bool,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[Duration], q: f64) -> Option<Duration> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

impl RunMetrics {
    pub fn from_samples(
        samples: Vec<Sample>,
        errors: usize,
        elapsed: Duration,
        latency_limit: Duration,
        threshold_trace: Vec<f64>,
        partial: bool,
    ) -> Self {
        let ops = samples.len();
        let mut lat: Vec<Duration> = samples.iter().map(|s| s.latency).collect();
        lat.sort_unstable();
        let total: Duration = lat.iter().sum();
        let slow = lat.iter().filter(|&&l| l > latency_limit).count();
        RunMetrics {
            ops,
            errors,
            elapsed,
            throughput: if elapsed.is_zero() {
                0.0
            } else {
                ops as f64 / elapsed.as_secs_f64()
            },
            mean_latency: if ops == 0 {
                Duration::ZERO
            } else {
                total / ops as u32
            },
            p999: if ops >= MIN_OPS_FOR_P999 {
                percentile(&lat, 0.999)
            } else {
                None
            },
            latency_limit,
            timeout_fraction: if ops == 0 {
                0.0
            } else {
                slow as f64 / ops as f64
            },
            threshold_trace,
            samples,
            partial,
        }
    }

    pub fn within_limit_fraction(&self) -> f64 {
        1.0 - self.timeout_fraction
    }

    /// Columns: ts, op_index, class, latency_us.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "ts,op_index,class,latency_us")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.6},{},{},{}",
                s.ts.as_secs_f64(),
                s.op_index,
                s.class,
                s.latency.as_micros()
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let p999 = match self.p999 {
            Some(p) => format!("{:.3} ms", p.as_secs_f64() * 1e3),
            None => format!("n/a (< {MIN_OPS_FOR_P999} updates)"),
        };
        format!(
            "ops {} errors {} elapsed {:.2}s throughput {:.0} ops/s mean {:.3} ms p999 {} within {} ms: {:.4}%{}",
            self.ops,
            self.errors,
            self.elapsed.as_secs_f64(),
            self.throughput,
            self.mean_latency.as_secs_f64() * 1e3,
            p999,
            self.latency_limit.as_millis(),
            100.0 * self.within_limit_fraction(),
            if self.partial { " (partial)" } else { "" }
        )
    }
}
