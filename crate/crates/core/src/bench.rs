//! Wall-clock comparison of the samplers.
//!
//! Each cell times the generation of `count` matrices with a monotonic
//! clock; matrices are dropped as they are produced, so serialization is
//! never part of a measurement.

use std::io::Write;
use std::time::Instant;

use log::warn;

use crate::error::{Error, Result};
use crate::row::RowChainConfig;
use crate::sampler::{ChainMode, Method};

pub const BENCH_CSV_HEADER: &str = "method,p,n,seconds";

/// One method in a benchmark run, optionally pinned to a chain mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchEntry {
    pub method: Method,
    pub mode: ChainMode,
}

impl BenchEntry {
    pub fn label(&self) -> String {
        match (self.method, self.mode) {
            (Method::Chol, ChainMode::RestartPerMatrix) => "chol-restart".to_string(),
            (m, _) => m.label().to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub entries: Vec<BenchEntry>,
    pub dims: Vec<usize>,
    pub count: usize,
    pub repeats: usize,
    pub row_config: RowChainConfig,
}

impl BenchConfig {
    /// Matrix sizes 10, 20, …, 100 with 5000 matrices per cell.
    pub fn standard(row_config: RowChainConfig) -> Self {
        Self {
            entries: Method::ALL
                .iter()
                .map(|&method| BenchEntry {
                    method,
                    mode: ChainMode::ChainReuse,
                })
                .collect(),
            dims: (1..=10).map(|k| 10 * k).collect(),
            count: 5000,
            repeats: 1,
            row_config,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub label: String,
    pub dim: usize,
    pub count: usize,
    /// Median over repeats; NaN when the method failed.
    pub seconds: f64,
}

impl BenchRecord {
    pub fn throughput(&self) -> f64 {
        self.count as f64 / self.seconds
    }
}

/// Seconds spent generating `count` matrices.
pub fn time_generation(
    entry: BenchEntry,
    dim: usize,
    count: usize,
    row_config: RowChainConfig,
) -> Result<f64> {
    let start = Instant::now();
    let stream = entry.method.stream(dim, count, row_config, entry.mode)?;
    let mut produced = 0;
    for m in stream {
        drop(m?);
        produced += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    if produced != count {
        return Err(Error::InvalidArgument(format!(
            "expected {count} matrices, got {produced}"
        )));
    }
    Ok(elapsed)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs every `(entry, dim)` cell; `progress` sees each record as it finishes.
pub fn run_bench<F: FnMut(&BenchRecord)>(
    config: &BenchConfig,
    mut progress: F,
) -> Result<Vec<BenchRecord>> {
    if config.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if config.count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut out = Vec::new();
    for &dim in &config.dims {
        for entry in &config.entries {
            let mut times = Vec::with_capacity(config.repeats);
            let mut failed = false;
            for _ in 0..config.repeats {
                match time_generation(*entry, dim, config.count, config.row_config) {
                    Ok(t) => times.push(t),
                    Err(e) => {
                        warn!("{} at p = {dim} failed: {e}", entry.label());
                        failed = true;
                        break;
                    }
                }
            }
            let record = BenchRecord {
                label: entry.label(),
                dim,
                count: config.count,
                seconds: if failed { f64::NAN } else { median(&mut times) },
            };
            progress(&record);
            out.push(record);
        }
    }
    Ok(out)
}

pub fn write_bench_csv<W: Write>(records: &[BenchRecord], mut out: W) -> Result<()> {
    writeln!(out, "{BENCH_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{},{},{},{}", r.label, r.dim, r.count, r.seconds)?;
    }
    Ok(())
}
