//! Experiment runner: drives a workload through an engine, verifies every
//! hit against a shadow copy of what was written, and reports per-interval
//! metrics split into filling, evicting and stable stages.

mod config;
mod report;
mod timing;

pub use config::{parse_kv, parse_size, ConfigError, ExperimentConfig, WorkloadSource};
pub use report::{write_csv, CSV_HEADER};
pub use timing::TimingModel;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::cache::CacheError;
use crate::schemes::{Engine, EngineMetrics, SchemeError, SchemeName};
use crate::workload::{splitmix64, CacheOp, OpKind, WorkloadError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("op {op_index}: {source}")]
    Engine { op_index: u64, source: CacheError },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Filling,
    Evicting,
    Stable,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Filling => "filling",
            Stage::Evicting => "evicting",
            Stage::Stable => "stable",
        }
    }

    fn of(m: &EngineMetrics) -> Stage {
        if m.backend.gc_cycles > 0 || m.backend.wrapped {
            Stage::Stable
        } else if m.cache.evicted_regions > 0 {
            Stage::Evicting
        } else {
            Stage::Filling
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub interval: u64,
    /// Cumulative.
    pub ops: u64,
    /// Per interval.
    pub hits: u64,
    pub misses: u64,
    pub cache_bytes: u64,
    pub device_bytes: u64,
    pub device_read_bytes: u64,
    pub gc_migrated_bytes: u64,
    pub empty_zones: Option<usize>,
    /// Stage in effect when the interval began.
    pub stage: Stage,
    /// Simulated seconds spent in this interval.
    pub sim_seconds: f64,
}

impl IntervalRow {
    pub fn hit_ratio(&self) -> f64 {
        let lookups = self.hits + self.misses;
        if lookups == 0 {
            0.0
        } else {
            self.hits as f64 / lookups as f64
        }
    }

    pub fn wa_cum(&self) -> f64 {
        if self.cache_bytes == 0 {
            1.0
        } else {
            self.device_bytes as f64 / self.cache_bytes as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scheme: SchemeName,
    pub ops: u64,
    pub stable_hit_ratio: Option<f64>,
    /// Stable-stage ops per simulated second.
    pub stable_throughput: Option<f64>,
    pub final_wa: f64,
    pub gc_cycles: u64,
    pub dropped_regions: u64,
    pub evicted_regions: u64,
    pub verified_hits: u64,
    pub integrity_checked: u64,
    pub corruptions: u64,
    pub measured_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<IntervalRow>,
    pub summary: Summary,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        write_csv(&mut out, self).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("CSV is ASCII")
    }
}

/// Deterministic payload of one version of a key.
pub fn payload(key: &str, version: u64, size: u64) -> Vec<u8> {
    let seed = splitmix64(fnv1a(key.as_bytes()) ^ version.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    let mut out = Vec::with_capacity(size as usize + 8);
    let mut i = 0u64;
    while (out.len() as u64) < size {
        let word = seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        out.extend_from_slice(&word.to_le_bytes());
        i += 1;
    }
    out.truncate(size as usize);
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Latest written version and size of every key, kept outside the engine.
#[derive(Debug, Default)]
pub struct Shadow {
    latest: HashMap<String, (u64, u64)>,
}

impl Shadow {
    /// Records a new version and returns its payload.
    pub fn next_payload(&mut self, key: &str, size: u64) -> Vec<u8> {
        let entry = self.latest.entry(key.to_string()).or_insert((0, size));
        entry.0 += 1;
        entry.1 = size;
        payload(key, entry.0, size)
    }

    pub fn expected(&self, key: &str) -> Option<Vec<u8>> {
        self.latest.get(key).map(|&(v, s)| payload(key, v, s))
    }

    pub fn matches(&self, key: &str, bytes: &[u8]) -> bool {
        match self.latest.get(key) {
            Some(&(v, s)) => bytes.len() as u64 == s && bytes == payload(key, v, s).as_slice(),
            None => false,
        }
    }

    pub fn size_of(&self, key: &str) -> Option<u64> {
        self.latest.get(key).map(|&(_, s)| s)
    }
}

/// Runs an experiment and writes the CSV if an output path is configured.
pub fn run(config: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    let mut engine = config.scheme.build()?;
    let report = run_on(&mut engine, config)?;
    if let Some(path) = &config.output_path {
        let io = |e: std::io::Error| HarnessError::Io { path: path.display().to_string(), message: e.to_string() };
        let f = std::fs::File::create(path).map_err(io)?;
        write_csv(std::io::BufWriter::new(f), &report).map_err(io)?;
    }
    Ok(report)
}

/// Runs an experiment on an already built engine.
pub fn run_on(engine: &mut Engine, config: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    let timing = TimingModel::from_device(&config.scheme.device);
    let stop_bytes = config.write_multiple.map(|m| (m * config.scheme.device.capacity() as f64) as u64);
    let size_limit = config.scheme.region_size;
    let mut runner = Runner::new(engine, config.interval_ops.max(1), timing);
    let ops: Box<dyn Iterator<Item = CacheOp>> = match &config.workload {
        WorkloadSource::Generated(spec) => Box::new(spec.generate()?),
        WorkloadSource::Trace(ops) => Box::new(ops.clone().into_iter()),
    };
    let fill_size = |key: &str, shadow: &Shadow| -> Option<u64> {
        match &config.workload {
            WorkloadSource::Generated(spec) => crate::workload::key_rank(key).map(|r| spec.size_of(r)),
            WorkloadSource::Trace(_) => shadow.size_of(key),
        }
    };
    for op in ops {
        if op.size.is_some_and(|s| s > size_limit) {
            return Err(HarnessError::Engine {
                op_index: runner.ops,
                source: CacheError::ItemTooLarge { size: op.size.unwrap_or(0), region_size: size_limit },
            });
        }
        runner.step(&op, &fill_size)?;
        if stop_bytes.is_some_and(|b| runner.engine.metrics().backend.cache_bytes >= b) {
            break;
        }
    }
    let mut report = runner.finish()?;
    if !config.timing_enabled {
        report.summary.stable_throughput = None;
    }
    Ok(report)
}

struct Runner<'a> {
    engine: &'a mut Engine,
    shadow: Shadow,
    interval_ops: u64,
    timing: TimingModel,
    ops: u64,
    rows: Vec<IntervalRow>,
    mark: EngineMetrics,
    mark_stage: Stage,
    verified_hits: u64,
    corruptions: u64,
}

impl<'a> Runner<'a> {
    fn new(engine: &'a mut Engine, interval_ops: u64, timing: TimingModel) -> Self {
        let mark = engine.metrics();
        Runner {
            engine,
            shadow: Shadow::default(),
            interval_ops,
            timing,
            ops: 0,
            rows: Vec::new(),
            mark,
            mark_stage: Stage::of(&mark),
            verified_hits: 0,
            corruptions: 0,
        }
    }

    fn step(&mut self, op: &CacheOp, fill_size: &dyn Fn(&str, &Shadow) -> Option<u64>) -> Result<(), HarnessError> {
        let at = self.ops;
        let err = |source| HarnessError::Engine { op_index: at, source };
        match op.kind {
            OpKind::Get => match self.engine.lookup(&op.key).map_err(err)? {
                Some(bytes) => {
                    self.verified_hits += 1;
                    if !self.shadow.matches(&op.key, &bytes) {
                        self.corruptions += 1;
                    }
                }
                None => {
                    if let Some(size) = fill_size(&op.key, &self.shadow) {
                        let value = self.shadow.next_payload(&op.key, size);
                        self.engine.insert(&op.key, &value).map_err(err)?;
                    }
                }
            },
            OpKind::Set => {
                let value = self.shadow.next_payload(&op.key, op.size.unwrap_or(0));
                self.engine.insert(&op.key, &value).map_err(err)?;
            }
        }
        self.ops += 1;
        if self.ops % self.interval_ops == 0 {
            self.close_interval();
        }
        Ok(())
    }

    fn close_interval(&mut self) {
        let now = self.engine.metrics();
        let b = &now.backend;
        let written = b.device_bytes - self.mark.backend.device_bytes;
        let read = b.device_read_bytes - self.mark.backend.device_read_bytes;
        self.rows.push(IntervalRow {
            interval: self.rows.len() as u64,
            ops: self.ops,
            hits: now.cache.hits - self.mark.cache.hits,
            misses: now.cache.misses - self.mark.cache.misses,
            cache_bytes: b.cache_bytes,
            device_bytes: b.device_bytes,
            device_read_bytes: b.device_read_bytes,
            gc_migrated_bytes: b.migrated_bytes,
            empty_zones: b.empty_zones,
            stage: self.mark_stage,
            sim_seconds: self.timing.seconds(written, read),
        });
        self.mark = now;
        self.mark_stage = Stage::of(&now);
    }

    fn finish(mut self) -> Result<MetricsReport, HarnessError> {
        if self.rows.last().map_or(true, |r| r.ops != self.ops) && self.ops > 0 {
            self.close_interval();
        }
        let mut checked = 0;
        for key in self.engine.cached_keys() {
            let bytes = self
                .engine
                .peek(&key)
                .map_err(|source| HarnessError::Engine { op_index: self.ops, source })?;
            checked += 1;
            if !bytes.is_some_and(|b| self.shadow.matches(&key, &b)) {
                self.corruptions += 1;
            }
        }
        let stable: Vec<&IntervalRow> = self.rows.iter().filter(|r| r.stage == Stage::Stable).collect();
        let stable_ops: u64 = stable
            .iter()
            .map(|r| r.ops - if r.interval == 0 { 0 } else { self.rows[r.interval as usize - 1].ops })
            .sum();
        let stable_secs: f64 = stable.iter().map(|r| r.sim_seconds).sum();
        let (sh, sm) = stable.iter().fold((0, 0), |(h, m), r| (h + r.hits, m + r.misses));
        let m = self.engine.metrics();
        let summary = Summary {
            scheme: self.engine.name(),
            ops: self.ops,
            stable_hit_ratio: (sh + sm > 0).then(|| sh as f64 / (sh + sm) as f64),
            stable_throughput: (stable_secs > 0.0).then(|| stable_ops as f64 / stable_secs),
            final_wa: m.wa_factor(),
            gc_cycles: m.backend.gc_cycles,
            dropped_regions: m.cache.dropped_regions,
            evicted_regions: m.cache.evicted_regions,
            verified_hits: self.verified_hits,
            integrity_checked: checked,
            corruptions: self.corruptions,
            measured_k: self.engine.storage().and_then(|s| s.stats().measured_k()),
        };
        Ok(MetricsReport { rows: self.rows, summary })
    }
}

/// Simulated seconds needed to serve `ops` on `engine`, with miss fills
/// sized by `fill_size`.
pub fn simulate_time(
    engine: &mut Engine,
    ops: impl IntoIterator<Item = CacheOp>,
    fill_size: impl Fn(&str) -> Option<u64>,
) -> Result<f64, HarnessError> {
    let timing = TimingModel::from_device(&engine.spec().device);
    let before = engine.metrics().backend;
    let mut runner = Runner::new(engine, u64::MAX, timing);
    for op in ops {
        runner.step(&op, &|k, _| fill_size(k))?;
    }
    let after = runner.engine.metrics().backend;
    Ok(timing.seconds(after.device_bytes - before.device_bytes, after.device_read_bytes - before.device_read_bytes))
}
