//! Synthetic cache workloads and trace files.
//!
//! Generated streams are a pure function of the spec: Get/Set is drawn
//! i.i.d. from the get ratio, keys follow a Zipf law over the key space and
//! every key has one log-uniform size for the whole run.

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use thiserror::Error;

use crate::KIB;

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace i/o: {0}")]
    Io(String),
}

impl From<io::Error> for WorkloadError {
    fn from(e: io::Error) -> Self {
        WorkloadError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Get,
    Set,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheOp {
    pub kind: OpKind,
    pub key: String,
    /// Object size for a Set.
    pub size: Option<u64>,
}

impl fmt::Display for CacheOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.size) {
            (OpKind::Set, Some(size)) => write!(f, "set {} {size}", self.key),
            (OpKind::Set, None) => write!(f, "set {} 0", self.key),
            (OpKind::Get, _) => write!(f, "get {}", self.key),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub name: String,
    pub get_ratio: f64,
    pub key_space: u64,
    pub zipf_alpha: f64,
    pub object_size_min: u64,
    pub object_size_max: u64,
    pub op_count: u64,
    pub seed: u64,
}

pub const PRESETS: [(&str, f64); 3] = [("l2_wc", 0.60), ("l2_reg", 0.88), ("flat", 0.985)];

impl WorkloadSpec {
    /// A named preset whose key space is 1.5x the number of average-sized
    /// objects that fit in `cache_bytes`.
    pub fn preset(name: &str, cache_bytes: u64, op_count: u64, seed: u64) -> Result<Self, WorkloadError> {
        let norm = name.trim_end_matches("-like").trim_end_matches("_like");
        let (_, get_ratio) = PRESETS
            .iter()
            .find(|(n, _)| *n == norm)
            .ok_or_else(|| WorkloadError::InvalidSpec(format!("unknown preset '{name}' (expected l2_wc|l2_reg|flat)")))?;
        let (min, max) = (2 * KIB, 256 * KIB);
        let mean = log_uniform_mean(min, max);
        Ok(WorkloadSpec {
            name: norm.to_string(),
            get_ratio: *get_ratio,
            key_space: ((1.5 * cache_bytes as f64 / mean).round() as u64).max(1),
            zipf_alpha: 1.0,
            object_size_min: min,
            object_size_max: max,
            op_count,
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InvalidSpec(m));
        if !(0.0..=1.0).contains(&self.get_ratio) {
            return bad(format!("get_ratio {} outside [0, 1]", self.get_ratio));
        }
        if self.op_count == 0 {
            return bad("op_count must be at least 1".into());
        }
        if self.key_space == 0 {
            return bad("key_space must be at least 1".into());
        }
        if !(self.zipf_alpha >= 0.0) || !self.zipf_alpha.is_finite() {
            return bad(format!("zipf_alpha {} must be a finite value >= 0", self.zipf_alpha));
        }
        if self.object_size_min == 0 || self.object_size_min > self.object_size_max {
            return bad(format!(
                "need 0 < object_size_min <= object_size_max (got {} / {})",
                self.object_size_min, self.object_size_max
            ));
        }
        Ok(())
    }

    /// Mean object size of the log-uniform size law.
    pub fn mean_object_size(&self) -> f64 {
        log_uniform_mean(self.object_size_min, self.object_size_max)
    }

    /// The fixed size of a key, derived from a hash of key and seed.
    pub fn size_of(&self, key_id: u64) -> u64 {
        let (lo, hi) = (self.object_size_min as f64, self.object_size_max as f64);
        if lo == hi {
            return self.object_size_min;
        }
        let u = (splitmix64(key_id ^ splitmix64(self.seed)) >> 11) as f64 / (1u64 << 53) as f64;
        let size = (lo.ln() + u * (hi.ln() - lo.ln())).exp().round() as u64;
        size.clamp(self.object_size_min, self.object_size_max)
    }

    pub fn generate(&self) -> Result<Generator, WorkloadError> {
        self.validate()?;
        let zipf = Zipf::new(self.key_space as f64, self.zipf_alpha)
            .map_err(|e| WorkloadError::InvalidSpec(format!("zipf: {e}")))?;
        Ok(Generator {
            spec: self.clone(),
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            zipf,
            emitted: 0,
        })
    }
}

fn log_uniform_mean(min: u64, max: u64) -> f64 {
    if min == max {
        return min as f64;
    }
    (max - min) as f64 / (max as f64 / min as f64).ln()
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Key name for a popularity rank (1 = hottest).
pub fn key_name(rank: u64) -> String {
    format!("k{rank}")
}

/// Rank encoded in a generated key name.
pub fn key_rank(key: &str) -> Option<u64> {
    key.strip_prefix('k')?.parse().ok()
}

pub struct Generator {
    spec: WorkloadSpec,
    rng: ChaCha8Rng,
    zipf: Zipf<f64>,
    emitted: u64,
}

impl Generator {
    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }
}

impl Iterator for Generator {
    type Item = CacheOp;

    fn next(&mut self) -> Option<CacheOp> {
        if self.emitted >= self.spec.op_count {
            return None;
        }
        self.emitted += 1;
        let is_get = self.rng.random::<f64>() < self.spec.get_ratio;
        let rank = (self.zipf.sample(&mut self.rng) as u64).clamp(1, self.spec.key_space);
        let key = key_name(rank);
        Some(if is_get {
            CacheOp { kind: OpKind::Get, key, size: None }
        } else {
            CacheOp { kind: OpKind::Set, key, size: Some(self.spec.size_of(rank)) }
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.op_count - self.emitted) as usize;
        (left, Some(left))
    }
}

/// Parses one trace line; `None` for blank and comment lines.
pub fn parse_line(line: &str) -> Result<Option<CacheOp>, String> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split(' ').collect();
    match fields.as_slice() {
        ["get", key] if !key.is_empty() => Ok(Some(CacheOp { kind: OpKind::Get, key: key.to_string(), size: None })),
        ["set", key, size] if !key.is_empty() => {
            let size = size.parse::<u64>().map_err(|_| format!("bad size '{size}'"))?;
            Ok(Some(CacheOp { kind: OpKind::Set, key: key.to_string(), size: Some(size) }))
        }
        [kind, ..] if *kind != "get" && *kind != "set" => Err(format!("unknown op kind '{kind}'")),
        _ => Err(format!("malformed line '{line}'")),
    }
}

/// Reads a whole trace into memory, in file order.
pub fn replay<R: BufRead>(reader: R) -> Result<Vec<CacheOp>, WorkloadError> {
    let mut ops = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(op) = parse_line(&line).map_err(|message| WorkloadError::Parse { line: i + 1, message })? {
            ops.push(op);
        }
    }
    Ok(ops)
}

pub fn replay_file(path: &std::path::Path) -> Result<Vec<CacheOp>, WorkloadError> {
    let f = std::fs::File::open(path).map_err(|e| WorkloadError::Io(format!("{}: {e}", path.display())))?;
    replay(io::BufReader::new(f))
}

pub fn write_trace<W: Write>(mut out: W, ops: impl IntoIterator<Item = CacheOp>) -> io::Result<u64> {
    let mut n = 0;
    for op in ops {
        writeln!(out, "{op}")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}
