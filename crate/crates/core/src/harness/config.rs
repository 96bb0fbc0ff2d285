//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::backing::BackingKind;
use crate::device::DeviceConfig;
use crate::schemes::{SchemeName, SchemeSpec};
use crate::workload::{replay_file, CacheOp, WorkloadSpec};
use crate::{GIB, KIB, MIB};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value for {key} ('{value}'): {message}")]
    BadValue { key: String, value: String, message: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    Generated(WorkloadSpec),
    Trace(Vec<CacheOp>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeSpec,
    pub workload: WorkloadSource,
    pub interval_ops: u64,
    pub timing_enabled: bool,
    pub output_path: Option<PathBuf>,
    /// Stop once the cache has written this multiple of the device capacity.
    pub write_multiple: Option<f64>,
}

pub const KEYS: &[&str] = &[
    "scheme",
    "zone_count",
    "cache_zones",
    "zone_capacity",
    "max_open_zones",
    "read_bandwidth",
    "write_bandwidth",
    "backing",
    "region_size",
    "op_ratio",
    "vop_ratio",
    "zlru_reorder",
    "w_low",
    "w_high",
    "min_write_zones",
    "max_write_zones",
    "ftl_internal_op",
    "ftl_pages_per_block",
    "workload",
    "trace",
    "get_ratio",
    "key_space",
    "zipf_alpha",
    "object_size_min",
    "object_size_max",
    "op_count",
    "seed",
    "interval_ops",
    "timing",
    "output",
    "write_multiple",
];

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Parses a byte size with an optional K/KiB/M/MiB/G/GiB suffix.
pub fn parse_size(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().map_err(|_| format!("'{s}' is not a size"))?;
    let mult = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kib" | "kb" => KIB,
        "m" | "mib" | "mb" => MIB,
        "g" | "gib" | "gb" => GIB,
        other => return Err(format!("unknown size unit '{other}'")),
    };
    n.checked_mul(mult).ok_or_else(|| format!("'{s}' overflows"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

struct Getter<'a>(&'a BTreeMap<String, String>);

impl Getter<'_> {
    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|message| ConfigError::BadValue {
                key: key.into(),
                value: v.clone(),
                message,
            }),
        }
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key, |s| s.parse::<T>().map_err(|e| e.to_string()))
    }

    fn size(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get(key, parse_size)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_kv(&parse_kv(&text)?)
    }

    /// Builds a config from parsed keys; anything missing takes the
    /// desk-scale default.
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let g = Getter(map);
        let name: SchemeName = g.get("scheme", |s| s.parse())?.unwrap_or(SchemeName::ZCacheLib);

        let mut device = DeviceConfig { backing: default_backing(), ..DeviceConfig::default() };
        if let Some(z) = g.num::<u32>("zone_count")?.or(g.num::<u32>("cache_zones")?) {
            device.zone_count = z;
        }
        if let Some(c) = g.size("zone_capacity")? {
            device.zone_capacity = c;
        }
        device.max_open_zones = g.num("max_open_zones")?.unwrap_or(device.max_open_zones.min(device.zone_count));
        if let Some(b) = g.size("read_bandwidth")? {
            device.read_bandwidth = b;
        }
        if let Some(b) = g.size("write_bandwidth")? {
            device.write_bandwidth = b;
        }
        if let Some(b) = g.get("backing", |s| s.parse::<BackingKind>())? {
            device.backing = b;
        }

        let mut scheme = SchemeSpec::new(name, device);
        if let Some(r) = g.size("region_size")? {
            scheme.region_size = r;
        }
        if let Some(v) = g.num("op_ratio")? {
            scheme.op_ratio = v;
        }
        if let Some(v) = g.num("vop_ratio")? {
            scheme.vop_ratio = v;
        }
        if let Some(v) = g.get("zlru_reorder", parse_bool)? {
            scheme.zlru_reorder = v;
        }
        if let Some(v) = g.num("w_low")? {
            scheme.gc.w_low = v;
        }
        if let Some(v) = g.num("w_high")? {
            scheme.gc.w_high = v;
        }
        if let Some(v) = g.num("min_write_zones")? {
            scheme.min_write_zones = v;
        }
        if let Some(v) = g.num("max_write_zones")? {
            scheme.max_write_zones = v;
        }
        if let Some(v) = g.num("ftl_internal_op")? {
            scheme.ftl.internal_op_ratio = v;
        }
        if let Some(v) = g.num("ftl_pages_per_block")? {
            scheme.ftl.pages_per_block = v;
        }
        scheme.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let op_count = g.num("op_count")?.unwrap_or(DEFAULT_OP_COUNT);
        let seed = g.num("seed")?.unwrap_or(1);
        let workload = if let Some(path) = map.get("trace") {
            let ops = replay_file(Path::new(path)).map_err(|e| ConfigError::BadValue {
                key: "trace".into(),
                value: path.clone(),
                message: e.to_string(),
            })?;
            WorkloadSource::Trace(ops)
        } else {
            let preset = map.get("workload").map(String::as_str).unwrap_or("l2_wc");
            let cache_bytes = scheme.cache_regions() as u64 * scheme.region_size;
            let mut w = WorkloadSpec::preset(preset, cache_bytes, op_count, seed).map_err(|e| ConfigError::BadValue {
                key: "workload".into(),
                value: preset.into(),
                message: e.to_string(),
            })?;
            if let Some(v) = g.num("get_ratio")? {
                w.get_ratio = v;
            }
            if let Some(v) = g.num("key_space")? {
                w.key_space = v;
            }
            if let Some(v) = g.num("zipf_alpha")? {
                w.zipf_alpha = v;
            }
            if let Some(v) = g.size("object_size_min")? {
                w.object_size_min = v;
            }
            if let Some(v) = g.size("object_size_max")? {
                w.object_size_max = v;
            }
            w.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if w.object_size_max > scheme.region_size {
                return Err(ConfigError::Invalid(format!(
                    "object_size_max {} exceeds region_size {}",
                    w.object_size_max, scheme.region_size
                )));
            }
            WorkloadSource::Generated(w)
        };

        let interval_ops = g.num("interval_ops")?.unwrap_or(10_000);
        if interval_ops == 0 {
            return Err(ConfigError::Invalid("interval_ops must be at least 1".into()));
        }
        let write_multiple = match map.get("write_multiple").map(String::as_str) {
            Some("none") | Some("off") => None,
            _ => Some(g.num("write_multiple")?.unwrap_or(DEFAULT_WRITE_MULTIPLE)),
        };
        Ok(ExperimentConfig {
            scheme,
            workload,
            interval_ops,
            timing_enabled: g.get("timing", parse_bool)?.unwrap_or(true),
            output_path: map.get("output").map(PathBuf::from),
            write_multiple,
        })
    }

    /// Desk-scale defaults for one scheme.
    pub fn desk(name: SchemeName, seed: u64) -> Self {
        let mut map = BTreeMap::new();
        map.insert("scheme".to_string(), name.as_str().to_string());
        map.insert("seed".to_string(), seed.to_string());
        Self::from_kv(&map).expect("desk defaults are valid")
    }
}

pub const DEFAULT_OP_COUNT: u64 = 10_000_000;
pub const DEFAULT_WRITE_MULTIPLE: f64 = 2.5;

fn default_backing() -> BackingKind {
    if cfg!(unix) {
        BackingKind::TempFile
    } else {
        BackingKind::Memory
    }
}
