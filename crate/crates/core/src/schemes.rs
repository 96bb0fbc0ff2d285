//! The comparable cache schemes behind one engine interface.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;

use crate::cache::{BackendMetrics, CacheConfig, CacheError, CacheStats, FtlBackend, Policy, RegionBackend, ZCache};
use crate::device::{DeviceConfig, ZnsDevice, ZoneId};
use crate::ftl::{Ftl, FtlConfig};
use crate::zstorage::{DropFilter, GcConfig, GcStats, StorageConfig, ZStorage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemeName {
    ZCacheLib,
    ZnsMiddleLru,
    ZnsMiddleFifo,
    ZnsDirect,
    RegLru,
    RegFifo,
}

impl SchemeName {
    pub const ALL: [SchemeName; 6] = [
        SchemeName::ZCacheLib,
        SchemeName::ZnsMiddleLru,
        SchemeName::ZnsMiddleFifo,
        SchemeName::ZnsDirect,
        SchemeName::RegLru,
        SchemeName::RegFifo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::ZCacheLib => "zcachelib",
            SchemeName::ZnsMiddleLru => "zns_middle_lru",
            SchemeName::ZnsMiddleFifo => "zns_middle_fifo",
            SchemeName::ZnsDirect => "zns_direct",
            SchemeName::RegLru => "reg_lru",
            SchemeName::RegFifo => "reg_fifo",
        }
    }

    pub fn is_reg(self) -> bool {
        matches!(self, SchemeName::RegLru | SchemeName::RegFifo)
    }
}

impl std::fmt::Display for SchemeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_ascii_lowercase();
        SchemeName::ALL
            .into_iter()
            .find(|n| n.as_str().replace('_', "") == norm)
            .ok_or_else(|| {
                format!(
                    "unknown scheme '{s}' (expected one of {})",
                    SchemeName::ALL.map(|n| n.as_str()).join(", ")
                )
            })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemeError {
    #[error("incompatible scheme spec: {0}")]
    IncompatibleSpec(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl From<crate::device::DeviceError> for SchemeError {
    fn from(e: crate::device::DeviceError) -> Self {
        SchemeError::Cache(CacheError::Storage(e.into()))
    }
}

impl From<crate::zstorage::StorageError> for SchemeError {
    fn from(e: crate::zstorage::StorageError) -> Self {
        SchemeError::Cache(e.into())
    }
}

impl From<crate::ftl::FtlError> for SchemeError {
    fn from(e: crate::ftl::FtlError) -> Self {
        SchemeError::Cache(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub name: SchemeName,
    pub device: DeviceConfig,
    pub region_size: u64,
    /// Reserved space over cache space.
    pub op_ratio: f64,
    /// zLRU vOP share (Z-CacheLib only).
    pub vop_ratio: f64,
    pub zlru_reorder: bool,
    pub gc: GcConfig,
    pub min_write_zones: usize,
    pub max_write_zones: usize,
    /// FTL geometry for the block-interface schemes.
    pub ftl: FtlConfig,
}

impl SchemeSpec {
    /// Defaults for a scheme on the given device: 16 MiB regions (one zone
    /// for ZNS-Direct), 7% OP, zDrop-100.
    pub fn new(name: SchemeName, device: DeviceConfig) -> Self {
        let region_size = if name == SchemeName::ZnsDirect {
            device.zone_capacity
        } else {
            (16 * crate::MIB).min(device.zone_capacity)
        };
        SchemeSpec {
            name,
            region_size,
            op_ratio: 0.07,
            vop_ratio: 1.0,
            zlru_reorder: true,
            gc: GcConfig::default(),
            min_write_zones: 1,
            max_write_zones: (device.max_open_zones as usize).min(8),
            ftl: FtlConfig { backing: device.backing, ..FtlConfig::default() },
            device,
        }
    }

    pub fn regions_per_zone(&self) -> u64 {
        self.device.zone_capacity / self.region_size
    }

    /// Cache region slots: device slots shrunk by the OP ratio.
    pub fn cache_regions(&self) -> u32 {
        let slots = self.device.zone_count as u64 * self.regions_per_zone();
        (slots as f64 / (1.0 + self.op_ratio) + 1e-9).floor() as u32
    }

    pub fn cache_config(&self) -> CacheConfig {
        let (policy, zdrop) = match self.name {
            SchemeName::ZCacheLib => (Policy::Zlru, true),
            SchemeName::ZnsMiddleLru | SchemeName::RegLru | SchemeName::ZnsDirect => (Policy::Lru, false),
            SchemeName::ZnsMiddleFifo | SchemeName::RegFifo => (Policy::Fifo, false),
        };
        CacheConfig {
            region_size: self.region_size,
            capacity_regions: self.cache_regions(),
            vop_ratio: if policy == Policy::Zlru { self.vop_ratio } else { 0.0 },
            policy,
            zlru_reorder: self.zlru_reorder,
            zdrop,
        }
    }

    pub fn storage_config(&self) -> StorageConfig {
        let direct = self.name == SchemeName::ZnsDirect;
        StorageConfig {
            region_size: self.region_size,
            min_write_zones: if direct { 1 } else { self.min_write_zones },
            max_write_zones: if direct { 1 } else { self.max_write_zones },
            gc: self.gc,
            gc_enabled: !direct,
            reclaim_empty_zones: direct,
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::IncompatibleSpec(m));
        self.device.validate()?;
        if self.region_size == 0 || self.device.zone_capacity % self.region_size != 0 {
            return bad(format!(
                "zone capacity {} is not a multiple of region size {}",
                self.device.zone_capacity, self.region_size
            ));
        }
        if self.name == SchemeName::ZnsDirect && self.region_size != self.device.zone_capacity {
            return bad(format!(
                "zns_direct needs region size == zone capacity ({} != {})",
                self.region_size, self.device.zone_capacity
            ));
        }
        if !(self.op_ratio >= 0.0) || !self.op_ratio.is_finite() {
            return bad(format!("op_ratio {} must be a non-negative number", self.op_ratio));
        }
        if self.cache_regions() < 2 {
            return bad(format!("only {} cache regions fit; need at least 2", self.cache_regions()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Engine, SchemeError> {
        self.validate()?;
        let backend: Box<dyn RegionBackend + Send> = if self.name.is_reg() {
            let bytes = self.cache_regions() as u64 * self.region_size;
            let ftl = Ftl::new(FtlConfig::sized_for(bytes, self.ftl.clone()))?;
            Box::new(FtlBackend::new(ftl, self.region_size)?)
        } else {
            let device = ZnsDevice::new(self.device.clone())?;
            Box::new(ZStorage::new(device, self.storage_config())?)
        };
        let cache = ZCache::new(self.cache_config(), backend)?;
        Ok(Engine { spec: self.clone(), cache })
    }
}

impl RegionBackend for Box<dyn RegionBackend + Send> {
    fn region_size(&self) -> u64 {
        (**self).region_size()
    }
    fn write_region(&mut self, va: u64, payload: &[u8]) -> Result<(), CacheError> {
        (**self).write_region(va, payload)
    }
    fn read_region_range(&self, va: u64, offset: u64, len: u64) -> Result<Vec<u8>, CacheError> {
        (**self).read_region_range(va, offset, len)
    }
    fn invalidate_region(&mut self, va: u64) -> Result<bool, CacheError> {
        (**self).invalidate_region(va)
    }
    fn zone_of(&self, va: u64) -> Option<ZoneId> {
        (**self).zone_of(va)
    }
    fn maintain(&mut self, filter: &mut dyn DropFilter) -> Result<Option<GcStats>, CacheError> {
        (**self).maintain(filter)
    }
    fn metrics(&self) -> BackendMetrics {
        (**self).metrics()
    }
    fn as_storage(&self) -> Option<&ZStorage> {
        (**self).as_storage()
    }
    fn as_ftl(&self) -> Option<&Ftl> {
        (**self).as_ftl()
    }
}

/// Cache and backend counters at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EngineMetrics {
    pub cache: CacheStats,
    pub backend: BackendMetrics,
}

impl EngineMetrics {
    pub fn wa_factor(&self) -> f64 {
        self.backend.wa_factor()
    }
}

pub struct Engine {
    spec: SchemeSpec,
    cache: ZCache<Box<dyn RegionBackend + Send>>,
}

impl Engine {
    pub fn spec(&self) -> &SchemeSpec {
        &self.spec
    }

    pub fn name(&self) -> SchemeName {
        self.spec.name
    }

    pub fn insert(&mut self, key: &str, value: &[u8]) -> Result<(), CacheError> {
        self.cache.insert(key, value)
    }

    pub fn lookup(&mut self, key: &str) -> Result<Option<Vec<u8>>, CacheError> {
        self.cache.lookup(key)
    }

    pub fn peek(&self, key: &str) -> Result<Option<Vec<u8>>, CacheError> {
        self.cache.peek(key)
    }

    pub fn cached_keys(&self) -> Vec<String> {
        self.cache.cached_keys()
    }

    /// Runs one GC cycle if the backend is below its low watermark.
    pub fn tick_gc(&mut self) -> Result<Option<GcStats>, CacheError> {
        self.cache.run_gc()
    }

    pub fn metrics(&self) -> EngineMetrics {
        EngineMetrics { cache: self.cache.stats(), backend: self.cache.backend().metrics() }
    }

    pub fn wa_factor(&self) -> f64 {
        self.metrics().wa_factor()
    }

    pub fn cache(&self) -> &ZCache<Box<dyn RegionBackend + Send>> {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut ZCache<Box<dyn RegionBackend + Send>> {
        &mut self.cache
    }

    pub fn storage(&self) -> Option<&ZStorage> {
        self.cache.backend().as_storage()
    }

    pub fn ftl(&self) -> Option<&Ftl> {
        self.cache.backend().as_ftl()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        self.cache.check_invariants()?;
        if let Some(s) = self.storage() {
            s.check_invariants()?;
        }
        if let Some(f) = self.ftl() {
            f.check_invariants()?;
        }
        Ok(())
    }
}

/// An engine shared between a foreground context and a background GC thread.
#[derive(Clone)]
pub struct SharedEngine {
    inner: Arc<Mutex<Engine>>,
}

pub struct BackgroundGc {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<Result<u64, CacheError>>>,
}

impl SharedEngine {
    pub fn new(engine: Engine) -> Self {
        SharedEngine { inner: Arc::new(Mutex::new(engine)) }
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut Engine) -> R) -> R {
        f(&mut self.inner.lock().unwrap_or_else(|e| e.into_inner()))
    }

    /// Starts a thread that polls the GC trigger every `period`.
    pub fn spawn_gc(&self, period: Duration) -> BackgroundGc {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let engine = self.clone();
        let handle = std::thread::spawn(move || {
            let mut cycles = 0;
            while !flag.load(Ordering::Acquire) {
                if engine.with(|e| e.tick_gc())?.is_some() {
                    cycles += 1;
                }
                std::thread::sleep(period);
            }
            Ok(cycles)
        });
        BackgroundGc { stop, handle: Some(handle) }
    }

    pub fn into_inner(self) -> Option<Engine> {
        Arc::into_inner(self.inner).map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
    }
}

impl BackgroundGc {
    /// Stops the thread and returns how many GC cycles it ran.
    pub fn stop(mut self) -> Result<u64, CacheError> {
        self.stop.store(true, Ordering::Release);
        self.handle.take().map(|h| h.join().expect("gc thread panicked")).unwrap_or(Ok(0))
    }
}

impl Drop for BackgroundGc {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
