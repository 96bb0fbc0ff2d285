//! Region-packed log-structured cache.
//!
//! Items are appended to an in-memory buffer region; a full buffer is
//! flushed as one region write to a [`RegionBackend`]. Flushed regions sit
//! in an [`EvictionList`] whose eviction order depends on the [`Policy`].
//! Under zLRU part of the list is the vOP partition: regions there are
//! evictable but still readable, and regions whose zone holds few valid
//! main-partition regions are sunk to its tail. The cache also acts as the
//! GC drop filter (see [`zdrop`]).

mod backend;
mod list;
mod zdrop;

pub use backend::{BackendMetrics, FtlBackend, RegionBackend};
pub use list::{vop_target, EvictionList, Partition};
pub use zdrop::ZoneCandidacy;

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::ftl::FtlError;
use crate::zstorage::{GcStats, StorageError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("invalid cache config: {0}")]
    InvalidConfig(String),
    #[error("item of {size} bytes exceeds the region size {region_size}")]
    ItemTooLarge { size: u64, region_size: u64 },
    #[error("nothing to evict")]
    NothingToEvict,
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Ftl(#[from] FtlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Fifo,
    Lru,
    Zlru,
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(Policy::Fifo),
            "lru" => Ok(Policy::Lru),
            "zlru" => Ok(Policy::Zlru),
            other => Err(format!("unknown policy '{other}' (expected fifo|lru|zlru)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheConfig {
    pub region_size: u64,
    pub capacity_regions: u32,
    /// Share of the eviction list kept in the vOP partition (zLRU only).
    pub vop_ratio: f64,
    pub policy: Policy,
    /// Sink regions of candidate zones to the vOP tail after every flush.
    pub zlru_reorder: bool,
    /// Drop instead of migrating vOP regions found in a GC victim.
    pub zdrop: bool,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            region_size: 16 * crate::MIB,
            capacity_regions: 64,
            vop_ratio: 1.0,
            policy: Policy::Zlru,
            zlru_reorder: true,
            zdrop: true,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), CacheError> {
        let bad = |m: String| Err(CacheError::InvalidConfig(m));
        if self.region_size == 0 {
            return bad("region_size must be positive".into());
        }
        if self.capacity_regions < 2 {
            return bad(format!("need at least 2 regions, got {}", self.capacity_regions));
        }
        if !(0.0..=1.0).contains(&self.vop_ratio) {
            return bad(format!("vop_ratio {} outside [0, 1]", self.vop_ratio));
        }
        Ok(())
    }

    /// vOP share actually applied; FIFO and LRU have no vOP partition.
    pub fn effective_vop_ratio(&self) -> f64 {
        match self.policy {
            Policy::Zlru => self.vop_ratio,
            Policy::Fifo | Policy::Lru => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionStatus {
    Free,
    Buffered,
    Flushed,
    Evicting,
    Evicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemLoc {
    pub region: u32,
    pub offset: u64,
    pub size: u64,
}

#[derive(Debug, Clone)]
struct RegionMeta {
    status: RegionStatus,
    keys: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub inserts: u64,
    pub inserted_bytes: u64,
    pub flushed_regions: u64,
    pub evicted_regions: u64,
    pub dropped_regions: u64,
    pub reordered_regions: u64,
}

/// Cache state without the backend, so GC can borrow it as a drop filter
/// while the backend is borrowed mutably.
pub struct CacheCore {
    config: CacheConfig,
    regions: Vec<RegionMeta>,
    free: VecDeque<u32>,
    buffer: Vec<u8>,
    fill: u64,
    buffered: Option<u32>,
    index: HashMap<String, ItemLoc>,
    list: EvictionList,
    stats: CacheStats,
}

impl CacheCore {
    fn va(&self, region: u32) -> u64 {
        region as u64 * self.config.region_size
    }

    fn unindex_region(&mut self, region: u32) {
        let keys = std::mem::take(&mut self.regions[region as usize].keys);
        for key in keys {
            if self.index.get(&key).is_some_and(|l| l.region == region) {
                self.index.remove(&key);
            }
        }
    }

    fn rebalance(&mut self) {
        if self.config.policy == Policy::Zlru {
            self.list.rebalance(self.config.vop_ratio);
        }
    }

    /// True eviction from GC: the region leaves the cache at once.
    fn drop_region(&mut self, region: u32) {
        self.list.remove(region);
        self.unindex_region(region);
        self.regions[region as usize].status = RegionStatus::Free;
        self.free.push_back(region);
        self.stats.dropped_regions += 1;
        self.rebalance();
    }
}

pub struct ZCache<B> {
    core: CacheCore,
    backend: B,
}

impl<B: RegionBackend> ZCache<B> {
    pub fn new(config: CacheConfig, backend: B) -> Result<Self, CacheError> {
        config.validate()?;
        if backend.region_size() != config.region_size {
            return Err(CacheError::InvalidConfig(format!(
                "backend region size {} differs from cache region size {}",
                backend.region_size(),
                config.region_size
            )));
        }
        let n = config.capacity_regions;
        Ok(ZCache {
            core: CacheCore {
                regions: vec![RegionMeta { status: RegionStatus::Free, keys: Vec::new() }; n as usize],
                free: (0..n).collect(),
                buffer: vec![0; config.region_size as usize],
                fill: 0,
                buffered: None,
                index: HashMap::new(),
                list: EvictionList::new(n as usize),
                stats: CacheStats::default(),
                config,
            },
            backend,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.core.config
    }

    pub fn stats(&self) -> CacheStats {
        self.core.stats
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn list(&self) -> &EvictionList {
        &self.core.list
    }

    pub fn region_status(&self, region: u32) -> RegionStatus {
        self.core.regions[region as usize].status
    }

    pub fn buffered_region(&self) -> Option<u32> {
        self.core.buffered
    }

    pub fn item_location(&self, key: &str) -> Option<ItemLoc> {
        self.core.index.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.core.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.index.is_empty()
    }

    /// Indexed keys in sorted order.
    pub fn cached_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.core.index.keys().cloned().collect();
        keys.sort_unstable();
        keys
    }

    /// Whether inserting an item of `len` bytes would flush the buffer.
    pub fn insert_would_flush(&self, len: u64) -> bool {
        self.core.buffered.is_some() && self.core.fill + len > self.core.config.region_size
    }

    pub fn insert(&mut self, key: &str, value: &[u8]) -> Result<(), CacheError> {
        let len = value.len() as u64;
        let region_size = self.core.config.region_size;
        if len > region_size {
            return Err(CacheError::ItemTooLarge { size: len, region_size });
        }
        if self.insert_would_flush(len) {
            self.flush()?;
        }
        if self.core.buffered.is_none() {
            self.allocate()?;
        }
        let core = &mut self.core;
        let region = core.buffered.expect("buffer allocated");
        let offset = core.fill;
        core.buffer[offset as usize..(offset + len) as usize].copy_from_slice(value);
        core.fill += len;
        core.regions[region as usize].keys.push(key.to_string());
        core.index.insert(key.to_string(), ItemLoc { region, offset, size: len });
        core.stats.inserts += 1;
        core.stats.inserted_bytes += len;
        Ok(())
    }

    /// Looks an item up, counting a hit or miss and updating recency.
    pub fn lookup(&mut self, key: &str) -> Result<Option<Vec<u8>>, CacheError> {
        let Some(loc) = self.core.index.get(key).copied() else {
            self.core.stats.misses += 1;
            return Ok(None);
        };
        let value = self.read_item(loc)?;
        self.core.stats.hits += 1;
        self.touch(loc.region);
        Ok(Some(value))
    }

    /// Reads an item without touching statistics or recency.
    pub fn peek(&self, key: &str) -> Result<Option<Vec<u8>>, CacheError> {
        match self.core.index.get(key) {
            Some(&loc) => self.read_item(loc).map(Some),
            None => Ok(None),
        }
    }

    fn read_item(&self, loc: ItemLoc) -> Result<Vec<u8>, CacheError> {
        let core = &self.core;
        if core.buffered == Some(loc.region) {
            let (a, b) = (loc.offset as usize, (loc.offset + loc.size) as usize);
            return Ok(core.buffer[a..b].to_vec());
        }
        self.backend.read_region_range(core.va(loc.region), loc.offset, loc.size)
    }

    fn touch(&mut self, region: u32) {
        let core = &mut self.core;
        if core.config.policy == Policy::Fifo || !core.list.contains(region) {
            return;
        }
        core.list.remove(region);
        core.list.push_head(Partition::Main, region);
        core.rebalance();
    }

    fn allocate(&mut self) -> Result<(), CacheError> {
        if self.core.free.is_empty() {
            self.evict_one()?;
        }
        let core = &mut self.core;
        let region = core.free.pop_front().ok_or(CacheError::NothingToEvict)?;
        debug_assert_eq!(core.regions[region as usize].status, RegionStatus::Free);
        core.regions[region as usize].status = RegionStatus::Buffered;
        core.buffered = Some(region);
        core.fill = 0;
        Ok(())
    }

    /// Writes the buffer region out; the next insert allocates a new one.
    pub fn flush(&mut self) -> Result<(), CacheError> {
        let Some(region) = self.core.buffered else { return Ok(()) };
        let fill = self.core.fill as usize;
        self.core.buffer[fill..].fill(0);
        self.backend.maintain(&mut self.core)?;
        let va = self.core.va(region);
        self.backend.write_region(va, &self.core.buffer)?;
        let core = &mut self.core;
        core.buffered = None;
        core.fill = 0;
        core.regions[region as usize].status = RegionStatus::Flushed;
        core.list.push_head(Partition::Main, region);
        core.rebalance();
        core.stats.flushed_regions += 1;
        if core.config.policy == Policy::Zlru && core.config.zlru_reorder {
            self.zlru_reorder();
        }
        Ok(())
    }

    /// Top-down eviction of the least valuable flushed region.
    pub fn evict_one(&mut self) -> Result<u32, CacheError> {
        let region = self.evict_begin()?;
        self.evict_complete(region)?;
        Ok(region)
    }

    /// First half of an eviction: the region leaves the list and the index
    /// and is marked Evicting. Its data stays mapped until
    /// [`evict_complete`](Self::evict_complete).
    pub fn evict_begin(&mut self) -> Result<u32, CacheError> {
        let core = &mut self.core;
        let region = core.list.victim().ok_or(CacheError::NothingToEvict)?;
        core.list.remove(region);
        core.unindex_region(region);
        core.regions[region as usize].status = RegionStatus::Evicting;
        core.stats.evicted_regions += 1;
        core.rebalance();
        Ok(region)
    }

    /// Releases an evicting region's storage and frees its slot.
    pub fn evict_complete(&mut self, region: u32) -> Result<(), CacheError> {
        let status = self.core.regions[region as usize].status;
        if !matches!(status, RegionStatus::Evicting | RegionStatus::Evicted) {
            return Ok(());
        }
        self.core.regions[region as usize].status = RegionStatus::Evicted;
        // GC may already have released the mapping after waiting on us.
        self.backend.invalidate_region(self.core.va(region))?;
        self.core.regions[region as usize].status = RegionStatus::Free;
        self.core.free.push_back(region);
        Ok(())
    }

    /// Runs backend maintenance (host GC) with this cache as drop filter.
    pub fn run_gc(&mut self) -> Result<Option<GcStats>, CacheError> {
        self.backend.maintain(&mut self.core)
    }

    /// Checks index, list and region-status consistency.
    pub fn check_invariants(&self) -> Result<(), String> {
        let core = &self.core;
        core.list.check()?;
        let mut flushed = 0;
        for (id, meta) in core.regions.iter().enumerate() {
            let listed = core.list.contains(id as u32);
            match meta.status {
                RegionStatus::Flushed => {
                    flushed += 1;
                    if !listed {
                        return Err(format!("flushed region {id} missing from the list"));
                    }
                }
                _ if listed => return Err(format!("region {id} listed while {:?}", meta.status)),
                RegionStatus::Free if !core.free.contains(&(id as u32)) => {
                    return Err(format!("free region {id} missing from the free list"))
                }
                _ => {}
            }
        }
        if flushed != core.list.total() {
            return Err("list size differs from flushed region count".into());
        }
        for (key, loc) in &core.index {
            let meta = &core.regions[loc.region as usize];
            if !matches!(meta.status, RegionStatus::Buffered | RegionStatus::Flushed) {
                return Err(format!("key {key} indexed in a {:?} region", meta.status));
            }
            if !meta.keys.iter().any(|k| k == key) {
                return Err(format!("key {key} not recorded in region {}", loc.region));
            }
        }
        let vop = core.list.len(Partition::Vop) as f64;
        if vop > core.config.effective_vop_ratio() * core.list.total() as f64 + 1.0 {
            return Err("vOP partition above its share".into());
        }
        Ok(())
    }
}
