//! Storage targets a cache can flush regions to.

use crate::device::ZoneId;
use crate::ftl::{Ftl, FtlError};
use crate::zstorage::{DropFilter, GcStats, StorageError, ZStorage};

use super::CacheError;

/// Byte and GC counters of a backend, used for WA and reporting.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BackendMetrics {
    /// Region bytes the cache asked the backend to write.
    pub cache_bytes: u64,
    /// Bytes that reached the medium, GC copies included.
    pub device_bytes: u64,
    pub migrated_bytes: u64,
    pub device_read_bytes: u64,
    pub gc_cycles: u64,
    pub empty_zones: Option<usize>,
    /// The device has started reusing reclaimed space.
    pub wrapped: bool,
}

impl BackendMetrics {
    pub fn wa_factor(&self) -> f64 {
        if self.cache_bytes == 0 {
            1.0
        } else {
            self.device_bytes as f64 / self.cache_bytes as f64
        }
    }
}

pub trait RegionBackend {
    fn region_size(&self) -> u64;
    fn write_region(&mut self, virtual_address: u64, payload: &[u8]) -> Result<(), CacheError>;
    fn read_region_range(&self, virtual_address: u64, offset: u64, len: u64) -> Result<Vec<u8>, CacheError>;
    /// Releases a region. Returns `Ok(false)` when it was not mapped.
    fn invalidate_region(&mut self, virtual_address: u64) -> Result<bool, CacheError>;
    /// Zone currently holding a region; `None` on block devices.
    fn zone_of(&self, virtual_address: u64) -> Option<ZoneId>;
    /// Gives the backend a chance to clean up before the next flush.
    fn maintain(&mut self, filter: &mut dyn DropFilter) -> Result<Option<GcStats>, CacheError>;
    fn metrics(&self) -> BackendMetrics;

    fn as_storage(&self) -> Option<&ZStorage> {
        None
    }

    fn as_ftl(&self) -> Option<&Ftl> {
        None
    }
}

impl RegionBackend for ZStorage {
    fn region_size(&self) -> u64 {
        ZStorage::region_size(self)
    }

    fn write_region(&mut self, virtual_address: u64, payload: &[u8]) -> Result<(), CacheError> {
        ZStorage::write_region(self, virtual_address, payload)?;
        Ok(())
    }

    fn read_region_range(&self, virtual_address: u64, offset: u64, len: u64) -> Result<Vec<u8>, CacheError> {
        Ok(ZStorage::read_region_range(self, virtual_address, offset, len)?)
    }

    fn invalidate_region(&mut self, virtual_address: u64) -> Result<bool, CacheError> {
        match ZStorage::invalidate_region(self, virtual_address) {
            Ok(()) => Ok(true),
            Err(StorageError::UnmappedRegion(_)) => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    fn zone_of(&self, virtual_address: u64) -> Option<ZoneId> {
        ZStorage::zone_of(self, virtual_address)
    }

    fn maintain(&mut self, filter: &mut dyn DropFilter) -> Result<Option<GcStats>, CacheError> {
        if self.needs_gc() {
            Ok(Some(self.gc_cycle(filter)?))
        } else {
            Ok(None)
        }
    }

    fn metrics(&self) -> BackendMetrics {
        let s = self.stats();
        let c = self.device().counters();
        BackendMetrics {
            cache_bytes: s.region_bytes_written,
            device_bytes: c.total_appended_bytes,
            migrated_bytes: s.gc_migrated_bytes,
            device_read_bytes: c.total_read_bytes,
            gc_cycles: s.gc_cycles,
            empty_zones: Some(self.empty_zone_count()),
            wrapped: s.wrapped,
        }
    }

    fn as_storage(&self) -> Option<&ZStorage> {
        Some(self)
    }
}

/// Regions laid out at fixed logical offsets of a conventional SSD.
///
/// A block device has no notion of a released region, so invalidation is a
/// no-op and stale pages stay valid until the slot is rewritten.
pub struct FtlBackend {
    ftl: Ftl,
    region_size: u64,
}

impl FtlBackend {
    pub fn new(ftl: Ftl, region_size: u64) -> Result<Self, FtlError> {
        if region_size == 0 || region_size % ftl.config().page_size != 0 {
            return Err(FtlError::InvalidConfig(format!(
                "region size {region_size} is not a multiple of the page size"
            )));
        }
        Ok(FtlBackend { ftl, region_size })
    }

    pub fn ftl(&self) -> &Ftl {
        &self.ftl
    }
}

impl RegionBackend for FtlBackend {
    fn region_size(&self) -> u64 {
        self.region_size
    }

    fn write_region(&mut self, virtual_address: u64, payload: &[u8]) -> Result<(), CacheError> {
        Ok(self.ftl.ftl_write(virtual_address, payload)?)
    }

    fn read_region_range(&self, virtual_address: u64, offset: u64, len: u64) -> Result<Vec<u8>, CacheError> {
        Ok(self.ftl.ftl_read(virtual_address + offset, len)?)
    }

    fn invalidate_region(&mut self, _virtual_address: u64) -> Result<bool, CacheError> {
        Ok(true)
    }

    fn zone_of(&self, _virtual_address: u64) -> Option<ZoneId> {
        None
    }

    fn maintain(&mut self, _filter: &mut dyn DropFilter) -> Result<Option<GcStats>, CacheError> {
        Ok(None)
    }

    fn metrics(&self) -> BackendMetrics {
        let c = self.ftl.counters();
        BackendMetrics {
            cache_bytes: c.host_bytes_written,
            device_bytes: c.nand_bytes_written,
            migrated_bytes: c.nand_bytes_written - c.host_bytes_written,
            device_read_bytes: self.ftl.read_bytes(),
            gc_cycles: c.gc_runs,
            empty_zones: None,
            wrapped: c.erases > 0,
        }
    }

    fn as_ftl(&self) -> Option<&Ftl> {
        Some(&self.ftl)
    }
}
