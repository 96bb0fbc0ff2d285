use crate::device::ZoneId;

use super::StorageError;

/// Watermarks in percent of the provisioned zone count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcConfig {
    /// GC starts when empty zones fall below this share.
    pub w_low: f64,
    /// GC stops once empty zones reach this share.
    pub w_high: f64,
}

impl Default for GcConfig {
    fn default() -> Self {
        GcConfig { w_low: 1.0, w_high: 3.0 }
    }
}

impl GcConfig {
    pub fn validate(&self) -> Result<(), StorageError> {
        if !(self.w_low > 0.0 && self.w_low < self.w_high && self.w_high <= 100.0) {
            return Err(StorageError::InvalidConfig(format!(
                "watermarks must satisfy 0 < w_low < w_high <= 100 (got {} / {})",
                self.w_low, self.w_high
            )));
        }
        Ok(())
    }

    /// Empty-zone count below which GC runs: `ceil(w_low% * zones)`.
    pub fn low_threshold(&self, zones: u32) -> usize {
        percent_of(self.w_low, zones)
    }

    /// Empty-zone count at which GC stops: `ceil(w_high% * zones)`.
    pub fn high_threshold(&self, zones: u32) -> usize {
        percent_of(self.w_high, zones)
    }
}

fn percent_of(percent: f64, zones: u32) -> usize {
    // Round away float noise before the ceiling so 3% of 100 stays 3.
    let exact = percent * zones as f64 / 100.0;
    let rounded = (exact * 1e9).round() / 1e9;
    rounded.ceil() as usize
}

/// What GC does with one valid region of the victim zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcAction {
    /// Copy to a write zone and remap.
    Migrate,
    /// Evict from the cache; the mapping is released without copying.
    Drop,
    /// Leave alone: already evicted, or the victim holds a stale copy.
    Skip,
    /// An eviction of this region is in flight; wait for it, then ask again.
    Wait,
}

/// Information handed to the drop filter for each victim region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionProbe {
    pub virtual_address: u64,
    pub victim_zone: ZoneId,
    /// Zone the region is mapped to right now, if mapped at all.
    pub mapped_zone: Option<ZoneId>,
}

/// Cache-side policy consulted by GC for every valid region of a victim.
pub trait DropFilter {
    fn decide(&mut self, probe: &RegionProbe) -> GcAction;

    /// Returns once the in-flight eviction of `virtual_address` has finished.
    fn wait_evicted(&mut self, _virtual_address: u64) {}
}

/// Migrate every valid region (ZNS-Middle behaviour).
#[derive(Debug, Default, Clone, Copy)]
pub struct MigrateAll;

impl DropFilter for MigrateAll {
    fn decide(&mut self, _probe: &RegionProbe) -> GcAction {
        GcAction::Migrate
    }
}

impl<F: FnMut(&RegionProbe) -> GcAction> DropFilter for F {
    fn decide(&mut self, probe: &RegionProbe) -> GcAction {
        self(probe)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GcStats {
    pub migrated_bytes: u64,
    pub migrated_regions: u64,
    pub dropped_regions: u64,
    pub skipped_regions: u64,
    pub waited_regions: u64,
    pub zones_reclaimed: u64,
    pub victims: Vec<VictimRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VictimRecord {
    pub zone: ZoneId,
    pub valid_bytes: u64,
    /// Smallest valid byte count among the other read zones at selection time.
    pub min_other_valid_bytes: Option<u64>,
    /// Victim invalid ratio over the mean invalid ratio of all read zones.
    pub invalidity_skew: Option<f64>,
}

/// Empty-zone counts observed when a GC cycle was entered and when it returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcEvent {
    pub entry_empty: usize,
    pub exit_empty: usize,
    pub low_threshold: usize,
    pub high_threshold: usize,
}
