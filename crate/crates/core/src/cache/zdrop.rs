//! Zone-aware parts of the cache: zLRU candidacy and reordering, and the
//! zDrop filter consulted by host GC.

use std::collections::{BTreeMap, BTreeSet};

use crate::device::ZoneId;
use crate::zstorage::{DropFilter, GcAction, RegionProbe};

use super::{CacheCore, Partition, RegionBackend, RegionStatus, ZCache};

/// Per-zone count of main-partition regions and the zones below average.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneCandidacy {
    /// Zones holding at least one flushed region, with their main-partition
    /// region count.
    pub valid_counts: BTreeMap<ZoneId, u32>,
    pub average: f64,
    pub candidates: BTreeSet<ZoneId>,
}

impl<B: RegionBackend> ZCache<B> {
    pub fn zone_candidacy(&self) -> ZoneCandidacy {
        let list = &self.core.list;
        let mut valid_counts = BTreeMap::new();
        for p in [Partition::Main, Partition::Vop] {
            for region in list.iter(p) {
                if let Some(zone) = self.backend.zone_of(self.core.va(region)) {
                    let c = valid_counts.entry(zone).or_insert(0u32);
                    if p == Partition::Main {
                        *c += 1;
                    }
                }
            }
        }
        if valid_counts.is_empty() {
            return ZoneCandidacy::default();
        }
        let average = valid_counts.values().map(|&c| c as f64).sum::<f64>() / valid_counts.len() as f64;
        let candidates = valid_counts
            .iter()
            .filter(|&(_, &c)| (c as f64) < average)
            .map(|(&z, _)| z)
            .collect();
        ZoneCandidacy { valid_counts, average, candidates }
    }

    /// Moves vOP regions of candidate zones to the vOP tail, keeping their
    /// relative order. Returns how many moved.
    pub fn zlru_reorder(&mut self) -> usize {
        let candidacy = self.zone_candidacy();
        if candidacy.candidates.is_empty() {
            return 0;
        }
        let moving: Vec<u32> = self
            .core
            .list
            .iter(Partition::Vop)
            .filter(|&r| {
                self.backend
                    .zone_of(self.core.va(r))
                    .is_some_and(|z| candidacy.candidates.contains(&z))
            })
            .collect();
        for &r in &moving {
            self.core.list.remove(r);
            self.core.list.push_tail(Partition::Vop, r);
        }
        self.core.stats.reordered_regions += moving.len() as u64;
        moving.len()
    }
}

impl DropFilter for CacheCore {
    fn decide(&mut self, probe: &RegionProbe) -> GcAction {
        let region = probe.virtual_address / self.config.region_size;
        let Some(meta) = self.regions.get(region as usize) else {
            return GcAction::Skip;
        };
        let region = region as u32;
        match meta.status {
            RegionStatus::Evicting => GcAction::Wait,
            RegionStatus::Free | RegionStatus::Buffered | RegionStatus::Evicted => GcAction::Skip,
            RegionStatus::Flushed => {
                if probe.mapped_zone != Some(probe.victim_zone) {
                    GcAction::Skip
                } else if self.config.zdrop
                    && (self.list.partition_of(region) == Some(Partition::Vop)
                        || self.config.effective_vop_ratio() >= 1.0)
                {
                    self.drop_region(region);
                    GcAction::Drop
                } else {
                    GcAction::Migrate
                }
            }
        }
    }

    fn wait_evicted(&mut self, virtual_address: u64) {
        // Single-context mode: the eviction cannot progress on its own, so
        // finish its cache-side teardown here. The owner still calls
        // `evict_complete` to free the slot.
        let region = (virtual_address / self.config.region_size) as usize;
        if let Some(meta) = self.regions.get_mut(region) {
            if meta.status == RegionStatus::Evicting {
                meta.status = RegionStatus::Evicted;
            }
        }
    }
}
