//! Region-granular storage engine on top of the ZNS emulator.
//!
//! Each cache region occupies one contiguous slot inside a zone and has one
//! zMap entry. Zones cycle through three groups: empty, write (accepting
//! appends) and read (sealed, GC-eligible). Host GC picks the read zone
//! with the least valid data, asks a [`DropFilter`] what to do with every
//! region still valid in it, and resets the zone.
//!
//! Data is appended before the zMap is updated, so a mapping never points at
//! bytes that are not on the device yet.

mod gc;
mod groups;
mod op;
mod zmap;

pub use gc::{
    DropFilter, GcAction, GcConfig, GcEvent, GcStats, MigrateAll, RegionProbe, VictimRecord,
};
pub use groups::{ZoneGroup, ZoneGroups};
pub use op::{compute_min_op, OpError, OpPlan};
pub use zmap::ZMap;

use thiserror::Error;

use crate::device::{DeviceError, ZnsDevice, ZoneId, ZoneState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StorageError {
    #[error("invalid storage config: {0}")]
    InvalidConfig(String),
    #[error("payload of {got} bytes does not match region size {expected}")]
    SizeMismatch { expected: u64, got: u64 },
    #[error("virtual address {0} is not region aligned")]
    Misaligned(u64),
    #[error("virtual address {0} is not mapped")]
    UnmappedRegion(u64),
    #[error("no writable zone: empty zones exhausted and all write zones full")]
    NoWritableZone,
    #[error("no read zone is available as a GC victim")]
    NoVictimAvailable,
    #[error("GC stalled: {0}")]
    GcStalled(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageConfig {
    pub region_size: u64,
    /// Soft floor on concurrently open write zones.
    pub min_write_zones: usize,
    /// Hard ceiling; never above the device open-zone limit.
    pub max_write_zones: usize,
    pub gc: GcConfig,
    pub gc_enabled: bool,
    /// Reset a read zone as soon as its last valid region goes away, with no
    /// GC cycle (region == zone layouts).
    pub reclaim_empty_zones: bool,
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig {
            region_size: 16 * crate::MIB,
            min_write_zones: 1,
            max_write_zones: 8,
            gc: GcConfig::default(),
            gc_enabled: true,
            reclaim_empty_zones: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StorageStats {
    /// Region bytes written on behalf of the cache (excludes GC copies).
    pub region_bytes_written: u64,
    pub regions_written: u64,
    pub gc_cycles: u64,
    pub gc_migrated_bytes: u64,
    pub gc_migrated_regions: u64,
    pub gc_dropped_regions: u64,
    pub zones_reclaimed: u64,
    /// Zones reset outside GC because their last region was invalidated.
    pub direct_reclaims: u64,
    /// Set by the first append into a zone that had been reset before.
    pub wrapped: bool,
    pub gc_events: Vec<GcEvent>,
    skew_sum: f64,
    skew_samples: u64,
}

impl StorageStats {
    /// Mean measured victim-invalidity skew `k` over all GC victims.
    pub fn measured_k(&self) -> Option<f64> {
        (self.skew_samples > 0).then(|| self.skew_sum / self.skew_samples as f64)
    }
}

/// A GC copy that has been written but not yet published in the zMap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MigrationTicket {
    pub virtual_address: u64,
    pub from: u64,
    pub to: u64,
}

pub struct ZStorage {
    device: ZnsDevice,
    config: StorageConfig,
    zmap: ZMap,
    groups: ZoneGroups,
    stats: StorageStats,
}

const RESET_RETRIES: usize = 10_000;

impl ZStorage {
    pub fn new(device: ZnsDevice, config: StorageConfig) -> Result<Self, StorageError> {
        let zone_capacity = device.zone_capacity();
        let bad = |m: String| Err(StorageError::InvalidConfig(m));
        if config.region_size == 0 || zone_capacity % config.region_size != 0 {
            return bad(format!(
                "zone capacity {zone_capacity} must be a multiple of region size {}",
                config.region_size
            ));
        }
        if config.min_write_zones == 0 || config.min_write_zones > config.max_write_zones {
            return bad("need 1 <= min_write_zones <= max_write_zones".into());
        }
        if config.max_write_zones > device.config().max_open_zones as usize {
            return bad(format!(
                "max_write_zones {} exceeds the device open-zone limit {}",
                config.max_write_zones,
                device.config().max_open_zones
            ));
        }
        if config.gc_enabled {
            config.gc.validate()?;
        }
        let zones = device.zone_count();
        Ok(ZStorage {
            zmap: ZMap::new(zones, zone_capacity, config.region_size),
            groups: ZoneGroups::new(zones, config.min_write_zones, config.max_write_zones),
            stats: StorageStats::default(),
            device,
            config,
        })
    }

    pub fn device(&self) -> &ZnsDevice {
        &self.device
    }

    pub fn config(&self) -> &StorageConfig {
        &self.config
    }

    pub fn zmap(&self) -> &ZMap {
        &self.zmap
    }

    pub fn groups(&self) -> &ZoneGroups {
        &self.groups
    }

    pub fn stats(&self) -> &StorageStats {
        &self.stats
    }

    pub fn region_size(&self) -> u64 {
        self.config.region_size
    }

    pub fn zone_count(&self) -> u32 {
        self.device.zone_count()
    }

    pub fn empty_zone_count(&self) -> usize {
        self.groups.empty_count()
    }

    /// Zone currently holding a region, if mapped.
    pub fn zone_of(&self, virtual_address: u64) -> Option<ZoneId> {
        self.zmap.lookup(virtual_address).map(|p| self.zmap.zone_of(p))
    }

    pub fn low_threshold(&self) -> usize {
        self.config.gc.low_threshold(self.zone_count())
    }

    pub fn high_threshold(&self) -> usize {
        self.config.gc.high_threshold(self.zone_count())
    }

    pub fn needs_gc(&self) -> bool {
        self.config.gc_enabled && self.groups.empty_count() < self.low_threshold()
    }

    pub fn write_region(&mut self, virtual_address: u64, payload: &[u8]) -> Result<u64, StorageError> {
        self.check_region(virtual_address, payload.len() as u64)?;
        let zone = self.pick_write_zone(false)?;
        let physical = self.append_sealing(zone, payload)?;
        if let Some(old) = self.zmap.insert(virtual_address, physical) {
            self.maybe_reclaim(self.zmap.zone_of(old))?;
        }
        self.stats.region_bytes_written += payload.len() as u64;
        self.stats.regions_written += 1;
        Ok(physical)
    }

    pub fn read_region(&self, virtual_address: u64) -> Result<Vec<u8>, StorageError> {
        self.read_region_range(virtual_address, 0, self.config.region_size)
    }

    /// Reads `len` bytes starting `offset` bytes into a region.
    pub fn read_region_range(
        &self,
        virtual_address: u64,
        offset: u64,
        len: u64,
    ) -> Result<Vec<u8>, StorageError> {
        if offset + len > self.config.region_size {
            return Err(StorageError::SizeMismatch {
                expected: self.config.region_size,
                got: offset + len,
            });
        }
        let physical = self
            .zmap
            .lookup(virtual_address)
            .ok_or(StorageError::UnmappedRegion(virtual_address))?;
        Ok(self.device.read(physical + offset, len)?)
    }

    pub fn invalidate_region(&mut self, virtual_address: u64) -> Result<(), StorageError> {
        let physical = self
            .zmap
            .remove(virtual_address)
            .ok_or(StorageError::UnmappedRegion(virtual_address))?;
        self.maybe_reclaim(self.zmap.zone_of(physical))
    }

    /// Read zone with the lowest valid ratio; lowest zone id on ties.
    pub fn select_victim(&self) -> Result<ZoneId, StorageError> {
        self.groups
            .read_zones()
            .min_by_key(|&z| (self.zmap.valid_bytes(z), z))
            .ok_or(StorageError::NoVictimAvailable)
    }

    /// Runs GC from the low watermark up to the high watermark. Returns
    /// empty stats without doing anything when GC is not needed.
    pub fn gc_cycle<F: DropFilter + ?Sized>(&mut self, filter: &mut F) -> Result<GcStats, StorageError> {
        let mut stats = GcStats::default();
        if !self.needs_gc() {
            return Ok(stats);
        }
        let entry_empty = self.groups.empty_count();
        let high = self.high_threshold();
        let limit = 4 * self.zone_count() as u64 + 16;
        while self.groups.empty_count() < high {
            if stats.zones_reclaimed >= limit {
                return Err(StorageError::GcStalled(format!(
                    "{limit} zones reclaimed without reaching {high} empty zones"
                )));
            }
            let victim = self.select_victim().map_err(|_| {
                StorageError::GcStalled(format!(
                    "{} empty zones, high watermark {high}, and no read zone to clean",
                    self.groups.empty_count()
                ))
            })?;
            self.clean_zone(victim, filter, &mut stats)?;
        }
        self.stats.gc_cycles += 1;
        self.stats.gc_events.push(GcEvent {
            entry_empty,
            exit_empty: self.groups.empty_count(),
            low_threshold: self.low_threshold(),
            high_threshold: high,
        });
        Ok(stats)
    }

    fn clean_zone<F: DropFilter + ?Sized>(
        &mut self,
        victim: ZoneId,
        filter: &mut F,
        stats: &mut GcStats,
    ) -> Result<(), StorageError> {
        let record = self.victim_record(victim);
        if let Some(k) = record.invalidity_skew {
            self.stats.skew_sum += k;
            self.stats.skew_samples += 1;
        }
        stats.victims.push(record);
        self.groups.take_read(victim);

        for (physical, virtual_address) in self.zmap.zone_entries(victim) {
            let mut waits = 0;
            loop {
                let probe = RegionProbe {
                    virtual_address,
                    victim_zone: victim,
                    mapped_zone: self.zone_of(virtual_address),
                };
                match filter.decide(&probe) {
                    GcAction::Migrate => {
                        let ticket = self.begin_migration(virtual_address, physical)?;
                        if let Some(ticket) = ticket {
                            if self.commit_migration(ticket) {
                                stats.migrated_regions += 1;
                                stats.migrated_bytes += self.config.region_size;
                            }
                        }
                    }
                    GcAction::Drop => {
                        if self.zmap.lookup(virtual_address) == Some(physical) {
                            self.zmap.remove(virtual_address);
                        }
                        stats.dropped_regions += 1;
                        self.stats.gc_dropped_regions += 1;
                    }
                    GcAction::Skip => stats.skipped_regions += 1,
                    GcAction::Wait => {
                        waits += 1;
                        if waits > 1 {
                            return Err(StorageError::GcStalled(format!(
                                "region {virtual_address} still evicting after wait"
                            )));
                        }
                        stats.waited_regions += 1;
                        filter.wait_evicted(virtual_address);
                        continue;
                    }
                }
                break;
            }
        }

        // Whatever is still mapped here belongs to regions the cache already
        // evicted; the reset releases it.
        for (_, virtual_address) in self.zmap.zone_entries(victim) {
            self.zmap.remove(virtual_address);
        }
        self.reset_zone(victim)?;
        stats.zones_reclaimed += 1;
        self.stats.zones_reclaimed += 1;
        Ok(())
    }

    /// Copies a region out of `from` into a write zone. Returns `None` when
    /// the region no longer lives at `from`. The copy is invisible until
    /// [`commit_migration`](Self::commit_migration).
    pub fn begin_migration(
        &mut self,
        virtual_address: u64,
        from: u64,
    ) -> Result<Option<MigrationTicket>, StorageError> {
        if self.zmap.lookup(virtual_address) != Some(from) {
            return Ok(None);
        }
        let data = self.device.read(from, self.config.region_size)?;
        let zone = self.pick_write_zone(true)?;
        let to = self.append_sealing(zone, &data)?;
        self.stats.gc_migrated_bytes += self.config.region_size;
        self.stats.gc_migrated_regions += 1;
        Ok(Some(MigrationTicket { virtual_address, from, to }))
    }

    /// Publishes a migrated copy unless the region was invalidated or
    /// rewritten meanwhile, in which case the copy stays dead.
    pub fn commit_migration(&mut self, ticket: MigrationTicket) -> bool {
        if self.zmap.lookup(ticket.virtual_address) != Some(ticket.from) {
            return false;
        }
        self.zmap.insert(ticket.virtual_address, ticket.to);
        true
    }

    fn victim_record(&self, victim: ZoneId) -> VictimRecord {
        let cap = self.device.zone_capacity() as f64;
        let valid_bytes = self.zmap.valid_bytes(victim);
        let min_other_valid_bytes = self
            .groups
            .read_zones()
            .filter(|&z| z != victim)
            .map(|z| self.zmap.valid_bytes(z))
            .min();
        let read = self.groups.read_count();
        let mean_invalid = self
            .groups
            .read_zones()
            .map(|z| 1.0 - self.zmap.valid_bytes(z) as f64 / cap)
            .sum::<f64>()
            / read.max(1) as f64;
        let victim_invalid = 1.0 - valid_bytes as f64 / cap;
        VictimRecord {
            zone: victim,
            valid_bytes,
            min_other_valid_bytes,
            invalidity_skew: (mean_invalid > 0.0).then(|| victim_invalid / mean_invalid),
        }
    }

    fn check_region(&self, virtual_address: u64, len: u64) -> Result<(), StorageError> {
        if len != self.config.region_size {
            return Err(StorageError::SizeMismatch { expected: self.config.region_size, got: len });
        }
        if virtual_address % self.config.region_size != 0 {
            return Err(StorageError::Misaligned(virtual_address));
        }
        Ok(())
    }

    fn pick_write_zone(&mut self, for_gc: bool) -> Result<ZoneId, StorageError> {
        if !for_gc {
            while self.groups.write_zones().len() < self.groups.min_write_zones {
                match self.groups.open_write_zone() {
                    Some(z) => self.note_open(z),
                    None => break,
                }
            }
        }
        if self.groups.write_zones().is_empty() {
            let z = self.groups.open_write_zone().ok_or(StorageError::NoWritableZone)?;
            self.note_open(z);
        }
        self.groups.next_write_zone().ok_or(StorageError::NoWritableZone)
    }

    fn note_open(&mut self, zone: ZoneId) {
        if !self.stats.wrapped && self.device.zone(zone).is_ok_and(|z| z.reset_count > 0) {
            self.stats.wrapped = true;
        }
    }

    fn append_sealing(&mut self, zone: ZoneId, payload: &[u8]) -> Result<u64, StorageError> {
        let physical = self.device.append(zone, payload)?;
        if self.device.zone(zone)?.state == ZoneState::Full {
            self.groups.seal(zone);
        }
        Ok(physical)
    }

    fn maybe_reclaim(&mut self, zone: ZoneId) -> Result<(), StorageError> {
        if self.config.reclaim_empty_zones
            && self.zmap.valid_regions(zone) == 0
            && self.groups.take_read(zone)
        {
            self.reset_zone(zone)?;
            self.stats.direct_reclaims += 1;
        }
        Ok(())
    }

    fn reset_zone(&mut self, zone: ZoneId) -> Result<(), StorageError> {
        for _ in 0..RESET_RETRIES {
            match self.device.reset(zone) {
                Ok(()) => {
                    self.groups.release_empty(zone);
                    return Ok(());
                }
                Err(DeviceError::ZoneBusy(_)) => std::thread::yield_now(),
                Err(e) => return Err(e.into()),
            }
        }
        Err(StorageError::GcStalled(format!("zone {zone} stayed busy")))
    }

    /// Verifies the zMap against itself, the zone groups and the device.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.zmap.check_consistency()?;
        let zones = self.zone_count() as usize;
        if self.groups.total() != zones {
            return Err(format!("zone groups cover {} of {zones} zones", self.groups.total()));
        }
        if self.groups.write_zones().len() > self.config.max_write_zones {
            return Err("write group above its hard limit".into());
        }
        for z in 0..zones as ZoneId {
            let snap = self.device.zone(z).map_err(|e| e.to_string())?;
            match self.groups.group_of(z) {
                Some(ZoneGroup::Empty) if snap.state != ZoneState::Empty => {
                    return Err(format!("zone {z} grouped empty but device says {:?}", snap.state))
                }
                Some(ZoneGroup::Read) if snap.state != ZoneState::Full => {
                    return Err(format!("zone {z} grouped read but device says {:?}", snap.state))
                }
                Some(ZoneGroup::Write) if snap.state == ZoneState::Full => {
                    return Err(format!("zone {z} grouped write but is full"))
                }
                None => return Err(format!("zone {z} is in no group")),
                _ => {}
            }
            for (p, _) in self.zmap.zone_entries(z) {
                if p % self.device.zone_capacity() + self.config.region_size > snap.write_pointer {
                    return Err(format!("mapping {p} points past zone {z}'s write pointer"));
                }
            }
        }
        let appended = self.device.counters().total_appended_bytes;
        if appended != self.stats.region_bytes_written + self.stats.gc_migrated_bytes {
            return Err("device bytes != cache bytes + GC bytes".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceConfig;
    use crate::KIB;

    const REGION: u64 = 128 * KIB;
    const ZONE: u64 = 1024 * KIB;

    fn storage(zones: u32, gc_enabled: bool) -> ZStorage {
        let dev = ZnsDevice::new(DeviceConfig {
            zone_count: zones,
            zone_capacity: ZONE,
            max_open_zones: zones.min(4),
            ..DeviceConfig::default()
        })
        .unwrap();
        ZStorage::new(
            dev,
            StorageConfig {
                region_size: REGION,
                min_write_zones: 1,
                max_write_zones: zones.min(4) as usize,
                gc_enabled,
                ..StorageConfig::default()
            },
        )
        .unwrap()
    }

    fn payload(tag: u8) -> Vec<u8> {
        vec![tag; REGION as usize]
    }

    #[test]
    fn second_region_in_second_zone_pairs() {
        let mut s = storage(4, false);
        // Region 0 fills zone 0 completely, so region 1 starts zone 1.
        for i in 0..8u64 {
            s.write_region(i * REGION + 10 * REGION, &payload(0)).unwrap();
        }
        let p = s.write_region(131_072, &payload(1)).unwrap();
        assert_eq!(p, 1_048_576);
        assert_eq!(s.zmap().lookup(131_072), Some(1_048_576));
        assert_eq!(s.zmap().reverse_lookup(1_048_576), Some(131_072));
        s.check_invariants().unwrap();
    }

    #[test]
    fn rewrite_invalidates_old_zone() {
        let mut s = storage(4, false);
        let first = s.write_region(0, &payload(1)).unwrap();
        let zone = s.zmap().zone_of(first);
        assert_eq!(s.zmap().valid_regions(zone), 1);
        for i in 1..8u64 {
            s.write_region(i * REGION, &payload(2)).unwrap();
        }
        s.write_region(0, &payload(3)).unwrap();
        assert_eq!(s.zmap().valid_regions(zone), 7);
        assert_eq!(s.read_region(0).unwrap(), payload(3));
    }

    #[test]
    fn exhaustion_without_gc() {
        let mut s = storage(2, false);
        for i in 0..16u64 {
            s.write_region(i * REGION, &payload(i as u8)).unwrap();
        }
        assert_eq!(s.write_region(0, &payload(0)), Err(StorageError::NoWritableZone));
    }

    #[test]
    fn size_and_alignment_checks() {
        let mut s = storage(2, false);
        assert!(matches!(s.write_region(0, &[0u8; 10]), Err(StorageError::SizeMismatch { .. })));
        assert_eq!(s.write_region(5, &payload(0)), Err(StorageError::Misaligned(5)));
        assert_eq!(s.read_region(0), Err(StorageError::UnmappedRegion(0)));
    }

    #[test]
    fn invalidate_only_region() {
        let mut s = storage(2, false);
        let p = s.write_region(0, &payload(1)).unwrap();
        s.invalidate_region(0).unwrap();
        assert_eq!(s.zmap().valid_bytes(s.zmap().zone_of(p)), 0);
        assert_eq!(s.invalidate_region(0), Err(StorageError::UnmappedRegion(0)));
    }

    #[test]
    fn victim_selection() {
        let mut s = storage(4, false);
        assert_eq!(s.select_victim(), Err(StorageError::NoVictimAvailable));
        for i in 0..24u64 {
            s.write_region(i * REGION, &payload(i as u8)).unwrap();
        }
        // Zones 0..3 full; invalidate 6 in zone 1 and 3 in zone 0.
        for i in [8u64, 9, 10, 11, 12, 13, 0, 1, 2] {
            s.invalidate_region(i * REGION).unwrap();
        }
        assert_eq!(s.select_victim(), Ok(1));
        // Tie: bring zone 0 down to 2 valid as well.
        for i in [3u64, 4, 5] {
            s.invalidate_region(i * REGION).unwrap();
        }
        assert_eq!(s.zmap().valid_regions(0), 2);
        assert_eq!(s.zmap().valid_regions(1), 2);
        assert_eq!(s.select_victim(), Ok(0));
    }

    fn fill_for_gc(s: &mut ZStorage, regions: u64) {
        for i in 0..regions {
            s.write_region(i * REGION, &payload(i as u8)).unwrap();
        }
    }

    #[test]
    fn gc_reclaims_empty_victim_without_migration() {
        // 8 zones x 8 regions; low threshold ceil(8%) = 1, high ceil(24%) = 1.
        let mut s = storage(8, true);
        fill_for_gc(&mut s, 57);
        assert!(s.needs_gc());
        for i in 0..8u64 {
            s.invalidate_region(i * REGION).unwrap();
        }
        let stats = s.gc_cycle(&mut MigrateAll).unwrap();
        assert_eq!(stats.migrated_bytes, 0);
        assert_eq!(stats.zones_reclaimed, 1);
        assert_eq!(s.empty_zone_count(), 1);
        s.check_invariants().unwrap();
    }

    #[test]
    fn gc_migrates_and_preserves_payloads() {
        let mut s = storage(8, true);
        fill_for_gc(&mut s, 57);
        for i in [0u64, 1, 2, 3, 4, 9, 10] {
            s.invalidate_region(i * REGION).unwrap();
        }
        let stats = s.gc_cycle(&mut MigrateAll).unwrap();
        assert_eq!(stats.migrated_regions, 3);
        assert_eq!(stats.victims[0].zone, 0);
        for i in [5u64, 6, 7, 8, 11] {
            assert_eq!(s.read_region(i * REGION).unwrap(), payload(i as u8));
        }
        assert_ne!(s.zone_of(5 * REGION), Some(0));
        s.check_invariants().unwrap();
    }

    #[test]
    fn drop_everything_never_migrates() {
        let mut s = storage(8, true);
        fill_for_gc(&mut s, 57);
        s.invalidate_region(0).unwrap();
        let mut drop_all = |_: &RegionProbe| GcAction::Drop;
        let stats = s.gc_cycle(&mut drop_all).unwrap();
        assert_eq!(stats.migrated_bytes, 0);
        assert_eq!(stats.dropped_regions, 7);
        assert_eq!(s.read_region(REGION), Err(StorageError::UnmappedRegion(REGION)));
        s.check_invariants().unwrap();
    }

    #[test]
    fn gc_not_entered_above_low_watermark() {
        let mut s = storage(8, true);
        fill_for_gc(&mut s, 8);
        let stats = s.gc_cycle(&mut MigrateAll).unwrap();
        assert_eq!(stats, GcStats::default());
        assert_eq!(s.stats().gc_cycles, 0);
    }

    #[test]
    fn migration_skips_region_invalidated_midway() {
        let mut s = storage(8, true);
        fill_for_gc(&mut s, 16);
        let from = s.zmap().lookup(3 * REGION).unwrap();
        let ticket = s.begin_migration(3 * REGION, from).unwrap().unwrap();
        s.invalidate_region(3 * REGION).unwrap();
        assert!(!s.commit_migration(ticket));
        assert_eq!(s.zmap().lookup(3 * REGION), None);
        s.check_invariants().unwrap();
    }

    #[test]
    fn direct_mode_resets_on_last_invalidation() {
        let dev = ZnsDevice::new(DeviceConfig {
            zone_count: 2,
            zone_capacity: ZONE,
            max_open_zones: 2,
            ..DeviceConfig::default()
        })
        .unwrap();
        let mut s = ZStorage::new(
            dev,
            StorageConfig {
                region_size: ZONE,
                min_write_zones: 1,
                max_write_zones: 1,
                gc_enabled: false,
                reclaim_empty_zones: true,
                ..StorageConfig::default()
            },
        )
        .unwrap();
        let full = vec![9u8; ZONE as usize];
        s.write_region(0, &full).unwrap();
        s.write_region(ZONE, &full).unwrap();
        assert_eq!(s.empty_zone_count(), 0);
        s.invalidate_region(0).unwrap();
        assert_eq!(s.empty_zone_count(), 1);
        assert_eq!(s.stats().direct_reclaims, 1);
        s.write_region(0, &full).unwrap();
        assert!(s.stats().wrapped);
        assert_eq!(s.stats().gc_cycles, 0);
        s.check_invariants().unwrap();
    }

    #[test]
    fn config_rejects_bad_geometry() {
        let dev = || {
            ZnsDevice::new(DeviceConfig { zone_count: 4, zone_capacity: ZONE, max_open_zones: 2, ..Default::default() })
                .unwrap()
        };
        let bad = |cfg: StorageConfig| matches!(ZStorage::new(dev(), cfg), Err(StorageError::InvalidConfig(_)));
        assert!(bad(StorageConfig { region_size: 3 * KIB, ..StorageConfig::default() }));
        assert!(bad(StorageConfig { region_size: REGION, max_write_zones: 3, ..StorageConfig::default() }));
        assert!(bad(StorageConfig { region_size: REGION, min_write_zones: 0, max_write_zones: 2, ..StorageConfig::default() }));
    }
}
