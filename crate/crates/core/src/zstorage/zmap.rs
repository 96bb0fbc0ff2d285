use std::collections::BTreeMap;

use crate::device::ZoneId;

/// Bidirectional region map: virtual region address to device address and
/// back, one entry per region, with per-zone valid statistics.
///
/// Every mutation updates both directions before returning.
#[derive(Debug, Clone)]
pub struct ZMap {
    region_size: u64,
    zone_capacity: u64,
    forward: BTreeMap<u64, u64>,
    reverse: Vec<BTreeMap<u64, u64>>,
    valid_bytes: Vec<u64>,
}

impl ZMap {
    pub fn new(zone_count: u32, zone_capacity: u64, region_size: u64) -> Self {
        ZMap {
            region_size,
            zone_capacity,
            forward: BTreeMap::new(),
            reverse: vec![BTreeMap::new(); zone_count as usize],
            valid_bytes: vec![0; zone_count as usize],
        }
    }

    pub fn zone_of(&self, physical: u64) -> ZoneId {
        (physical / self.zone_capacity) as ZoneId
    }

    pub fn lookup(&self, virtual_address: u64) -> Option<u64> {
        self.forward.get(&virtual_address).copied()
    }

    pub fn reverse_lookup(&self, physical: u64) -> Option<u64> {
        self.reverse
            .get(self.zone_of(physical) as usize)?
            .get(&physical)
            .copied()
    }

    /// Maps `virtual_address` to `physical`, returning the address it
    /// replaced (whose zone loses one valid region).
    pub fn insert(&mut self, virtual_address: u64, physical: u64) -> Option<u64> {
        let old = self.remove(virtual_address);
        let zone = self.zone_of(physical) as usize;
        let clobbered = self.reverse[zone].insert(physical, virtual_address);
        debug_assert!(clobbered.is_none(), "physical address {physical} mapped twice");
        self.forward.insert(virtual_address, physical);
        self.valid_bytes[zone] += self.region_size;
        old
    }

    pub fn remove(&mut self, virtual_address: u64) -> Option<u64> {
        let physical = self.forward.remove(&virtual_address)?;
        let zone = self.zone_of(physical) as usize;
        self.reverse[zone].remove(&physical);
        self.valid_bytes[zone] -= self.region_size;
        Some(physical)
    }

    pub fn valid_bytes(&self, zone: ZoneId) -> u64 {
        self.valid_bytes[zone as usize]
    }

    pub fn valid_regions(&self, zone: ZoneId) -> u32 {
        self.reverse[zone as usize].len() as u32
    }

    /// `(physical, virtual)` pairs of one zone in physical (write) order.
    pub fn zone_entries(&self, zone: ZoneId) -> Vec<(u64, u64)> {
        self.reverse[zone as usize].iter().map(|(&p, &v)| (p, v)).collect()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Forward entries in virtual-address order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.forward.iter().map(|(&v, &p)| (v, p))
    }

    /// Mapped regions whose virtual address falls in `[start, end)`.
    pub fn range(&self, start: u64, end: u64) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.forward.range(start..end).map(|(&v, &p)| (v, p))
    }

    pub fn check_consistency(&self) -> Result<(), String> {
        let mut reverse_total = 0;
        for (zone, entries) in self.reverse.iter().enumerate() {
            reverse_total += entries.len();
            for (&p, &v) in entries {
                if self.zone_of(p) as usize != zone {
                    return Err(format!("reverse entry {p} filed under zone {zone}"));
                }
                if self.forward.get(&v) != Some(&p) {
                    return Err(format!("reverse ({p} -> {v}) has no matching forward entry"));
                }
            }
            if self.valid_bytes[zone] != entries.len() as u64 * self.region_size {
                return Err(format!("zone {zone} valid bytes drifted"));
            }
        }
        if reverse_total != self.forward.len() {
            return Err("forward map has entries missing from the reverse map".into());
        }
        Ok(())
    }
}
