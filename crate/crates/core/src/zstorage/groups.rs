use std::collections::{BTreeSet, VecDeque};

use crate::device::ZoneId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneGroup {
    Empty,
    Write,
    Read,
}

/// Partition of the provisioned zones into empty, write and read groups.
#[derive(Debug, Clone)]
pub struct ZoneGroups {
    empty: VecDeque<ZoneId>,
    write: Vec<ZoneId>,
    read: BTreeSet<ZoneId>,
    pub min_write_zones: usize,
    pub max_write_zones: usize,
    cursor: usize,
}

impl ZoneGroups {
    pub fn new(zone_count: u32, min_write_zones: usize, max_write_zones: usize) -> Self {
        ZoneGroups {
            empty: (0..zone_count).collect(),
            write: Vec::new(),
            read: BTreeSet::new(),
            min_write_zones,
            max_write_zones,
            cursor: 0,
        }
    }

    pub fn empty_count(&self) -> usize {
        self.empty.len()
    }

    pub fn write_zones(&self) -> &[ZoneId] {
        &self.write
    }

    pub fn read_zones(&self) -> impl Iterator<Item = ZoneId> + '_ {
        self.read.iter().copied()
    }

    pub fn read_count(&self) -> usize {
        self.read.len()
    }

    pub fn empty_zones(&self) -> impl Iterator<Item = ZoneId> + '_ {
        self.empty.iter().copied()
    }

    pub fn group_of(&self, zone: ZoneId) -> Option<ZoneGroup> {
        if self.read.contains(&zone) {
            Some(ZoneGroup::Read)
        } else if self.write.contains(&zone) {
            Some(ZoneGroup::Write)
        } else if self.empty.contains(&zone) {
            Some(ZoneGroup::Empty)
        } else {
            None
        }
    }

    /// Moves the oldest empty zone into the write group.
    pub fn open_write_zone(&mut self) -> Option<ZoneId> {
        if self.write.len() >= self.max_write_zones {
            return None;
        }
        let zone = self.empty.pop_front()?;
        self.write.push(zone);
        Some(zone)
    }

    /// Round-robin choice among current write zones.
    pub fn next_write_zone(&mut self) -> Option<ZoneId> {
        if self.write.is_empty() {
            return None;
        }
        let zone = self.write[self.cursor % self.write.len()];
        self.cursor = self.cursor.wrapping_add(1);
        Some(zone)
    }

    pub fn seal(&mut self, zone: ZoneId) {
        if let Some(pos) = self.write.iter().position(|&z| z == zone) {
            self.write.remove(pos);
            self.read.insert(zone);
        }
    }

    /// Takes a read zone out of circulation while it is being cleaned.
    pub fn take_read(&mut self, zone: ZoneId) -> bool {
        self.read.remove(&zone)
    }

    pub fn release_empty(&mut self, zone: ZoneId) {
        self.empty.push_back(zone);
    }

    pub fn total(&self) -> usize {
        self.empty.len() + self.write.len() + self.read.len()
    }
}
