//! In-memory emulation of a Zoned Namespace SSD.
//!
//! Zones are written only at their write pointer and cleaned only by a
//! whole-zone reset. The first append to an empty zone opens it implicitly;
//! the device enforces the open-zone limit and keeps byte-exact counters of
//! everything appended and read.
//!
//! All operations take `&self`. Appends to different zones may run on
//! different threads; a second append racing on the same zone is rejected
//! with [`DeviceError::ConcurrentAppend`]. Readers register on a zone for
//! the duration of a read, and a reset fails with [`DeviceError::ZoneBusy`]
//! while any reader is registered.

use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::backing::{open_store, BackingKind, ByteStore};
use crate::{MIB, PAGE_SIZE};

pub type ZoneId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeviceError {
    #[error("invalid device config: {0}")]
    InvalidConfig(String),
    #[error("zone {0} does not exist")]
    NoSuchZone(ZoneId),
    #[error("zone {zone}: {requested} bytes requested but only {remaining} remain")]
    ZoneFull { zone: ZoneId, requested: u64, remaining: u64 },
    #[error("opening zone {0} would exceed the open-zone limit")]
    MaxOpenZonesExceeded(ZoneId),
    #[error("zone {0} is full and must be reset before writing")]
    ZoneNotWritable(ZoneId),
    #[error("zone {0} is not open")]
    ZoneNotOpen(ZoneId),
    #[error("zone {0} has an append in progress")]
    ConcurrentAppend(ZoneId),
    #[error("zone {0} is in use by readers or a writer")]
    ZoneBusy(ZoneId),
    #[error("read of {len} bytes at {address} extends past the write pointer")]
    ReadBeyondWritePointer { address: u64, len: u64 },
    #[error("read of {len} bytes at {address} crosses a zone boundary")]
    CrossZoneRead { address: u64, len: u64 },
    #[error("zero-length append")]
    EmptyPayload,
    #[error("backing store: {0}")]
    Io(String),
}

impl From<std::io::Error> for DeviceError {
    fn from(e: std::io::Error) -> Self {
        DeviceError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub zone_count: u32,
    /// Bytes per zone; zone size and zone capacity are the same thing here.
    pub zone_capacity: u64,
    pub max_open_zones: u32,
    /// Bytes per simulated second, used only by the timing model.
    pub read_bandwidth: u64,
    /// Bytes per simulated second, used only by the timing model.
    pub write_bandwidth: u64,
    pub backing: BackingKind,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            zone_count: 64,
            zone_capacity: 64 * MIB,
            max_open_zones: 14,
            read_bandwidth: 3000 * MIB,
            write_bandwidth: 1000 * MIB,
            backing: BackingKind::Memory,
        }
    }
}

impl DeviceConfig {
    pub fn capacity(&self) -> u64 {
        self.zone_count as u64 * self.zone_capacity
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: String| Err(DeviceError::InvalidConfig(m));
        if self.zone_count < 1 {
            return bad("zone_count must be at least 1".into());
        }
        if self.zone_capacity < 1 || self.zone_capacity % PAGE_SIZE != 0 {
            return bad(format!(
                "zone_capacity {} must be a positive multiple of {PAGE_SIZE}",
                self.zone_capacity
            ));
        }
        if self.max_open_zones < 1 || self.max_open_zones > self.zone_count {
            return bad(format!(
                "max_open_zones {} must be within 1..={}",
                self.max_open_zones, self.zone_count
            ));
        }
        if self.read_bandwidth == 0 || self.write_bandwidth == 0 {
            return bad("bandwidths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneState {
    Empty,
    Open,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneSnapshot {
    pub id: ZoneId,
    pub state: ZoneState,
    pub write_pointer: u64,
    pub reset_count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeviceCounters {
    pub total_appended_bytes: u64,
    pub total_read_bytes: u64,
    pub total_resets: u64,
    pub open_zone_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceReport {
    pub zones: Vec<ZoneSnapshot>,
    pub counters: DeviceCounters,
}

#[derive(Debug)]
struct ZoneMeta {
    state: ZoneState,
    write_pointer: u64,
    reset_count: u64,
}

struct ZoneCell {
    meta: Mutex<ZoneMeta>,
    readers: AtomicU32,
    appending: AtomicBool,
}

pub struct ZnsDevice {
    config: DeviceConfig,
    zones: Vec<ZoneCell>,
    store: Box<dyn ByteStore>,
    // Counters are only modified while holding the affected zone's meta lock,
    // and `report` holds every meta lock, so a report is a consistent cut.
    counters: Mutex<DeviceCounters>,
}

/// Shared read registration on one zone; resets fail while it is held.
pub struct ZoneReader<'a> {
    cell: &'a ZoneCell,
}

impl Drop for ZoneReader<'_> {
    fn drop(&mut self) {
        self.cell.readers.fetch_sub(1, Ordering::AcqRel);
    }
}

struct AppendToken<'a>(&'a AtomicBool);

impl Drop for AppendToken<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl ZnsDevice {
    pub fn new(config: DeviceConfig) -> Result<Self, DeviceError> {
        config.validate()?;
        let store = open_store(config.backing, config.capacity())?;
        let zones = (0..config.zone_count)
            .map(|_| ZoneCell {
                meta: Mutex::new(ZoneMeta {
                    state: ZoneState::Empty,
                    write_pointer: 0,
                    reset_count: 0,
                }),
                readers: AtomicU32::new(0),
                appending: AtomicBool::new(false),
            })
            .collect();
        Ok(ZnsDevice {
            config,
            zones,
            store,
            counters: Mutex::new(DeviceCounters::default()),
        })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn zone_capacity(&self) -> u64 {
        self.config.zone_capacity
    }

    pub fn zone_count(&self) -> u32 {
        self.config.zone_count
    }

    fn cell(&self, zone: ZoneId) -> Result<&ZoneCell, DeviceError> {
        self.zones.get(zone as usize).ok_or(DeviceError::NoSuchZone(zone))
    }

    pub fn zone_of(&self, address: u64) -> ZoneId {
        (address / self.config.zone_capacity) as ZoneId
    }

    /// Appends `payload` at the zone's write pointer and returns the
    /// device-global byte address it landed at.
    pub fn append(&self, zone: ZoneId, payload: &[u8]) -> Result<u64, DeviceError> {
        let cell = self.cell(zone)?;
        if payload.is_empty() {
            return Err(DeviceError::EmptyPayload);
        }
        if cell
            .appending
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(DeviceError::ConcurrentAppend(zone));
        }
        let _token = AppendToken(&cell.appending);

        let mut meta = cell.meta.lock().unwrap();
        let len = payload.len() as u64;
        let remaining = self.config.zone_capacity - meta.write_pointer;
        match meta.state {
            ZoneState::Full => return Err(DeviceError::ZoneNotWritable(zone)),
            _ if len > remaining => {
                return Err(DeviceError::ZoneFull { zone, requested: len, remaining })
            }
            ZoneState::Empty => {
                let mut counters = self.counters.lock().unwrap();
                if counters.open_zone_count >= self.config.max_open_zones {
                    return Err(DeviceError::MaxOpenZonesExceeded(zone));
                }
                counters.open_zone_count += 1;
                meta.state = ZoneState::Open;
            }
            ZoneState::Open => {}
        }

        let address = zone as u64 * self.config.zone_capacity + meta.write_pointer;
        if let Err(e) = self.store.write_at(address, payload) {
            if meta.write_pointer == 0 {
                meta.state = ZoneState::Empty;
                self.counters.lock().unwrap().open_zone_count -= 1;
            }
            return Err(e.into());
        }
        meta.write_pointer += len;

        let mut counters = self.counters.lock().unwrap();
        counters.total_appended_bytes += len;
        if meta.write_pointer == self.config.zone_capacity {
            meta.state = ZoneState::Full;
            counters.open_zone_count -= 1;
        }
        Ok(address)
    }

    /// Registers a shared reader on `zone` until the guard is dropped.
    pub fn acquire_reader(&self, zone: ZoneId) -> Result<ZoneReader<'_>, DeviceError> {
        let cell = self.cell(zone)?;
        cell.readers.fetch_add(1, Ordering::AcqRel);
        Ok(ZoneReader { cell })
    }

    pub fn read(&self, address: u64, length: u64) -> Result<Vec<u8>, DeviceError> {
        let mut buf = vec![0u8; length as usize];
        self.read_into(address, &mut buf)?;
        Ok(buf)
    }

    pub fn read_into(&self, address: u64, buf: &mut [u8]) -> Result<(), DeviceError> {
        let length = buf.len() as u64;
        let zone = self.zone_of(address);
        let offset = address % self.config.zone_capacity;
        if offset + length > self.config.zone_capacity {
            return Err(DeviceError::CrossZoneRead { address, len: length });
        }
        let _reader = self.acquire_reader(zone)?;
        let cell = &self.zones[zone as usize];
        {
            let meta = cell.meta.lock().unwrap();
            if offset + length > meta.write_pointer || length == 0 && offset >= meta.write_pointer {
                return Err(DeviceError::ReadBeyondWritePointer { address, len: length });
            }
            self.counters.lock().unwrap().total_read_bytes += length;
        }
        // Bytes below the write pointer are immutable until a reset, and the
        // reader registration keeps resets out.
        self.store.read_at(address, buf)?;
        Ok(())
    }

    pub fn reset(&self, zone: ZoneId) -> Result<(), DeviceError> {
        let cell = self.cell(zone)?;
        let mut meta = cell.meta.lock().unwrap();
        if cell.readers.load(Ordering::Acquire) > 0 || cell.appending.load(Ordering::Acquire) {
            return Err(DeviceError::ZoneBusy(zone));
        }
        if meta.write_pointer > 0 {
            self.store.discard(
                zone as u64 * self.config.zone_capacity,
                self.config.zone_capacity,
            )?;
        }
        let mut counters = self.counters.lock().unwrap();
        if meta.state == ZoneState::Open {
            counters.open_zone_count -= 1;
        }
        counters.total_resets += 1;
        meta.state = ZoneState::Empty;
        meta.write_pointer = 0;
        meta.reset_count += 1;
        Ok(())
    }

    /// Closes an open zone early; the rest of its capacity is unusable until reset.
    pub fn finish(&self, zone: ZoneId) -> Result<(), DeviceError> {
        let cell = self.cell(zone)?;
        let mut meta = cell.meta.lock().unwrap();
        if meta.state != ZoneState::Open {
            return Err(DeviceError::ZoneNotOpen(zone));
        }
        meta.state = ZoneState::Full;
        self.counters.lock().unwrap().open_zone_count -= 1;
        Ok(())
    }

    pub fn zone(&self, zone: ZoneId) -> Result<ZoneSnapshot, DeviceError> {
        let meta = self.cell(zone)?.meta.lock().unwrap();
        Ok(snapshot(zone, &meta))
    }

    pub fn counters(&self) -> DeviceCounters {
        *self.counters.lock().unwrap()
    }

    pub fn report(&self) -> DeviceReport {
        let guards: Vec<_> = self.zones.iter().map(|c| c.meta.lock().unwrap()).collect();
        let counters = *self.counters.lock().unwrap();
        let zones = guards
            .iter()
            .enumerate()
            .map(|(i, m)| snapshot(i as ZoneId, m))
            .collect();
        DeviceReport { zones, counters }
    }
}

fn snapshot(id: ZoneId, meta: &ZoneMeta) -> ZoneSnapshot {
    ZoneSnapshot {
        id,
        state: meta.state,
        write_pointer: meta.write_pointer,
        reset_count: meta.reset_count,
    }
}
