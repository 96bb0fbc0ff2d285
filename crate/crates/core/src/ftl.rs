//! Page-mapped FTL emulator for a conventional block-interface SSD.
//!
//! Backs the Reg-FIFO / Reg-LRU baselines. Logical pages are remapped on
//! every write, erase blocks are reclaimed by greedy internal GC (minimum
//! valid pages, lowest block index on ties) and the device counts host and
//! NAND bytes separately so that WA = nand / host.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::backing::{open_store, BackingKind, ByteStore};
use crate::PAGE_SIZE;

const UNMAPPED: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FtlError {
    #[error("invalid FTL config: {0}")]
    InvalidConfig(String),
    #[error("range {address}+{len} is outside the exported capacity {capacity}")]
    OutOfRange { address: u64, len: u64, capacity: u64 },
    #[error("write at {address} of {len} bytes is not page aligned")]
    Misaligned { address: u64, len: u64 },
    #[error("logical page {0} has never been written")]
    Unmapped(u64),
    #[error("device busy: no free erase block remains after garbage collection")]
    DeviceBusy,
    #[error("backing store: {0}")]
    Io(String),
}

impl From<std::io::Error> for FtlError {
    fn from(e: std::io::Error) -> Self {
        FtlError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtlConfig {
    pub page_size: u64,
    pub pages_per_block: u32,
    pub block_count: u32,
    /// Reserved blocks divided by exported blocks.
    pub internal_op_ratio: f64,
    pub gc_trigger_free_blocks: u32,
    pub backing: BackingKind,
}

impl Default for FtlConfig {
    fn default() -> Self {
        FtlConfig {
            page_size: PAGE_SIZE,
            pages_per_block: 256,
            block_count: 4096,
            internal_op_ratio: 0.07,
            gc_trigger_free_blocks: 2,
            backing: BackingKind::Memory,
        }
    }
}

impl FtlConfig {
    pub fn physical_pages(&self) -> u64 {
        self.block_count as u64 * self.pages_per_block as u64
    }

    pub fn exported_pages(&self) -> u64 {
        (self.physical_pages() as f64 / (1.0 + self.internal_op_ratio)).floor() as u64
    }

    pub fn exported_capacity(&self) -> u64 {
        self.exported_pages() * self.page_size
    }

    /// Smallest config with the given geometry whose exported capacity is at
    /// least `bytes`.
    pub fn sized_for(bytes: u64, base: FtlConfig) -> FtlConfig {
        let block_bytes = base.page_size * base.pages_per_block as u64;
        let mut blocks = ((bytes as f64 * (1.0 + base.internal_op_ratio)) / block_bytes as f64).ceil() as u32;
        blocks = blocks.max(base.gc_trigger_free_blocks + 2);
        let mut cfg = FtlConfig { block_count: blocks, ..base };
        while cfg.exported_capacity() < bytes {
            cfg.block_count += 1;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), FtlError> {
        let bad = |m: &str| Err(FtlError::InvalidConfig(m.to_string()));
        if self.page_size == 0 || self.pages_per_block == 0 || self.block_count == 0 {
            return bad("page_size, pages_per_block and block_count must be positive");
        }
        if !(self.internal_op_ratio >= 0.0) {
            return bad("internal_op_ratio must be non-negative");
        }
        if self.gc_trigger_free_blocks < 1 {
            return bad("gc_trigger_free_blocks must be at least 1");
        }
        if self.block_count <= self.gc_trigger_free_blocks {
            return bad("block_count must exceed gc_trigger_free_blocks");
        }
        if self.physical_pages() >= UNMAPPED as u64 {
            return bad("too many physical pages");
        }
        if self.exported_pages() == 0 {
            return bad("exported capacity is empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockState {
    Free,
    Active,
    Full,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FtlCounters {
    pub host_bytes_written: u64,
    pub nand_bytes_written: u64,
    pub migrated_pages: u64,
    pub erases: u64,
    pub gc_runs: u64,
}

impl FtlCounters {
    pub fn wa_factor(&self) -> f64 {
        if self.host_bytes_written == 0 {
            1.0
        } else {
            self.nand_bytes_written as f64 / self.host_bytes_written as f64
        }
    }
}

pub struct Ftl {
    config: FtlConfig,
    l2p: Vec<u32>,
    p2l: Vec<u32>,
    block_valid: Vec<u32>,
    block_state: Vec<BlockState>,
    free_blocks: VecDeque<u32>,
    active: Option<(u32, u32)>,
    counters: FtlCounters,
    host_read_bytes: AtomicU64,
    store: Box<dyn ByteStore>,
}

impl Ftl {
    pub fn new(config: FtlConfig) -> Result<Self, FtlError> {
        config.validate()?;
        let store = open_store(config.backing, config.physical_pages() * config.page_size)?;
        Ok(Ftl {
            l2p: vec![UNMAPPED; config.exported_pages() as usize],
            p2l: vec![UNMAPPED; config.physical_pages() as usize],
            block_valid: vec![0; config.block_count as usize],
            block_state: vec![BlockState::Free; config.block_count as usize],
            free_blocks: (0..config.block_count).collect(),
            active: None,
            counters: FtlCounters::default(),
            host_read_bytes: AtomicU64::new(0),
            store,
            config,
        })
    }

    pub fn config(&self) -> &FtlConfig {
        &self.config
    }

    pub fn counters(&self) -> FtlCounters {
        self.counters
    }

    pub fn exported_capacity(&self) -> u64 {
        self.config.exported_capacity()
    }

    /// Bytes read from NAND: host reads plus internal GC copies.
    pub fn read_bytes(&self) -> u64 {
        self.host_read_bytes.load(Ordering::Relaxed) + self.counters.migrated_pages * self.config.page_size
    }

    pub fn free_block_count(&self) -> usize {
        self.free_blocks.len()
    }

    pub fn block_valid_counts(&self) -> &[u32] {
        &self.block_valid
    }

    /// Physical page currently holding a logical page.
    pub fn physical_page(&self, logical_page: u64) -> Option<u32> {
        self.l2p.get(logical_page as usize).copied().filter(|&p| p != UNMAPPED)
    }

    pub fn ftl_write(&mut self, logical_address: u64, payload: &[u8]) -> Result<(), FtlError> {
        let ps = self.config.page_size;
        let len = payload.len() as u64;
        if logical_address % ps != 0 || len % ps != 0 || len == 0 {
            return Err(FtlError::Misaligned { address: logical_address, len });
        }
        if logical_address + len > self.exported_capacity() {
            return Err(FtlError::OutOfRange {
                address: logical_address,
                len,
                capacity: self.exported_capacity(),
            });
        }
        for (i, page) in payload.chunks(ps as usize).enumerate() {
            let lpn = logical_address / ps + i as u64;
            let ppn = self.next_host_page()?;
            self.invalidate(lpn);
            self.program(lpn, ppn, page)?;
            self.counters.host_bytes_written += ps;
        }
        Ok(())
    }

    pub fn ftl_read(&self, logical_address: u64, length: u64) -> Result<Vec<u8>, FtlError> {
        if logical_address + length > self.exported_capacity() {
            return Err(FtlError::OutOfRange {
                address: logical_address,
                len: length,
                capacity: self.exported_capacity(),
            });
        }
        let ps = self.config.page_size;
        let mut out = vec![0u8; length as usize];
        let mut pos = logical_address;
        while pos < logical_address + length {
            let lpn = pos / ps;
            let within = pos % ps;
            let take = (ps - within).min(logical_address + length - pos);
            let ppn = self.physical_page(lpn).ok_or(FtlError::Unmapped(lpn))?;
            let dst = (pos - logical_address) as usize;
            self.store
                .read_at(ppn as u64 * ps + within, &mut out[dst..dst + take as usize])?;
            pos += take;
        }
        self.host_read_bytes.fetch_add(length, Ordering::Relaxed);
        Ok(out)
    }

    /// Greedy internal GC; runs until the free-block count reaches the
    /// trigger or nothing reclaimable remains. Returns migrated pages.
    pub fn ftl_internal_gc(&mut self) -> u64 {
        let mut migrated = 0;
        let trigger = self.config.gc_trigger_free_blocks as usize;
        if self.free_blocks.len() >= trigger {
            return 0;
        }
        self.counters.gc_runs += 1;
        while self.free_blocks.len() < trigger {
            let Some(victim) = self.select_victim() else { break };
            if self.block_valid[victim as usize] == self.config.pages_per_block {
                break;
            }
            match self.reclaim(victim) {
                Ok(n) => migrated += n,
                Err(_) => break,
            }
        }
        migrated
    }

    /// Full block with the fewest valid pages, lowest index on ties.
    pub fn select_victim(&self) -> Option<u32> {
        (0..self.config.block_count)
            .filter(|&b| self.block_state[b as usize] == BlockState::Full)
            .min_by_key(|&b| (self.block_valid[b as usize], b))
    }

    fn invalidate(&mut self, lpn: u64) {
        let old = self.l2p[lpn as usize];
        if old != UNMAPPED {
            self.p2l[old as usize] = UNMAPPED;
            let b = self.block_of(old) as usize;
            self.block_valid[b] -= 1;
            self.l2p[lpn as usize] = UNMAPPED;
        }
    }

    fn block_of(&self, ppn: u32) -> u32 {
        ppn / self.config.pages_per_block
    }

    fn program(&mut self, lpn: u64, ppn: u32, data: &[u8]) -> Result<(), FtlError> {
        self.store.write_at(ppn as u64 * self.config.page_size, data)?;
        self.l2p[lpn as usize] = ppn;
        self.p2l[ppn as usize] = lpn as u32;
        let b = self.block_of(ppn) as usize;
        self.block_valid[b] += 1;
        self.counters.nand_bytes_written += self.config.page_size;
        Ok(())
    }

    fn next_host_page(&mut self) -> Result<u32, FtlError> {
        if self.active.is_none() {
            if self.free_blocks.len() < self.config.gc_trigger_free_blocks as usize {
                self.ftl_internal_gc();
            }
            // GC may have left its own partially filled block active.
            if self.active.is_none() {
                self.open_block()?;
            }
        }
        self.take_active_page()
    }

    fn open_block(&mut self) -> Result<(), FtlError> {
        let block = self.free_blocks.pop_front().ok_or(FtlError::DeviceBusy)?;
        self.block_state[block as usize] = BlockState::Active;
        self.active = Some((block, 0));
        Ok(())
    }

    fn take_active_page(&mut self) -> Result<u32, FtlError> {
        let (block, next) = self.active.ok_or(FtlError::DeviceBusy)?;
        let ppn = block * self.config.pages_per_block + next;
        if next + 1 == self.config.pages_per_block {
            self.block_state[block as usize] = BlockState::Full;
            self.active = None;
        } else {
            self.active = Some((block, next + 1));
        }
        Ok(ppn)
    }

    fn reclaim(&mut self, victim: u32) -> Result<u64, FtlError> {
        let ppb = self.config.pages_per_block;
        let ps = self.config.page_size;
        let mut moved = 0;
        let mut buf = vec![0u8; ps as usize];
        for ppn in victim * ppb..(victim + 1) * ppb {
            let lpn = self.p2l[ppn as usize];
            if lpn == UNMAPPED {
                continue;
            }
            if self.active.is_none() {
                self.open_block()?;
            }
            let dst = self.take_active_page()?;
            self.store.read_at(ppn as u64 * ps, &mut buf)?;
            self.invalidate(lpn as u64);
            self.program(lpn as u64, dst, &buf)?;
            self.counters.migrated_pages += 1;
            moved += 1;
        }
        self.store.discard(victim as u64 * ppb as u64 * ps, ppb as u64 * ps)?;
        self.block_state[victim as usize] = BlockState::Free;
        self.free_blocks.push_back(victim);
        self.counters.erases += 1;
        Ok(moved)
    }

    /// Checks the mapping tables against the per-block valid counters.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut counts = vec![0u32; self.block_valid.len()];
        for (lpn, &ppn) in self.l2p.iter().enumerate() {
            if ppn == UNMAPPED {
                continue;
            }
            if self.p2l[ppn as usize] != lpn as u32 {
                return Err(format!("l2p[{lpn}] = {ppn} but p2l disagrees"));
            }
            counts[self.block_of(ppn) as usize] += 1;
        }
        let mapped_physical = self.p2l.iter().filter(|&&l| l != UNMAPPED).count();
        if mapped_physical != counts.iter().sum::<u32>() as usize {
            return Err("p2l holds entries that l2p does not reference".into());
        }
        if counts != self.block_valid {
            return Err("block valid counters drifted from the mapping".into());
        }
        let c = self.counters;
        if c.nand_bytes_written != c.host_bytes_written + c.migrated_pages * self.config.page_size {
            return Err("nand != host + migrated".into());
        }
        Ok(())
    }
}
