//! Desk-scale zoned-storage flash cache.
//!
//! Layers, bottom up: an emulated ZNS device ([`device`]) and a page-mapped
//! FTL ([`ftl`]) for the conventional-SSD baselines; the region storage
//! engine with host GC ([`zstorage`]); the region-packed cache with
//! zone-aware eviction ([`cache`]); scheme assembly ([`schemes`]); workload
//! generation ([`workload`]) and the experiment runner ([`harness`]).

pub mod backing;
pub mod device;
pub mod ftl;
pub mod zstorage;
pub mod cache;
pub mod schemes;
pub mod workload;
pub mod harness;

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * KIB;
pub const GIB: u64 = 1024 * MIB;
pub const PAGE_SIZE: u64 = 4096;
