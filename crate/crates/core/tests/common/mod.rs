#![allow(dead_code)]

pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zonecache::device::DeviceConfig;
use zonecache::schemes::{SchemeName, SchemeSpec};

/// Replays `workloads` random sequences of `ops` operations on a ZLRU cache
/// with no vOP and no reordering and on a plain LRU cache, and returns the
/// first workload whose hit/miss sequences differ.
pub fn zlru_matches_lru(workloads: u64, ops: usize) -> Result<(), String> {
    let device = DeviceConfig { zone_count: 10, zone_capacity: 32 * 1024, max_open_zones: 4, ..DeviceConfig::default() };
    let mut evicting = 0;
    for w in 0..workloads {
        let mut zlru = SchemeSpec::new(SchemeName::ZCacheLib, device.clone());
        zlru.region_size = 8 * 1024;
        zlru.vop_ratio = 0.0;
        zlru.zlru_reorder = false;
        let mut lru = SchemeSpec::new(SchemeName::ZnsMiddleLru, device.clone());
        lru.region_size = 8 * 1024;
        let (mut a, mut b) = (zlru.build().map_err(|e| e.to_string())?, lru.build().map_err(|e| e.to_string())?);
        let mut rng = ChaCha8Rng::seed_from_u64(w);
        let keys = rng.random_range(8..120u32);
        let get_ratio = rng.random_range(0.2..0.95);
        for i in 0..ops {
            let key = format!("k{}", rng.random_range(0..keys).min(rng.random_range(0..keys)));
            let len = rng.random_range(100..3000usize);
            if rng.random_bool(get_ratio) {
                let ha = a.lookup(&key).map_err(|e| e.to_string())?.is_some();
                let hb = b.lookup(&key).map_err(|e| e.to_string())?.is_some();
                if ha != hb {
                    return Err(format!("workload {w}, op {i}: zlru hit={ha}, lru hit={hb}"));
                }
                if !ha {
                    a.insert(&key, &vec![1; len]).map_err(|e| e.to_string())?;
                    b.insert(&key, &vec![1; len]).map_err(|e| e.to_string())?;
                }
            } else {
                a.insert(&key, &vec![2; len]).map_err(|e| e.to_string())?;
                b.insert(&key, &vec![2; len]).map_err(|e| e.to_string())?;
            }
        }
        if a.cache().stats().evicted_regions > 0 {
            evicting += 1;
        }
    }
    if evicting * 2 < workloads {
        return Err(format!("only {evicting} of {workloads} workloads reached eviction"));
    }
    Ok(())
}
