use std::collections::BTreeMap;

use proptest::prelude::*;

use zonecache::device::{DeviceConfig, DeviceError, ZnsDevice, ZoneState};
use zonecache::ftl::{Ftl, FtlConfig};
use zonecache::schemes::{SchemeName, SchemeSpec};
use zonecache::workload::{parse_line, CacheOp, OpKind};
use zonecache::zstorage::ZMap;
use zonecache::PAGE_SIZE;

#[derive(Debug, Clone)]
enum DevOp {
    Append { zone: u32, pages: u64 },
    Reset { zone: u32 },
    Finish { zone: u32 },
}

fn dev_op() -> impl Strategy<Value = DevOp> {
    prop_oneof![
        6 => (0u32..4, 1u64..4).prop_map(|(zone, pages)| DevOp::Append { zone, pages }),
        1 => (0u32..4).prop_map(|zone| DevOp::Reset { zone }),
        1 => (0u32..4).prop_map(|zone| DevOp::Finish { zone }),
    ]
}

#[derive(Clone, Copy, PartialEq)]
struct ShadowZone {
    wp: u64,
    full: bool,
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn device_tracks_a_write_pointer_model(ops in prop::collection::vec(dev_op(), 1..80)) {
        let cap = 8 * PAGE_SIZE;
        let dev = ZnsDevice::new(DeviceConfig { zone_count: 4, zone_capacity: cap, max_open_zones: 2, ..DeviceConfig::default() }).unwrap();
        let mut shadow = [ShadowZone { wp: 0, full: false }; 4];
        let mut data: Vec<Vec<u8>> = vec![Vec::new(); 4];
        let open = |s: &[ShadowZone; 4]| s.iter().filter(|z| z.wp > 0 && !z.full).count();
        for (i, op) in ops.iter().enumerate() {
            match *op {
                DevOp::Append { zone, pages } => {
                    let z = zone as usize;
                    let payload = vec![(i % 251) as u8; (pages * PAGE_SIZE) as usize];
                    let r = dev.append(zone, &payload);
                    let s = shadow[z];
                    if s.full {
                        prop_assert_eq!(r, Err(DeviceError::ZoneNotWritable(zone)));
                    } else if s.wp + pages * PAGE_SIZE > cap {
                        let is_zone_full = matches!(r, Err(DeviceError::ZoneFull { .. }));
                        prop_assert!(is_zone_full);
                    } else if s.wp == 0 && open(&shadow) >= 2 {
                        prop_assert_eq!(r, Err(DeviceError::MaxOpenZonesExceeded(zone)));
                    } else {
                        prop_assert_eq!(r, Ok(zone as u64 * cap + s.wp));
                        shadow[z].wp += pages * PAGE_SIZE;
                        shadow[z].full = shadow[z].wp == cap;
                        data[z].extend_from_slice(&payload);
                    }
                }
                DevOp::Reset { zone } => {
                    dev.reset(zone).unwrap();
                    shadow[zone as usize] = ShadowZone { wp: 0, full: false };
                    data[zone as usize].clear();
                }
                DevOp::Finish { zone } => {
                    let s = shadow[zone as usize];
                    let r = dev.finish(zone);
                    if s.wp > 0 && !s.full {
                        prop_assert_eq!(r, Ok(()));
                        shadow[zone as usize].full = true;
                    } else {
                        prop_assert_eq!(r, Err(DeviceError::ZoneNotOpen(zone)));
                    }
                }
            }
            prop_assert_eq!(dev.counters().open_zone_count as usize, open(&shadow));
            for z in 0..4u32 {
                let snap = dev.zone(z).unwrap();
                let s = shadow[z as usize];
                prop_assert_eq!(snap.write_pointer, s.wp);
                let state = if s.full { ZoneState::Full } else if s.wp == 0 { ZoneState::Empty } else { ZoneState::Open };
                prop_assert_eq!(snap.state, state);
            }
        }
        for z in 0..4u32 {
            let wp = shadow[z as usize].wp;
            if wp > 0 {
                prop_assert_eq!(&dev.read(z as u64 * cap, wp).unwrap(), &data[z as usize]);
            }
            if wp < cap {
                let past = dev.read(z as u64 * cap + wp, PAGE_SIZE);
                let refused = matches!(past, Err(DeviceError::ReadBeyondWritePointer { .. }));
                prop_assert!(refused);
            }
        }
    }

    #[test]
    fn zmap_agrees_with_two_plain_maps(ops in prop::collection::vec((any::<bool>(), 0u64..16, 0u64..32), 1..200)) {
        let region = 4096;
        let zone_cap = 4 * region;
        let mut zmap = ZMap::new(8, zone_cap, region);
        let mut fwd: BTreeMap<u64, u64> = BTreeMap::new();
        for (insert, v, p) in ops {
            let va = v * region;
            let pa = p * region;
            if insert {
                if fwd.values().any(|&x| x == pa) {
                    continue;
                }
                prop_assert_eq!(zmap.insert(va, pa), fwd.insert(va, pa));
            } else {
                prop_assert_eq!(zmap.remove(va), fwd.remove(&va));
            }
            prop_assert!(zmap.check_consistency().is_ok());
        }
        prop_assert_eq!(zmap.iter().collect::<Vec<_>>(), fwd.iter().map(|(&v, &p)| (v, p)).collect::<Vec<_>>());
        for z in 0..8u32 {
            let in_zone: Vec<(u64, u64)> = fwd.iter().filter(|(_, &p)| p / zone_cap == z as u64).map(|(&v, &p)| (p, v)).collect();
            let mut sorted = in_zone.clone();
            sorted.sort();
            prop_assert_eq!(zmap.zone_entries(z), sorted);
            prop_assert_eq!(zmap.valid_bytes(z), in_zone.len() as u64 * region);
            for (p, v) in in_zone {
                prop_assert_eq!(zmap.reverse_lookup(p), Some(v));
            }
        }
    }

    #[test]
    fn ftl_reads_back_what_was_written(writes in prop::collection::vec((0u64..48, 1u64..4, any::<u8>()), 1..400)) {
        let cfg = FtlConfig { pages_per_block: 8, block_count: 10, internal_op_ratio: 0.25, ..FtlConfig::default() };
        let mut ftl = Ftl::new(cfg).unwrap();
        let pages = ftl.exported_capacity() / PAGE_SIZE;
        let mut shadow: BTreeMap<u64, u8> = BTreeMap::new();
        for (page, len, byte) in writes {
            let page = page % pages;
            let len = len.min(pages - page);
            ftl.ftl_write(page * PAGE_SIZE, &vec![byte; (len * PAGE_SIZE) as usize]).unwrap();
            for p in page..page + len {
                shadow.insert(p, byte);
            }
            prop_assert!(ftl.check_invariants().is_ok());
        }
        for (&p, &b) in &shadow {
            let got = ftl.ftl_read(p * PAGE_SIZE, PAGE_SIZE).unwrap();
            prop_assert!(got.iter().all(|&x| x == b));
        }
        let c = ftl.counters();
        prop_assert_eq!(c.nand_bytes_written, c.host_bytes_written + c.migrated_pages * PAGE_SIZE);
        prop_assert!(c.wa_factor() >= 1.0);
    }

    #[test]
    fn trace_lines_round_trip(key in "[a-z][a-z0-9_]{0,12}", size in 1u64..1_000_000, set in any::<bool>()) {
        let op = if set {
            CacheOp { kind: OpKind::Set, key, size: Some(size) }
        } else {
            CacheOp { kind: OpKind::Get, key, size: None }
        };
        prop_assert_eq!(parse_line(&op.to_string()).unwrap(), Some(op));
    }
}

fn scheme_strategy() -> impl Strategy<Value = SchemeName> {
    prop::sample::select(vec![
        SchemeName::ZCacheLib,
        SchemeName::ZnsMiddleLru,
        SchemeName::ZnsMiddleFifo,
        SchemeName::ZnsDirect,
        SchemeName::RegLru,
        SchemeName::RegFifo,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_keeps_invariants_and_payloads(
        name in scheme_strategy(),
        vop in prop::sample::select(vec![0.0, 0.3, 1.0]),
        ops in prop::collection::vec((any::<bool>(), 0u32..60, 1u64..6000), 50..600),
    ) {
        let device = DeviceConfig { zone_count: 12, zone_capacity: 64 * 1024, max_open_zones: 4, ..DeviceConfig::default() };
        let mut spec = SchemeSpec::new(name, device);
        if name != SchemeName::ZnsDirect {
            spec.region_size = 16 * 1024;
        }
        spec.vop_ratio = vop;
        let mut engine = spec.build().unwrap();
        let mut latest: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for (i, (set, k, len)) in ops.into_iter().enumerate() {
            let key = format!("k{k}");
            if set {
                let v: Vec<u8> = (0..len).map(|j| (i as u64 * 13 + j) as u8).collect();
                engine.insert(&key, &v).unwrap();
                latest.insert(key, v);
            } else if let Some(got) = engine.lookup(&key).unwrap() {
                prop_assert_eq!(Some(&got), latest.get(&key));
            }
            let inv = engine.check_invariants();
            prop_assert!(inv.is_ok(), "{:?}", inv);
        }
        for key in engine.cached_keys() {
            let got = engine.peek(&key).unwrap();
            prop_assert_eq!(got.as_ref(), latest.get(&key));
        }
        let m = engine.metrics();
        prop_assert!(m.backend.device_bytes >= m.backend.cache_bytes);
        if name == SchemeName::ZnsDirect {
            prop_assert_eq!(m.backend.device_bytes, m.backend.cache_bytes);
        }
    }
}
