//! wasm-bindgen bindings behind `www/index.html`.
//!
//! Every export returns JSON text, so the page needs no generated typings.
//! The functions are ordinary Rust as well and are tested natively.

use std::collections::BTreeMap;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use zonecache::device::ZoneState;
use zonecache::harness::{self, ExperimentConfig, WorkloadSource};
use zonecache::schemes::Engine;
use zonecache::workload::{key_rank, Generator, OpKind, WorkloadSpec};
use zonecache::zstorage::compute_min_op;
use zonecache::KIB;

#[derive(Serialize)]
struct Plan {
    r_op: f64,
    r_invalid: f64,
}

/// Minimum OP ratio for a cache write rate, GC throughput and skew `k`.
#[wasm_bindgen]
pub fn op_plan(t_cache: f64, t_gc: f64, k: f64) -> Result<String, String> {
    let p = compute_min_op(t_cache, t_gc, k).map_err(|e| e.to_string())?;
    Ok(json(&Plan { r_op: p.r_op, r_invalid: p.r_invalid }))
}

/// Shape of the small in-memory device every demo run uses.
struct Setup<'a> {
    scheme: &'a str,
    zone_count: u32,
    zone_kib: u32,
    region_kib: u32,
    vop_ratio: f64,
    op_ratio: f64,
    seed: u32,
}

impl Setup<'_> {
    fn config(&self, ops: u64) -> Result<ExperimentConfig, String> {
        let region = self.region_kib as u64 * KIB;
        let pairs = [
            ("scheme", self.scheme.to_string()),
            ("backing", "memory".into()),
            ("zone_count", self.zone_count.to_string()),
            ("zone_capacity", format!("{}KiB", self.zone_kib)),
            ("region_size", format!("{}KiB", self.region_kib)),
            ("vop_ratio", self.vop_ratio.to_string()),
            ("op_ratio", self.op_ratio.to_string()),
            ("object_size_min", "1KiB".into()),
            ("object_size_max", format!("{}", (region / 8).clamp(KIB, 256 * KIB))),
            ("op_count", ops.to_string()),
            ("interval_ops", (ops / 100).max(1).to_string()),
            ("seed", self.seed.to_string()),
        ];
        let mut map: BTreeMap<String, String> = pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        if self.scheme == "zns_direct" {
            map.insert("region_size".into(), format!("{}KiB", self.zone_kib));
        }
        ExperimentConfig::from_kv(&map).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct Point {
    ops: u64,
    hit_ratio: f64,
    wa: f64,
    empty_zones: Option<usize>,
    stage: &'static str,
}

#[derive(Serialize)]
struct Simulation {
    scheme: &'static str,
    points: Vec<Point>,
    stable_hit_ratio: Option<f64>,
    stable_ops_per_sim_sec: Option<f64>,
    final_wa: f64,
    gc_cycles: u64,
    dropped_regions: u64,
    corruptions: u64,
}

/// Runs one experiment to completion and returns its interval series.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    scheme: &str,
    zone_count: u32,
    zone_kib: u32,
    region_kib: u32,
    vop_ratio: f64,
    op_ratio: f64,
    ops: u32,
    seed: u32,
) -> Result<String, String> {
    let setup = Setup { scheme, zone_count, zone_kib, region_kib, vop_ratio, op_ratio, seed };
    let mut cfg = setup.config(ops as u64)?;
    cfg.write_multiple = None;
    let report = harness::run(&cfg).map_err(|e| e.to_string())?;
    let points = report
        .rows
        .iter()
        .map(|r| Point {
            ops: r.ops,
            hit_ratio: r.hit_ratio(),
            wa: r.wa_cum(),
            empty_zones: r.empty_zones,
            stage: r.stage.as_str(),
        })
        .collect();
    let s = &report.summary;
    Ok(json(&Simulation {
        scheme: s.scheme.as_str(),
        points,
        stable_hit_ratio: s.stable_hit_ratio,
        stable_ops_per_sim_sec: s.stable_throughput,
        final_wa: s.final_wa,
        gc_cycles: s.gc_cycles,
        dropped_regions: s.dropped_regions,
        corruptions: s.corruptions,
    }))
}

#[derive(Serialize)]
struct ZoneView {
    state: &'static str,
    /// Write pointer over capacity.
    written: f64,
    /// Valid bytes over capacity.
    valid: f64,
    resets: u64,
}

#[derive(Serialize)]
struct Snapshot {
    ops: u64,
    hits: u64,
    misses: u64,
    wa: f64,
    gc_cycles: u64,
    empty_zones: Option<usize>,
    evicted_regions: u64,
    dropped_regions: u64,
    zones: Vec<ZoneView>,
}

/// A simulation advanced a few operations at a time, for the zone map view.
#[wasm_bindgen]
pub struct Explorer {
    engine: Engine,
    ops: Generator,
    workload: WorkloadSpec,
    done: u64,
    hits: u64,
    misses: u64,
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(
        scheme: &str,
        zone_count: u32,
        zone_kib: u32,
        region_kib: u32,
        vop_ratio: f64,
        seed: u32,
    ) -> Result<Explorer, String> {
        let setup = Setup { scheme, zone_count, zone_kib, region_kib, vop_ratio, op_ratio: 0.07, seed };
        let cfg = setup.config(u64::MAX / 2)?;
        let WorkloadSource::Generated(workload) = cfg.workload else {
            return Err("explorer needs a generated workload".into());
        };
        let engine = cfg.scheme.build().map_err(|e| e.to_string())?;
        let ops = workload.generate().map_err(|e| e.to_string())?;
        Ok(Explorer { engine, ops, workload, done: 0, hits: 0, misses: 0 })
    }

    /// Runs `n` more operations and returns a snapshot.
    pub fn step(&mut self, n: u32) -> Result<String, String> {
        for _ in 0..n {
            let Some(op) = self.ops.next() else { break };
            let e = |e: zonecache::cache::CacheError| e.to_string();
            match op.kind {
                OpKind::Set => {
                    let size = op.size.unwrap_or(self.workload.object_size_min);
                    self.engine.insert(&op.key, &vec![0x5a; size as usize]).map_err(e)?;
                }
                OpKind::Get => {
                    if self.engine.lookup(&op.key).map_err(e)?.is_some() {
                        self.hits += 1;
                    } else {
                        self.misses += 1;
                        let size = key_rank(&op.key).map_or(self.workload.object_size_min, |r| self.workload.size_of(r));
                        self.engine.insert(&op.key, &vec![0xa5; size as usize]).map_err(e)?;
                    }
                }
            }
            self.done += 1;
        }
        Ok(self.snapshot())
    }

    pub fn snapshot(&self) -> String {
        let m = self.engine.metrics();
        let zones = match self.engine.storage() {
            Some(st) => {
                let cap = st.device().zone_capacity() as f64;
                (0..st.zone_count())
                    .map(|z| {
                        let snap = st.device().zone(z).expect("zone id in range");
                        ZoneView {
                            state: match snap.state {
                                ZoneState::Empty => "empty",
                                ZoneState::Open => "open",
                                ZoneState::Full => "full",
                            },
                            written: snap.write_pointer as f64 / cap,
                            valid: st.zmap().valid_bytes(z) as f64 / cap,
                            resets: snap.reset_count,
                        }
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        json(&Snapshot {
            ops: self.done,
            hits: self.hits,
            misses: self.misses,
            wa: m.wa_factor(),
            gc_cycles: m.backend.gc_cycles,
            empty_zones: m.backend.empty_zones,
            evicted_regions: m.cache.evicted_regions,
            dropped_regions: m.cache.dropped_regions,
            zones,
        })
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}
