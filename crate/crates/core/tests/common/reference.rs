//! An independent, deliberately naive model of cache plus zoned storage,
//! replayed side by side with the real engine on scripted sequences.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zonecache::device::{DeviceConfig, ZoneState};
use zonecache::schemes::{Engine, SchemeName, SchemeSpec};

const REGION: u64 = 4096;
const ZONES: usize = 8;
const SLOTS_PER_ZONE: usize = 2;

#[derive(Debug, Clone)]
enum Op {
    Get(String),
    Set(String),
}

fn key_size(key: &str) -> u64 {
    let n: u64 = key[1..].parse().unwrap();
    600 + (n * 379) % 1400
}

fn value(key: &str, version: u32) -> Vec<u8> {
    let len = key_size(key) as usize;
    let seed = key.bytes().fold(version as u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    (0..len).map(|i| (seed.wrapping_add(i as u64 * 7) % 251) as u8).collect()
}

fn script(seed: u64, len: usize) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=30).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    (0..len)
        .map(|_| {
            let mut x = rng.random::<f64>() * total;
            let mut k = 0;
            while k + 1 < weights.len() && x >= weights[k] {
                x -= weights[k];
                k += 1;
            }
            let key = format!("k{k}");
            if rng.random_bool(0.55) {
                Op::Get(key)
            } else {
                Op::Set(key)
            }
        })
        .collect()
}

// ---------------------------------------------------------------- storage

#[derive(Debug, Clone, Copy, PartialEq)]
enum Verdict {
    Migrate,
    Drop,
    Skip,
}

struct RefZone {
    /// One entry per written slot: the region it still holds, if any.
    slots: Vec<Option<u64>>,
    resets: u64,
}

struct RefStorage {
    zones: Vec<RefZone>,
    empty: VecDeque<usize>,
    open: Option<usize>,
    full: BTreeSet<usize>,
    direct: bool,
    region: u64,
    zone_bytes: u64,
    gc_cycles: u64,
}

impl RefStorage {
    fn new(direct: bool, region: u64, zone_bytes: u64) -> Self {
        RefStorage {
            zones: (0..ZONES).map(|_| RefZone { slots: Vec::new(), resets: 0 }).collect(),
            empty: (0..ZONES).collect(),
            open: None,
            full: BTreeSet::new(),
            direct,
            region,
            zone_bytes,
            gc_cycles: 0,
        }
    }

    fn slots_per_zone(&self) -> usize {
        (self.zone_bytes / self.region) as usize
    }

    fn find(&self, va: u64) -> Option<(usize, usize)> {
        for (z, zone) in self.zones.iter().enumerate() {
            for (s, held) in zone.slots.iter().enumerate() {
                if *held == Some(va) {
                    return Some((z, s));
                }
            }
        }
        None
    }

    fn zone_of(&self, va: u64) -> Option<usize> {
        self.find(va).map(|(z, _)| z)
    }

    fn live(&self, z: usize) -> usize {
        self.zones[z].slots.iter().filter(|s| s.is_some()).count()
    }

    fn append(&mut self, va: u64) {
        let z = match self.open {
            Some(z) => z,
            None => {
                let z = self.empty.pop_front().expect("reference ran out of zones");
                self.open = Some(z);
                z
            }
        };
        self.zones[z].slots.push(Some(va));
        if self.zones[z].slots.len() == self.slots_per_zone() {
            self.open = None;
            self.full.insert(z);
        }
    }

    fn reset(&mut self, z: usize) {
        self.zones[z].slots.clear();
        self.zones[z].resets += 1;
        self.empty.push_back(z);
    }

    fn write(&mut self, va: u64) {
        let old = self.find(va);
        self.append(va);
        if let Some((z, s)) = old {
            self.zones[z].slots[s] = None;
        }
    }

    fn invalidate(&mut self, va: u64) {
        let (z, s) = self.find(va).expect("invalidating an unmapped region");
        self.zones[z].slots[s] = None;
        if self.direct && self.live(z) == 0 && self.full.remove(&z) {
            self.reset(z);
        }
    }

    fn low(&self) -> usize {
        ((ZONES as f64) * 0.01).ceil() as usize
    }

    fn high(&self) -> usize {
        ((ZONES as f64) * 0.03).ceil() as usize
    }

    fn gc(&mut self, decide: &mut dyn FnMut(u64, usize, Option<usize>) -> Verdict) {
        if self.direct || self.empty.len() >= self.low() {
            return;
        }
        while self.empty.len() < self.high() {
            let victim = *self
                .full
                .iter()
                .min_by_key(|&&z| (self.live(z), z))
                .expect("reference has no victim");
            self.full.remove(&victim);
            let held: Vec<(usize, u64)> = self.zones[victim]
                .slots
                .iter()
                .enumerate()
                .filter_map(|(s, v)| v.map(|v| (s, v)))
                .collect();
            for (s, va) in held {
                match decide(va, victim, self.zone_of(va)) {
                    Verdict::Migrate => {
                        self.zones[victim].slots[s] = None;
                        self.append(va);
                    }
                    Verdict::Drop => self.zones[victim].slots[s] = None,
                    Verdict::Skip => {}
                }
            }
            self.reset(victim);
        }
        self.gc_cycles += 1;
    }

    fn zmap(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for (z, zone) in self.zones.iter().enumerate() {
            for (s, held) in zone.slots.iter().enumerate() {
                if let Some(va) = held {
                    out.push((*va, z as u64 * self.zone_bytes + s as u64 * self.region));
                }
            }
        }
        out.sort();
        out
    }

    fn zone_states(&self) -> Vec<(ZoneState, u64, u64)> {
        self.zones
            .iter()
            .map(|z| {
                let wp = z.slots.len() as u64 * self.region;
                let state = if wp == 0 {
                    ZoneState::Empty
                } else if wp == self.zone_bytes {
                    ZoneState::Full
                } else {
                    ZoneState::Open
                };
                (state, wp, z.resets)
            })
            .collect()
    }
}

// ------------------------------------------------------------------ cache

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Fifo,
    Lru,
    Zlru,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Free,
    Buffered,
    Flushed,
}

struct RefCache {
    kind: Kind,
    zdrop: bool,
    vop_ratio: f64,
    region: u64,
    slots: Vec<Slot>,
    free: VecDeque<u32>,
    buffered: Option<u32>,
    fill: u64,
    /// key -> region holding its newest copy
    index: BTreeMap<String, u32>,
    /// Head first.
    main: Vec<u32>,
    vop: Vec<u32>,
    storage: Option<RefStorage>,
}

impl RefCache {
    fn va(&self, r: u32) -> u64 {
        r as u64 * self.region
    }

    fn rebalance(&mut self) {
        if self.kind != Kind::Zlru {
            return;
        }
        let total = self.main.len() + self.vop.len();
        let target = (self.vop_ratio * total as f64 + 1e-9).floor() as usize;
        while self.vop.len() < target && !self.main.is_empty() {
            let r = self.main.pop().unwrap();
            self.vop.insert(0, r);
        }
        while self.vop.len() > target {
            let r = self.vop.remove(0);
            self.main.push(r);
        }
    }

    fn unlist(&mut self, r: u32) {
        self.main.retain(|&x| x != r);
        self.vop.retain(|&x| x != r);
    }

    fn forget_region(&mut self, r: u32) {
        self.index.retain(|_, &mut held| held != r);
    }

    fn evict(&mut self) {
        let r = match self.vop.last().or(self.main.last()) {
            Some(&r) => r,
            None => panic!("reference has nothing to evict"),
        };
        self.unlist(r);
        self.forget_region(r);
        self.rebalance();
        if let Some(st) = self.storage.as_mut() {
            st.invalidate(r as u64 * self.region);
        }
        self.slots[r as usize] = Slot::Free;
        self.free.push_back(r);
    }

    fn gc(&mut self) {
        let Some(mut st) = self.storage.take() else { return };
        let effective = if self.kind == Kind::Zlru { self.vop_ratio } else { 0.0 };
        st.gc(&mut |va, victim, mapped| {
            let r = (va / self.region) as u32;
            if self.slots[r as usize] != Slot::Flushed || mapped != Some(victim) {
                return Verdict::Skip;
            }
            if self.zdrop && (self.vop.contains(&r) || effective >= 1.0) {
                self.unlist(r);
                self.forget_region(r);
                self.slots[r as usize] = Slot::Free;
                self.free.push_back(r);
                self.rebalance();
                Verdict::Drop
            } else {
                Verdict::Migrate
            }
        });
        self.storage = Some(st);
    }

    fn reorder(&mut self) {
        let Some(st) = self.storage.as_ref() else { return };
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for &r in &self.main {
            if let Some(z) = st.zone_of(self.va(r)) {
                *counts.entry(z).or_default() += 1;
            }
        }
        for &r in &self.vop {
            if let Some(z) = st.zone_of(self.va(r)) {
                counts.entry(z).or_default();
            }
        }
        if counts.is_empty() {
            return;
        }
        let avg = counts.values().sum::<u32>() as f64 / counts.len() as f64;
        let cand: BTreeSet<usize> = counts.iter().filter(|(_, &c)| (c as f64) < avg).map(|(&z, _)| z).collect();
        let (sinking, staying): (Vec<u32>, Vec<u32>) =
            self.vop.iter().partition(|&&r| st.zone_of(self.va(r)).is_some_and(|z| cand.contains(&z)));
        self.vop = staying.into_iter().chain(sinking).collect();
    }

    fn flush(&mut self) {
        let Some(r) = self.buffered.take() else { return };
        self.gc();
        if let Some(st) = self.storage.as_mut() {
            st.write(r as u64 * self.region);
        }
        self.fill = 0;
        self.slots[r as usize] = Slot::Flushed;
        self.main.insert(0, r);
        self.rebalance();
        if self.kind == Kind::Zlru {
            self.reorder();
        }
    }

    fn insert(&mut self, key: &str) {
        let len = key_size(key);
        if self.buffered.is_some() && self.fill + len > self.region {
            self.flush();
        }
        if self.buffered.is_none() {
            if self.free.is_empty() {
                self.evict();
            }
            let r = self.free.pop_front().unwrap();
            self.slots[r as usize] = Slot::Buffered;
            self.buffered = Some(r);
        }
        self.fill += len;
        self.index.insert(key.to_string(), self.buffered.unwrap());
    }

    fn lookup(&mut self, key: &str) -> bool {
        let Some(&r) = self.index.get(key) else { return false };
        if self.kind != Kind::Fifo && (self.main.contains(&r) || self.vop.contains(&r)) {
            self.unlist(r);
            self.main.insert(0, r);
            self.rebalance();
        }
        true
    }
}

// ---------------------------------------------------------------- harness

fn device(zone_bytes: u64) -> DeviceConfig {
    DeviceConfig { zone_count: ZONES as u32, zone_capacity: zone_bytes, max_open_zones: 4, ..DeviceConfig::default() }
}

fn spec(name: SchemeName, vop_ratio: f64) -> SchemeSpec {
    let mut s = SchemeSpec::new(name, device(REGION * SLOTS_PER_ZONE as u64));
    if name != SchemeName::ZnsDirect {
        s.region_size = REGION;
    }
    s.vop_ratio = vop_ratio;
    s
}

fn reference_for(s: &SchemeSpec) -> RefCache {
    let n = s.cache_regions();
    let (kind, zdrop) = match s.name {
        SchemeName::ZCacheLib => (Kind::Zlru, true),
        SchemeName::ZnsMiddleFifo | SchemeName::RegFifo => (Kind::Fifo, false),
        _ => (Kind::Lru, false),
    };
    let storage = (!s.name.is_reg())
        .then(|| RefStorage::new(s.name == SchemeName::ZnsDirect, s.region_size, s.device.zone_capacity));
    RefCache {
        kind,
        zdrop,
        vop_ratio: s.vop_ratio,
        region: s.region_size,
        slots: vec![Slot::Free; n as usize],
        free: (0..n).collect(),
        buffered: None,
        fill: 0,
        index: BTreeMap::new(),
        main: Vec::new(),
        vop: Vec::new(),
        storage,
    }
}

struct Outcome {
    hits: Vec<bool>,
}

fn replay(engine: &mut Engine, model: &mut RefCache, ops: &[Op]) -> (Outcome, Outcome) {
    let mut versions: BTreeMap<String, u32> = BTreeMap::new();
    let (mut got, mut want) = (Vec::new(), Vec::new());
    for (i, op) in ops.iter().enumerate() {
        match op {
            Op::Set(k) => {
                let v = versions.entry(k.clone()).or_default();
                *v += 1;
                engine.insert(k, &value(k, *v)).unwrap_or_else(|e| panic!("op {i}: {e}"));
                model.insert(k);
            }
            Op::Get(k) => {
                let hit = engine.lookup(k).unwrap_or_else(|e| panic!("op {i}: {e}"));
                if let Some(bytes) = &hit {
                    assert_eq!(bytes, &value(k, versions[k]), "op {i}: stale or corrupt payload for {k}");
                }
                got.push(hit.is_some());
                want.push(model.lookup(k));
                if hit.is_none() {
                    let v = versions.entry(k.clone()).or_default();
                    *v += 1;
                    engine.insert(k, &value(k, *v)).unwrap_or_else(|e| panic!("op {i}: {e}"));
                    model.insert(k);
                }
            }
        }
        engine.check_invariants().unwrap_or_else(|e| panic!("op {i}: {e}"));
    }
    (Outcome { hits: got }, Outcome { hits: want })
}

pub fn check(name: SchemeName, vop_ratio: f64, seed: u64) {
    let s = spec(name, vop_ratio);
    let mut engine = s.build().unwrap();
    let mut model = reference_for(&s);
    let ops = script(seed, 200);
    let (got, want) = replay(&mut engine, &mut model, &ops);
    assert_eq!(got.hits, want.hits, "{name:?} seed {seed}: hit/miss sequence");
    assert!(got.hits.contains(&true) && got.hits.contains(&false));
    if name == SchemeName::ZCacheLib && vop_ratio >= 1.0 {
        assert!(engine.cache().stats().dropped_regions > 0, "seed {seed}: zDrop never fired");
    }
    assert_eq!(engine.cached_keys(), model.index.keys().cloned().collect::<Vec<_>>(), "{name:?}: cached keys");

    let Some(storage) = engine.storage() else { return };
    let st = model.storage.as_ref().unwrap();
    let zmap: Vec<(u64, u64)> = storage.zmap().iter().collect();
    assert_eq!(zmap, st.zmap(), "{name:?} seed {seed}: zMap");
    let zones: Vec<(ZoneState, u64, u64)> = (0..ZONES as u32)
        .map(|z| {
            let snap = storage.device().zone(z).unwrap();
            (snap.state, snap.write_pointer, snap.reset_count)
        })
        .collect();
    assert_eq!(zones, st.zone_states(), "{name:?} seed {seed}: zone states");
    assert_eq!(storage.stats().gc_cycles, st.gc_cycles, "{name:?} seed {seed}: GC cycles");
    if name != SchemeName::ZnsDirect {
        assert!(st.gc_cycles > 0, "{name:?} seed {seed}: script never reached GC");
    }
}

pub const SCHEMES: [SchemeName; 6] = [
    SchemeName::ZCacheLib,
    SchemeName::ZnsMiddleLru,
    SchemeName::ZnsMiddleFifo,
    SchemeName::ZnsDirect,
    SchemeName::RegLru,
    SchemeName::RegFifo,
];
