//! CSV rendering of a metrics report.

use std::io::{self, Write};

use super::MetricsReport;

pub const CSV_HEADER: &str =
    "interval,ops,hits,misses,hit_ratio,cache_bytes,device_bytes,wa_cum,gc_migrated_bytes,empty_zones,stage";

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "na".to_string(), |x| format!("{x:.digits$}"))
}

/// One row per interval, then a `#summary` line. Block-device schemes
/// leave `empty_zones` blank.
pub fn write_csv<W: Write>(mut out: W, report: &MetricsReport) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{:.4},{},{},{:.4},{},{},{}",
            r.interval,
            r.ops,
            r.hits,
            r.misses,
            r.hit_ratio(),
            r.cache_bytes,
            r.device_bytes,
            r.wa_cum(),
            r.gc_migrated_bytes,
            r.empty_zones.map(|z| z.to_string()).unwrap_or_default(),
            r.stage,
        )?;
    }
    let s = &report.summary;
    writeln!(
        out,
        "#summary scheme={} ops={} stable_hit_ratio={} stable_ops_per_sim_sec={} final_wa={:.4} gc_cycles={} \
         evicted_regions={} dropped_regions={} verified_hits={} integrity_checked={} corruptions={} measured_k={}",
        s.scheme,
        s.ops,
        opt(s.stable_hit_ratio, 4),
        opt(s.stable_throughput, 1),
        s.final_wa,
        s.gc_cycles,
        s.evicted_regions,
        s.dropped_regions,
        s.verified_hits,
        s.integrity_checked,
        s.corruptions,
        opt(s.measured_k, 3),
    )?;
    out.flush()
}
