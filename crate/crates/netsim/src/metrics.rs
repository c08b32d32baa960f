use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model: Model,
    pub trigger_id: String,
    pub emit_time_s: f64,
    pub inclusion_time_s: f64,
    pub latency_s: f64,
    pub block_number: u64,
}

pub const CSV_HEADER: &str = "model,trigger_id,emit_time_s,inclusion_time_s,latency_s,block_number";

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{}",
            r.model.as_str(),
            r.trigger_id,
            r.emit_time_s,
            r.inclusion_time_s,
            r.latency_s,
            r.block_number
        )
        .expect("writing to a String");
    }
    out
}

/// A rejected external update, as seen by the node that dropped it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub time_us: u64,
    pub node: usize,
    pub update: String,
    pub reason: String,
}

pub fn rejections_csv(rows: &[RejectionRecord]) -> String {
    let mut out = String::from("time_s,node,update_digest,reason\n");
    for r in rows {
        writeln!(out, "{:.6},{},{},{}", r.time_us as f64 / 1e6, r.node, r.update, r.reason).expect("writing to a String");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: Model,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub stale_rate: f64,
    pub blocks: u64,
    pub records: usize,
    /// Samples emitted whose callback never reached the measured chain.
    pub missing: usize,
    pub mean_block_interval: f64,
}

/// Nearest-rank percentile of sorted data; `q` in (0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = libm::ceil(q * sorted.len() as f64).max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn latency_stats(records: &[MetricsRecord]) -> (f64, f64, f64) {
    let mut xs: Vec<f64> = records.iter().map(|r| r.latency_s).collect();
    xs.sort_by(f64::total_cmp);
    (mean(&xs), percentile(&xs, 0.5), percentile(&xs, 0.95))
}
