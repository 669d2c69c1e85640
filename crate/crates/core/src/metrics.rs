//! Latency samples, link utilisation and CSV emission.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::protocol::{AxiOp, BusWidth, NodeId, TxnTag, WIDE_BEAT_BYTES};

/// Clock used to convert cycles into physical bandwidth.
pub const DEFAULT_CLOCK_GHZ: f64 = 1.26;
pub const WIDE_PAYLOAD_BITS: f64 = 512.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencySample {
    pub tag: TxnTag,
    pub src: NodeId,
    pub dst: NodeId,
    pub issue_cycle: u64,
    pub complete_cycle: u64,
    pub class: BusWidth,
    pub op: AxiOp,
    pub hops: u32,
}

impl LatencySample {
    pub fn latency(&self) -> u64 {
        self.complete_cycle - self.issue_cycle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean: f64,
    pub min: u64,
    pub p50: u64,
    pub p99: u64,
    pub max: u64,
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn aggregate(latencies: &[u64]) -> LatencySummary {
    if latencies.is_empty() {
        return LatencySummary::default();
    }
    let mut v = latencies.to_vec();
    v.sort_unstable();
    LatencySummary {
        count: v.len(),
        mean: v.iter().sum::<u64>() as f64 / v.len() as f64,
        min: v[0],
        p50: percentile(&v, 50.0),
        p99: percentile(&v, 99.0),
        max: v[v.len() - 1],
    }
}

/// Summary per hop count.
pub fn aggregate_by_hops(samples: &[LatencySample]) -> BTreeMap<u32, LatencySummary> {
    let mut groups: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.hops).or_default().push(s.latency());
    }
    groups
        .into_iter()
        .map(|(h, v)| (h, aggregate(&v)))
        .collect()
}

/// Transfers seen on one link, as a sorted list of cycles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkActivity {
    cycles: Vec<u64>,
}

impl LinkActivity {
    pub fn record(&mut self, cycle: u64) {
        debug_assert!(self.cycles.last().is_none_or(|&c| c < cycle));
        self.cycles.push(cycle);
    }

    pub fn total(&self) -> u64 {
        self.cycles.len() as u64
    }

    /// Transfers in the inclusive cycle range `[start, end]`.
    pub fn busy_in(&self, start: u64, end: u64) -> u64 {
        if end < start {
            return 0;
        }
        let lo = self.cycles.partition_point(|&c| c < start);
        let hi = self.cycles.partition_point(|&c| c <= end);
        (hi - lo) as u64
    }

    pub fn first(&self) -> Option<u64> {
        self.cycles.first().copied()
    }

    pub fn last(&self) -> Option<u64> {
        self.cycles.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkUtilization {
    pub busy_cycles: u64,
    pub window_cycles: u64,
}

impl LinkUtilization {
    pub fn fraction(&self) -> f64 {
        if self.window_cycles == 0 {
            0.0
        } else {
            self.busy_cycles as f64 / self.window_cycles as f64
        }
    }
}

pub fn utilization(link: &LinkActivity, start: u64, end: u64) -> LinkUtilization {
    LinkUtilization {
        busy_cycles: link.busy_in(start, end),
        window_cycles: (end + 1).saturating_sub(start),
    }
}

/// Wide-link utilisation expressed as bandwidth.
pub fn wide_gbps(utilization: f64, clock_ghz: f64) -> f64 {
    utilization * WIDE_PAYLOAD_BITS * clock_ghz
}

/// Payload utilisation of a wide stream: delivered bytes against one full
/// 64-byte beat per cycle over `[start, end]`.
pub fn stream_utilization(bytes: u64, start: u64, end: u64) -> f64 {
    let cycles = (end + 1).saturating_sub(start);
    if cycles == 0 {
        return 0.0;
    }
    bytes as f64 / (WIDE_BEAT_BYTES as f64 * cycles as f64)
}

/// Steady-state window after dropping the leading `warmup_fraction` of a run.
pub fn steady_window(start: u64, end: u64, warmup_fraction: f64) -> (u64, u64) {
    let len = end.saturating_sub(start);
    let skip = (len as f64 * warmup_fraction.clamp(0.0, 1.0)).floor() as u64;
    (start + skip, end)
}

// ---- CSV -------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct LatencyRow<'a> {
    pub scenario: &'a str,
    pub src_x: i16,
    pub src_y: i16,
    pub dst_x: i16,
    pub dst_y: i16,
    pub hops: u32,
    pub class: &'a str,
    pub op: &'a str,
    pub latency_cycles: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UtilRow {
    pub scenario: String,
    pub link_id: usize,
    pub edge_from: String,
    pub edge_to: String,
    pub class: String,
    pub busy: u64,
    pub window: u64,
    pub utilization: f64,
}

#[derive(Debug, Serialize)]
pub struct HeatmapRow {
    pub x: i16,
    pub y: i16,
    pub value: f64,
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn op_name(op: AxiOp) -> &'static str {
    match op {
        AxiOp::Read => "read",
        AxiOp::Write => "write",
        AxiOp::Atomic => "atomic",
    }
}

pub fn latency_rows<'a>(scenario: &'a str, samples: &[LatencySample]) -> Vec<LatencyRow<'a>> {
    samples
        .iter()
        .map(|s| LatencyRow {
            scenario,
            src_x: s.src.x,
            src_y: s.src.y,
            dst_x: s.dst.x,
            dst_y: s.dst.y,
            hops: s.hops,
            class: match s.class {
                BusWidth::Narrow => "narrow",
                BusWidth::Wide => "wide",
            },
            op: op_name(s.op),
            latency_cycles: s.latency(),
        })
        .collect()
}

/// Grid rows ordered by `y` then `x`; absent cells are skipped.
pub fn heatmap(dims: (usize, usize), value: impl Fn(i16, i16) -> Option<f64>) -> Vec<HeatmapRow> {
    let mut rows = Vec::new();
    for y in 0..dims.1 as i16 {
        for x in 0..dims.0 as i16 {
            if let Some(v) = value(x, y) {
                rows.push(HeatmapRow { x, y, value: v });
            }
        }
    }
    rows
}
