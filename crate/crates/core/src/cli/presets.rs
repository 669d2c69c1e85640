//! Canned experiments. Each returns a structured report that can render its
//! CSV files and a short text summary.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{CliError, Output};
use crate::config::ExperimentConfig;
use crate::endpoints::core::{CoreGen, ScriptOp};
use crate::endpoints::dma::{TransferOp, TransferRecord, TransferSpec};
use crate::endpoints::pattern::{pattern_destination, pattern_op, Pattern};
use crate::endpoints::trace::{mixed_trace, TraceGen};
use crate::endpoints::TagGen;
use crate::engine::{FlitTraceRecord, RouterTraceRecord, RunExit, Simulation};
use crate::fabric::{Attach, NetworkGraph};
use crate::metrics::{
    aggregate, heatmap, latency_rows, stream_utilization, utilization, wide_gbps, write_csv,
    LatencySample, LatencySummary, LinkActivity, UtilRow, DEFAULT_CLOCK_GHZ,
};
use crate::ni::ordering::Ordering;
use crate::ni::BeatRecord;
use crate::protocol::{read_data, AxiOp, BusWidth, ChannelKind, LinkClass, NodeId, TxnId};
use crate::workload::WorkloadFile;

pub fn new_sim(cfg: &ExperimentConfig) -> Result<Simulation, CliError> {
    Ok(Simulation::new(cfg.sim_setup())?)
}

/// Run to completion; any other exit is an error.
pub fn finish(sim: &mut Simulation, max_cycles: u64) -> Result<u64, CliError> {
    match sim.run(max_cycles)? {
        RunExit::Completed { cycle } => Ok(cycle),
        RunExit::MaxCycles { cycle } => Err(CliError::Incomplete {
            cycle,
            outstanding: sim.outstanding(),
        }),
        RunExit::Deadlock(r) => Err(CliError::Deadlock(r)),
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(buf)
}

/// Link into the wide-class NI of `node`.
pub fn wide_ingress(graph: &NetworkGraph, node: NodeId) -> Option<usize> {
    let ni = graph.endpoint_index(node)?;
    graph.link_to(Attach::Ni { ni }, LinkClass::Wide)
}

pub fn util_rows(
    scenario: &str,
    graph: &NetworkGraph,
    links: &[LinkActivity],
    start: u64,
    end: u64,
) -> Vec<UtilRow> {
    graph
        .links
        .iter()
        .zip(links)
        .map(|(l, a)| {
            let u = utilization(a, start, end);
            UtilRow {
                scenario: scenario.to_string(),
                link_id: l.id,
                edge_from: graph.describe(l.from),
                edge_to: graph.describe(l.to),
                class: l.class.to_string(),
                busy: u.busy_cycles,
                window: u.window_cycles,
                utilization: u.fraction(),
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FlitRow {
    cycle: u64,
    link_id: usize,
    class: String,
    src: String,
    dst: String,
    channel: String,
    last: bool,
    atop: bool,
}

#[derive(Debug, Serialize)]
struct RouterRow {
    cycle: u64,
    router: usize,
    in_port: char,
    out_port: char,
    channel: String,
    last: bool,
}

fn channel_name(kind: ChannelKind, wide: bool) -> String {
    format!("{}_{:?}", if wide { "wide" } else { "narrow" }, kind).to_lowercase()
}

fn trace_files(sim: &Simulation, out: &mut Output) -> Result<(), CliError> {
    if sim.setup.opts.trace_flits {
        let rows: Vec<FlitRow> = sim
            .flit_trace
            .iter()
            .map(|r: &FlitTraceRecord| FlitRow {
                cycle: r.cycle,
                link_id: r.link_id,
                class: r.class.to_string(),
                src: r.src.to_string(),
                dst: r.dst.to_string(),
                channel: channel_name(r.channel, r.wide),
                last: r.last,
                atop: r.atop,
            })
            .collect();
        out.file("flits.csv", csv_bytes(&rows)?);
    }
    if sim.setup.opts.trace_routers {
        let rows: Vec<RouterRow> = sim
            .router_trace
            .iter()
            .map(|r: &RouterTraceRecord| RouterRow {
                cycle: r.cycle,
                router: r.router,
                in_port: r.in_port.letter(),
                out_port: r.out_port.letter(),
                channel: format!("{:?}", r.channel).to_lowercase(),
                last: r.last,
            })
            .collect();
        out.file("routers.csv", csv_bytes(&rows)?);
    }
    Ok(())
}

// ---- latency sweep -----------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LatencySweep {
    pub source: NodeId,
    pub dims: (usize, usize),
    pub samples: Vec<LatencySample>,
}

impl LatencySweep {
    pub fn latency_to(&self, dst: NodeId) -> Option<u64> {
        self.samples
            .iter()
            .find(|s| s.dst == dst)
            .map(LatencySample::latency)
    }
}

/// Closed-loop single-beat reads from one tile to every other endpoint, one
/// at a time so each sees an empty network.
pub fn latency_sweep(cfg: &ExperimentConfig) -> Result<(LatencySweep, Output), CliError> {
    let mut sim = new_sim(cfg)?;
    let src = cfg.workload.latency_source;
    let ops: Vec<ScriptOp> = sim
        .graph
        .endpoints
        .iter()
        .map(|e| e.node)
        .filter(|&n| n != src)
        .map(|dst| ScriptOp {
            dst,
            op: AxiOp::Read,
            burst_len: 1,
        })
        .collect();
    sim.tile_mut(src)?
        .cores
        .push(CoreGen::script(src, 0, ops, 4));
    let end = finish(&mut sim, cfg.max_cycles)?;
    let sweep = LatencySweep {
        source: src,
        dims: sim.graph.dims,
        samples: sim.samples.clone(),
    };

    let mut out = Output::default();
    out.file(
        "latency.csv",
        csv_bytes(&latency_rows("latency_sweep", &sweep.samples))?,
    );
    let cells = heatmap(sweep.dims, |x, y| {
        let t = NodeId::tile(x, y);
        if t == src {
            Some(0.0)
        } else {
            sweep.latency_to(t).map(|l| l as f64)
        }
    });
    out.file("heatmap.csv", csv_bytes(&cells)?);
    out.file(
        "util.csv",
        csv_bytes(&util_rows("latency_sweep", &sim.graph, &sim.links, 0, end))?,
    );
    trace_files(&sim, &mut out)?;

    let tile_samples: Vec<LatencySample> = sweep
        .samples
        .iter()
        .filter(|s| s.dst.is_tile())
        .copied()
        .collect();
    let by_hops = crate::metrics::aggregate_by_hops(&tile_samples);
    out.line(format!(
        "latency sweep from {src}: {} destinations in {end} cycles",
        sweep.samples.len()
    ));
    for (h, s) in by_hops {
        out.line(format!("  {h:>2} hops to a tile: {:.1} cycles", s.mean));
    }
    Ok((sweep, out))
}

// ---- synthetic traffic -------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TrafficPoint {
    pub pattern: &'static str,
    pub size_kib: u64,
    pub cycles: u64,
    pub mean_util: f64,
    pub min_util: f64,
    pub max_util: f64,
    pub mean_gbps: f64,
    pub narrow_mean_latency: f64,
    pub narrow_p99_latency: u64,
}

#[derive(Debug, Clone)]
pub struct TrafficRun {
    pub point: TrafficPoint,
    pub records: Vec<TransferRecord>,
    pub narrow: LatencySummary,
    pub samples: Vec<LatencySample>,
    util: Vec<UtilRow>,
}

/// Per-transfer payload utilisation from first issue to completion.
pub fn transfer_utilization(r: &TransferRecord) -> f64 {
    match (r.first_issue, r.complete_cycle) {
        (Some(s), Some(e)) => stream_utilization(r.bytes_done, s, e),
        _ => 0.0,
    }
}

/// Every tile moves `bytes` to its pattern destination with the DMA, while
/// one core optionally probes the same destination with narrow reads.
pub fn traffic_point(
    cfg: &ExperimentConfig,
    pattern: Pattern,
    bytes: u64,
) -> Result<TrafficRun, CliError> {
    let mut sim = new_sim(cfg)?;
    let dims = sim.graph.dims;
    let params = cfg.workload.pattern_params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (bytes << 8) ^ pattern as u64);
    let tiles: Vec<NodeId> = sim.graph.tiles().map(|(_, n)| n).collect();
    for src in tiles {
        let dst = pattern_destination(pattern, src, dims, &mut rng, &params);
        if dst == src {
            continue;
        }
        let op = match pattern {
            Pattern::TiledMatmul => match pattern_op(pattern, &mut rng, &params) {
                AxiOp::Write => TransferOp::Write,
                _ => TransferOp::Read,
            },
            _ => cfg.workload.op,
        };
        let tile = sim.tile_mut(src)?;
        tile.dma.add_transfer(TransferSpec {
            src,
            dst,
            bytes,
            op,
            start_cycle: 0,
        });
        if cfg.workload.narrow_probe {
            tile.cores.push(CoreGen::probe(src, 0, dst));
            tile.probes_follow_dma = true;
        }
    }
    let end = finish(&mut sim, cfg.max_cycles)?;

    let records: Vec<TransferRecord> = sim
        .tiles
        .iter()
        .flatten()
        .flat_map(|t| t.dma.records().iter().cloned())
        .collect();
    let utils: Vec<f64> = records.iter().map(transfer_utilization).collect();
    let mean = utils.iter().sum::<f64>() / utils.len().max(1) as f64;
    let narrow_lat: Vec<u64> = sim
        .samples
        .iter()
        .filter(|s| s.class == BusWidth::Narrow)
        .map(LatencySample::latency)
        .collect();
    let narrow = aggregate(&narrow_lat);
    let scenario = format!("{}_{}KiB", pattern.name(), bytes / 1024);
    let (ws, we) = crate::metrics::steady_window(0, end, cfg.sim.warmup_fraction);
    let point = TrafficPoint {
        pattern: pattern.name(),
        size_kib: bytes / 1024,
        cycles: end,
        mean_util: mean,
        min_util: utils.iter().copied().fold(f64::INFINITY, f64::min),
        max_util: utils.iter().copied().fold(0.0, f64::max),
        mean_gbps: wide_gbps(mean, DEFAULT_CLOCK_GHZ),
        narrow_mean_latency: narrow.mean,
        narrow_p99_latency: narrow.p99,
    };
    let util = util_rows(&scenario, &sim.graph, &sim.links, ws, we);
    let samples = sim
        .samples
        .iter()
        .filter(|s| s.class == BusWidth::Narrow)
        .copied()
        .collect();
    Ok(TrafficRun {
        point,
        records,
        narrow,
        samples,
        util,
    })
}

pub fn traffic(cfg: &ExperimentConfig) -> Result<(Vec<TrafficRun>, Output), CliError> {
    let points: Vec<(Pattern, u64)> = cfg
        .workload
        .patterns
        .iter()
        .flat_map(|&p| cfg.workload.sizes_kib.iter().map(move |&k| (p, k * 1024)))
        .collect();
    let runs: Vec<TrafficRun> = points
        .par_iter()
        .map(|&(p, b)| traffic_point(cfg, p, b))
        .collect::<Result<_, _>>()?;

    let mut out = Output::default();
    let rows: Vec<&TrafficPoint> = runs.iter().map(|r| &r.point).collect();
    out.file("traffic.csv", csv_bytes(&rows)?);
    let util: Vec<&UtilRow> = runs.iter().flat_map(|r| r.util.iter()).collect();
    out.file("util.csv", csv_bytes(&util)?);
    let names: Vec<String> = runs
        .iter()
        .map(|r| format!("{}_{}KiB", r.point.pattern, r.point.size_kib))
        .collect();
    let lat: Vec<_> = runs
        .iter()
        .zip(&names)
        .flat_map(|(r, n)| latency_rows(n, &r.samples))
        .collect();
    out.file("latency.csv", csv_bytes(&lat)?);
    for r in &runs {
        let p = &r.point;
        let mut line = format!(
            "{:<15} {:>3} KiB  util {:.3} ({:.1} Gbps)",
            p.pattern, p.size_kib, p.mean_util, p.mean_gbps
        );
        if !r.samples.is_empty() {
            line += &format!("  narrow latency {:.1} cycles", p.narrow_mean_latency);
        }
        out.line(line);
    }
    Ok((runs, out))
}

// ---- HBM load ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct HbmTile {
    pub x: i16,
    pub y: i16,
    /// Delivered beat rate against the HBM rate, tile alone.
    pub zero_load: f64,
    /// Own delivered beat rate, all tiles of the row active, as a share of
    /// the row's summed rates.
    pub full_load_share: f64,
    pub full_load_beats: u64,
    pub narrow_latency: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HbmRow {
    pub row: i16,
    pub window_start: u64,
    pub window_end: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone)]
pub struct HbmReport {
    pub tiles: Vec<HbmTile>,
    pub rows: Vec<HbmRow>,
    pub rate: f64,
}

/// Beats per cycle between the first and last beat on a link.
fn zero_load_rate(a: &LinkActivity) -> f64 {
    match (a.first(), a.last()) {
        (Some(f), Some(l)) if l > f => (a.total() - 1) as f64 / (l - f) as f64,
        _ => 0.0,
    }
}

pub fn hbm_load(cfg: &ExperimentConfig) -> Result<(HbmReport, Output), CliError> {
    if !cfg.mesh.hbm_rows {
        return Err(CliError::Usage(
            "hbm-load needs mesh.hbm_rows = true".into(),
        ));
    }
    let rate = cfg.memory.hbm_rate;
    let bytes = cfg.workload.hbm_bytes;
    let probe = new_sim(cfg)?;
    let tiles: Vec<NodeId> = probe.graph.tiles().map(|(_, n)| n).collect();
    let dims = probe.graph.dims;

    let alone: Vec<(f64, u64)> = tiles
        .par_iter()
        .map(|&t| -> Result<(f64, u64), CliError> {
            let mut sim = new_sim(cfg)?;
            sim.add_transfer(TransferSpec {
                src: t,
                dst: NodeId::hbm(t.y),
                bytes,
                op: TransferOp::Read,
                start_cycle: 0,
            })?;
            finish(&mut sim, cfg.max_cycles)?;
            let link = wide_ingress(&sim.graph, t).expect("tiles have a wide link");
            let util = zero_load_rate(&sim.links[link]) / rate;

            let mut sim = new_sim(cfg)?;
            let op = ScriptOp {
                dst: NodeId::hbm(t.y),
                op: AxiOp::Read,
                burst_len: 1,
            };
            sim.tile_mut(t)?
                .cores
                .push(CoreGen::script(t, 0, vec![op], 0));
            finish(&mut sim, cfg.max_cycles)?;
            Ok((util, sim.samples[0].latency()))
        })
        .collect::<Result<_, _>>()?;

    let mut sim = new_sim(cfg)?;
    for &t in &tiles {
        sim.add_transfer(TransferSpec {
            src: t,
            dst: NodeId::hbm(t.y),
            bytes,
            op: TransferOp::Read,
            start_cycle: 0,
        })?;
    }
    finish(&mut sim, cfg.max_cycles)?;
    let mut rows = Vec::new();
    let mut shares: BTreeMap<NodeId, (f64, u64)> = BTreeMap::new();
    for y in 0..dims.1 as i16 {
        let acts: Vec<(NodeId, &LinkActivity)> = tiles
            .iter()
            .filter(|t| t.y == y)
            .map(|&t| {
                (
                    t,
                    &sim.links[wide_ingress(&sim.graph, t).expect("tiles have a wide link")],
                )
            })
            .collect();
        let start = acts
            .iter()
            .filter_map(|(_, a)| a.first())
            .min()
            .unwrap_or(0);
        let end = acts.iter().filter_map(|(_, a)| a.last()).max().unwrap_or(0);
        let rates: Vec<f64> = acts.iter().map(|(_, a)| zero_load_rate(a)).collect();
        let sum: f64 = rates.iter().sum();
        for ((t, a), r) in acts.iter().zip(&rates) {
            shares.insert(*t, (if sum > 0.0 { r / sum } else { 0.0 }, a.total()));
        }
        let total: u64 = acts.iter().map(|(_, a)| a.total()).sum();
        let window = (end + 1).saturating_sub(start);
        rows.push(HbmRow {
            row: y,
            window_start: start,
            window_end: end,
            utilization: if window == 0 {
                0.0
            } else {
                total as f64 / window as f64 / rate
            },
        });
    }

    let report = HbmReport {
        tiles: tiles
            .iter()
            .zip(&alone)
            .map(|(t, &(zero_load, narrow_latency))| {
                let (share, beats) = shares[t];
                HbmTile {
                    x: t.x,
                    y: t.y,
                    zero_load,
                    full_load_share: share,
                    full_load_beats: beats,
                    narrow_latency,
                }
            })
            .collect(),
        rows,
        rate,
    };

    let mut out = Output::default();
    out.file("hbm_tiles.csv", csv_bytes(&report.tiles)?);
    out.file("hbm_rows.csv", csv_bytes(&report.rows)?);
    let lat = heatmap(dims, |x, y| {
        report
            .tiles
            .iter()
            .find(|t| t.x == x && t.y == y)
            .map(|t| t.narrow_latency as f64)
    });
    out.file("hbm_latency.csv", csv_bytes(&lat)?);
    let zl: Vec<f64> = report.tiles.iter().map(|t| t.zero_load).collect();
    out.line(format!(
        "hbm zero-load utilisation: min {:.3} max {:.3}",
        zl.iter().copied().fold(f64::INFINITY, f64::min),
        zl.iter().copied().fold(0.0, f64::max)
    ));
    for r in &report.rows {
        let s: Vec<String> = report
            .tiles
            .iter()
            .filter(|t| t.y == r.row)
            .map(|t| format!("{:.3}", t.full_load_share))
            .collect();
        out.line(format!(
            "row {} full-load utilisation {:.3}, shares [{}]",
            r.row,
            r.utilization,
            s.join(" ")
        ));
    }
    Ok((report, out))
}

// ---- ordering comparison -------------------------------------------------------

/// Response stream seen by one AXI ID of one initiator port.
type StreamKey = (NodeId, BusWidth, TxnId, bool);

#[derive(Debug, Clone, Serialize)]
pub struct OrderingRun {
    pub ordering: &'static str,
    pub cycles: u64,
    pub narrow_mean_latency: f64,
    pub wide_mean_latency: f64,
    pub narrow_p99_latency: u64,
    pub wide_p99_latency: u64,
    pub narrow_stall_cycles: u64,
    pub wide_stall_cycles: u64,
    pub rob_peak_bytes: u64,
    pub completed: usize,
}

#[derive(Debug, Clone)]
pub struct OrderingReport {
    pub runs: Vec<OrderingRun>,
    /// Per-ID response streams agree between the two configurations.
    pub equivalent: bool,
    /// Every stream was in issue order with correct data.
    pub in_order: bool,
}

/// Responses grouped per ID and channel, as `(tag, beat, data)` in delivery order.
pub fn response_streams(sim: &Simulation) -> BTreeMap<StreamKey, Vec<(u64, u16, u64)>> {
    let mut m: BTreeMap<StreamKey, Vec<(u64, u16, u64)>> = BTreeMap::new();
    for ni in &sim.nis {
        for b in &ni.beat_log {
            let BeatRecord {
                width,
                kind,
                txn_id,
                tag,
                beat,
                data,
                ..
            } = *b;
            m.entry((ni.node, width, txn_id, kind == ChannelKind::R))
                .or_default()
                .push((tag.0, beat, data));
        }
    }
    m
}

/// Tags rise along each stream, the beats of one burst are contiguous and
/// numbered from zero, and read data matches the source pattern.
pub fn streams_in_order(streams: &BTreeMap<StreamKey, Vec<(u64, u16, u64)>>) -> bool {
    streams.iter().all(|(&(_, _, _, is_r), v)| {
        v.windows(2).all(|w| {
            let ((t0, b0, _), (t1, b1, _)) = (w[0], w[1]);
            if t1 == t0 {
                is_r && b1 == b0 + 1
            } else {
                t1 > t0 && b1 == 0
            }
        }) && v.first().is_none_or(|f| f.1 == 0)
            && (!is_r
                || v.iter()
                    .all(|&(t, b, d)| d == read_data(crate::protocol::TxnTag(t), b)))
    })
}

/// Mixed random traffic for seed `seed`, installed on every tile.
pub fn install_mixed(
    sim: &mut Simulation,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(), CliError> {
    let dims = sim.graph.dims;
    let tiles: Vec<(usize, NodeId)> = sim.graph.tiles().collect();
    for (i, node) in tiles {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64);
        let mut tags = TagGen::new(i);
        let ops = mixed_trace(
            node,
            &cfg.workload.mixed,
            dims,
            cfg.mesh.hbm_rows,
            &mut tags,
            &mut rng,
        );
        let tile = sim.tile_mut(node)?;
        tile.traces
            .push(TraceGen::new(ops, cfg.workload.mixed.max_outstanding));
        tile.tags = tags;
    }
    Ok(())
}

pub fn run_mixed(
    cfg: &ExperimentConfig,
    ordering: Ordering,
    seed: u64,
) -> Result<(Simulation, u64), CliError> {
    let mut c = cfg.clone();
    c.ni.ordering = ordering;
    let mut setup = c.sim_setup();
    setup.opts.log_beats = true;
    let mut sim = Simulation::new(setup)?;
    install_mixed(&mut sim, &c, seed)?;
    let end = finish(&mut sim, c.max_cycles)?;
    Ok((sim, end))
}

fn ordering_run(name: &'static str, sim: &Simulation, cycles: u64) -> OrderingRun {
    let lat = |w| {
        let v: Vec<u64> = sim
            .samples
            .iter()
            .filter(|s| s.class == w)
            .map(LatencySample::latency)
            .collect();
        aggregate(&v)
    };
    let (n, w) = (lat(BusWidth::Narrow), lat(BusWidth::Wide));
    OrderingRun {
        ordering: name,
        cycles,
        narrow_mean_latency: n.mean,
        wide_mean_latency: w.mean,
        narrow_p99_latency: n.p99,
        wide_p99_latency: w.p99,
        narrow_stall_cycles: sim.nis.iter().map(|n| n.stats.stall_cycles[0]).sum(),
        wide_stall_cycles: sim.nis.iter().map(|n| n.stats.stall_cycles[1]).sum(),
        rob_peak_bytes: sim
            .nis
            .iter()
            .map(|n| n.rob_peak_bytes() as u64)
            .max()
            .unwrap_or(0),
        completed: sim.samples.len(),
    }
}

pub fn ordering_compare(cfg: &ExperimentConfig) -> Result<(OrderingReport, Output), CliError> {
    let configs = [("rob", Ordering::Rob), ("rob_less", Ordering::RobLess)];
    let sims: Vec<(Simulation, u64)> = configs
        .par_iter()
        .map(|&(_, o)| run_mixed(cfg, o, cfg.seed))
        .collect::<Result<_, _>>()?;
    let streams: Vec<_> = sims.iter().map(|(s, _)| response_streams(s)).collect();
    let report = OrderingReport {
        runs: configs
            .iter()
            .zip(&sims)
            .map(|(&(n, _), (s, c))| ordering_run(n, s, *c))
            .collect(),
        equivalent: streams[0] == streams[1],
        in_order: streams.iter().all(streams_in_order),
    };

    let mut out = Output::default();
    out.file("ordering.csv", csv_bytes(&report.runs)?);
    for (&(name, _), (sim, _)) in configs.iter().zip(&sims) {
        out.file(
            &format!("latency_{name}.csv"),
            csv_bytes(&latency_rows(name, &sim.samples))?,
        );
    }
    for r in &report.runs {
        out.line(format!(
            "{:<8} {} cycles, narrow {:.1} / wide {:.1} mean latency, stalls {}/{}, rob peak {} B",
            r.ordering,
            r.cycles,
            r.narrow_mean_latency,
            r.wide_mean_latency,
            r.narrow_stall_cycles,
            r.wide_stall_cycles,
            r.rob_peak_bytes
        ));
    }
    let (a, b) = (&report.runs[0], &report.runs[1]);
    out.line(format!(
        "rob_less - rob: narrow {:+.1}, wide {:+.1} cycles",
        b.narrow_mean_latency - a.narrow_mean_latency,
        b.wide_mean_latency - a.wide_mean_latency
    ));
    out.line(format!(
        "per-ID responses identical: {}, in order: {}",
        report.equivalent, report.in_order
    ));
    Ok((report, out))
}

// ---- workload file -------------------------------------------------------------

#[derive(Debug, Serialize)]
struct TransferRow {
    src: String,
    dst: String,
    bytes: u64,
    op: &'static str,
    start_cycle: u64,
    first_issue: Option<u64>,
    complete_cycle: Option<u64>,
    utilization: f64,
}

pub fn run_workload(cfg: &ExperimentConfig) -> Result<(Simulation, Output), CliError> {
    let path = cfg
        .workload
        .file
        .as_ref()
        .ok_or_else(|| CliError::Usage("run needs workload.file".into()))?;
    let file = WorkloadFile::load(path)?;
    let mut sim = new_sim(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for t in file.expand(&sim.graph, &cfg.workload.pattern_params(), &mut rng)? {
        sim.add_transfer(t)?;
    }
    let end = finish(&mut sim, cfg.max_cycles)?;
    let (ws, we) = crate::metrics::steady_window(0, end, cfg.sim.warmup_fraction);

    let mut out = Output::default();
    let rows: Vec<TransferRow> = sim
        .tiles
        .iter()
        .flatten()
        .flat_map(|t| t.dma.records().iter())
        .map(|r| TransferRow {
            src: r.spec.src.to_string(),
            dst: r.spec.dst.to_string(),
            bytes: r.spec.bytes,
            op: match r.spec.op {
                TransferOp::Read => "read",
                TransferOp::Write => "write",
            },
            start_cycle: r.spec.start_cycle,
            first_issue: r.first_issue,
            complete_cycle: r.complete_cycle,
            utilization: transfer_utilization(r),
        })
        .collect();
    out.file("transfers.csv", csv_bytes(&rows)?);
    out.file(
        "latency.csv",
        csv_bytes(&latency_rows("run", &sim.samples))?,
    );
    out.file(
        "util.csv",
        csv_bytes(&util_rows("run", &sim.graph, &sim.links, ws, we))?,
    );
    trace_files(&sim, &mut out)?;
    let mean = rows.iter().map(|r| r.utilization).sum::<f64>() / rows.len().max(1) as f64;
    out.line(format!(
        "{} transfers finished at cycle {end}, mean utilisation {mean:.3}",
        rows.len()
    ));
    Ok((sim, out))
}
