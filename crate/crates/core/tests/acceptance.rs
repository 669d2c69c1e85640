use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use floosim::cli::presets::{self, finish, new_sim, response_streams, run_mixed, streams_in_order};
use floosim::config::ExperimentConfig;
use floosim::endpoints::dma::{TransferOp, TransferSpec};
use floosim::endpoints::pattern::Pattern;
use floosim::endpoints::trace::{MixedTraffic, TraceGen, TraceOp};
use floosim::engine::Simulation;
use floosim::fabric::Attach;
use floosim::metrics::wide_gbps;
use floosim::ni::ordering::Ordering;
use floosim::protocol::{
    AxiOp, AxiTransaction, BusWidth, ChannelKind, LinkClass, NodeId, Port, TxnId, TxnTag,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn zero_load_latency() -> Check {
    let cfg = ExperimentConfig::default();
    let (sweep, _) = presets::latency_sweep(&cfg).map_err(err)?;
    let src = sweep.source;
    let mut bad = Vec::new();
    for x in 0..8 {
        for y in 0..4 {
            let t = NodeId::tile(x, y);
            if t == src {
                continue;
            }
            let d = src.manhattan(&t) as u64;
            let got = sweep.latency_to(t).ok_or(format!("no sample for {t}"))?;
            if got != 22 + 4 * (d - 1) {
                bad.push(format!("{t}: {got}"));
            }
        }
    }
    let nb = sweep.latency_to(NodeId::tile(1, 0));
    let corner = sweep.latency_to(NodeId::tile(7, 3));
    ensure(
        bad.is_empty() && nb == Some(22) && corner == Some(58),
        format!("neighbor {nb:?}, corner {corner:?}, off-formula {bad:?}"),
    )
}

/// Cycle gaps between consecutive router-to-router traversals of each
/// single-beat flit of an isolated transaction.
fn hop_gaps(sim: &Simulation) -> BTreeMap<LinkClass, Vec<u64>> {
    let mut heads: BTreeMap<(u64, ChannelKind), Vec<(u64, LinkClass)>> = BTreeMap::new();
    for r in &sim.flit_trace {
        let l = sim.graph.links[r.link_id];
        if matches!(
            (l.from, l.to),
            (Attach::Router { .. }, Attach::Router { .. })
        ) {
            heads
                .entry((r.tag.0, r.channel))
                .or_default()
                .push((r.cycle, r.class));
        }
    }
    let mut gaps: BTreeMap<LinkClass, Vec<u64>> = BTreeMap::new();
    for v in heads.values() {
        for w in v.windows(2) {
            gaps.entry(w[1].1).or_default().push(w[1].0 - w[0].0);
        }
    }
    gaps
}

fn per_hop_cost() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut all: BTreeMap<LinkClass, Vec<u64>> = BTreeMap::new();
    for _ in 0..24 {
        let src = NodeId::tile(rng.gen_range(0..8), rng.gen_range(0..4));
        let dst = NodeId::tile(rng.gen_range(0..8), rng.gen_range(0..4));
        if src.manhattan(&dst) < 2 {
            continue;
        }
        for (op, width) in [
            (AxiOp::Read, BusWidth::Narrow),
            (AxiOp::Read, BusWidth::Wide),
            (AxiOp::Write, BusWidth::Wide),
        ] {
            let mut cfg = ExperimentConfig::default();
            cfg.sim.trace_flits = true;
            let mut sim = new_sim(&cfg).map_err(err)?;
            let txn =
                AxiTransaction::new(TxnId(0), op, width, src, dst, 1, TxnTag(1)).map_err(err)?;
            let gen = TraceGen::new(vec![TraceOp { txn, not_before: 0 }], 1);
            sim.tile_mut(src).map_err(err)?.traces.push(gen);
            finish(&mut sim, 10_000).map_err(err)?;
            for (class, g) in hop_gaps(&sim) {
                all.entry(class).or_default().extend(g);
            }
        }
    }
    let summary: Vec<String> = all
        .iter()
        .map(|(c, g)| {
            format!(
                "{c}: {} hops, gaps {:?}..{:?}",
                g.len(),
                g.iter().min(),
                g.iter().max()
            )
        })
        .collect();
    let ok = all.len() == 3
        && all
            .values()
            .all(|g| !g.is_empty() && g.iter().all(|&x| x == 2));
    ensure(ok, summary.join("; "))
}

fn peak_wide_bandwidth() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.mesh.hbm_rows = false;
    let mut sim = new_sim(&cfg).map_err(err)?;
    let (src, dst) = (NodeId::tile(0, 0), NodeId::tile(1, 0));
    sim.add_transfer(TransferSpec {
        src,
        dst,
        bytes: 32 * 1024,
        op: TransferOp::Write,
        start_cycle: 0,
    })
    .map_err(err)?;
    finish(&mut sim, 100_000).map_err(err)?;
    let a = sim
        .graph
        .router_index((0, 0), LinkClass::Wide)
        .ok_or("no router")?;
    let link = sim
        .graph
        .link_from(
            Attach::Router {
                router: a,
                port: Port::East,
            },
            LinkClass::Wide,
        )
        .ok_or("no link")?;
    let act = &sim.links[link];
    let (first, last) = (
        act.first().ok_or("idle link")?,
        act.last().ok_or("idle link")?,
    );
    let flits = act.total();
    let per_cycle = flits as f64 / (last - first + 1) as f64;
    // 512 AW+W bundles of 64 W beats each, AW included
    let gbps = wide_gbps(1.0, 1.26);
    ensure(
        per_cycle == 1.0 && flits == 512 + 8 && (gbps - 645.12).abs() < 1e-9,
        format!(
            "{flits} flits in {} cycles = {per_cycle} flit/cycle, peak {gbps:.2} Gbps",
            last - first + 1
        ),
    )
}

fn pattern_util(pattern: Pattern) -> Result<f64, String> {
    let cfg = ExperimentConfig::default();
    let run = presets::traffic_point(&cfg, pattern, 32 * 1024).map_err(err)?;
    Ok(run.point.mean_util)
}

fn neighbor_bandwidth() -> Check {
    let u = pattern_util(Pattern::Neighbor)?;
    ensure(u >= 0.95, format!("mean wide utilization {u:.3}"))
}

fn bit_complement_bandwidth() -> Check {
    let u = pattern_util(Pattern::BitComplement)?;
    ensure(
        (u - 0.28).abs() <= 0.08,
        format!("mean wide utilization {u:.3}"),
    )
}

fn hbm_utilization() -> Check {
    let cfg = ExperimentConfig::default();
    let (r, _) = presets::hbm_load(&cfg).map_err(err)?;
    let zl = r
        .tiles
        .iter()
        .map(|t| t.zero_load)
        .fold(f64::INFINITY, f64::min);
    let row = r
        .rows
        .iter()
        .map(|x| x.utilization)
        .fold(f64::INFINITY, f64::min);
    let lo = r
        .tiles
        .iter()
        .map(|t| t.full_load_share)
        .fold(f64::INFINITY, f64::min);
    let hi = r
        .tiles
        .iter()
        .map(|t| t.full_load_share)
        .fold(0.0, f64::max);
    let fair = 1.0 / 8.0;
    ensure(
        zl >= 0.95 && row >= 0.95 && lo >= fair * 0.8 && hi <= fair * 1.2,
        format!("zero-load min {zl:.3}, row min {row:.3}, shares {lo:.3}..{hi:.3}"),
    )
}

fn ordering_properties() -> Check {
    let failures: Vec<String> = (0..1000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cfg = ExperimentConfig {
                seed,
                ..ExperimentConfig::default()
            };
            cfg.mesh.x_tiles = rng.gen_range(1..=4);
            cfg.mesh.y_tiles = rng.gen_range(2..=3);
            cfg.mesh.hbm_rows = rng.gen_bool(0.5);
            let read = rng.gen_range(0.1..0.8);
            let atomic = rng.gen_range(0.0..0.3);
            cfg.workload.mixed = MixedTraffic {
                txns_per_tile: rng.gen_range(8..=48),
                mean_gap: rng.gen_range(0..=6),
                wide_fraction: rng.gen_range(0.0..1.0),
                read_fraction: read,
                write_fraction: 1.0 - read,
                atomic_fraction: atomic,
                hbm_fraction: if cfg.mesh.hbm_rows {
                    rng.gen_range(0.0..0.3)
                } else {
                    0.0
                },
                ids: rng.gen_range(1..=4),
                max_outstanding: rng.gen_range(1..=12),
                ..MixedTraffic::default()
            };
            let issued = cfg.workload.mixed.txns_per_tile * cfg.mesh.x_tiles * cfg.mesh.y_tiles;
            let mut streams = Vec::new();
            for ordering in [Ordering::Rob, Ordering::RobLess] {
                match run_mixed(&cfg, ordering, seed) {
                    Ok((sim, _)) => {
                        if sim.samples.len() != issued {
                            return Some(format!(
                                "seed {seed} {ordering:?}: {} of {issued} completed",
                                sim.samples.len()
                            ));
                        }
                        let s = response_streams(&sim);
                        if !streams_in_order(&s) {
                            return Some(format!("seed {seed} {ordering:?}: out of order"));
                        }
                        streams.push(s);
                    }
                    Err(e) => return Some(format!("seed {seed} {ordering:?}: {e}")),
                }
            }
            (streams[0] != streams[1]).then(|| format!("seed {seed}: streams differ"))
        })
        .collect();
    ensure(
        failures.is_empty(),
        format!(
            "1000 workloads x 2 configurations, {} failures {:?}",
            failures.len(),
            failures.first()
        ),
    )
}

fn wormhole_contiguity() -> Check {
    let results: Vec<Result<usize, String>> = (0..40u64)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = ExperimentConfig::default();
            cfg.sim.trace_routers = true;
            cfg.mesh.x_tiles = 4;
            cfg.mesh.y_tiles = 4;
            cfg.workload.mixed = MixedTraffic {
                txns_per_tile: 32,
                mean_gap: 0,
                wide_fraction: 1.0,
                read_fraction: 0.0,
                write_fraction: 1.0,
                atomic_fraction: 0.0,
                hbm_fraction: 0.2,
                max_outstanding: 8,
                ..MixedTraffic::default()
            };
            let (sim, _) = run_mixed(&cfg, Ordering::RobLess, seed).map_err(err)?;
            let mut open: BTreeMap<(usize, Port), u64> = BTreeMap::new();
            let mut bundles = 0;
            for r in &sim.router_trace {
                let key = (r.router, r.out_port);
                if let Some(&t) = open.get(&key) {
                    if t != r.tag.0 {
                        return Err(format!(
                            "seed {seed}: router {} {:?} interleaved {t} with {}",
                            r.router, r.out_port, r.tag.0
                        ));
                    }
                }
                if r.channel == ChannelKind::Aw
                    && sim.graph.routers[r.router].class == LinkClass::Wide
                {
                    bundles += 1;
                }
                if r.last {
                    open.remove(&key);
                } else {
                    open.insert(key, r.tag.0);
                }
            }
            Ok(bundles)
        })
        .collect();
    let mut bundles = 0;
    for r in results {
        bundles += r?;
    }
    ensure(
        bundles > 0,
        format!("{bundles} bundle hops over 40 workloads, none interleaved"),
    )
}

fn dma_stalls(channels: usize) -> Result<u64, String> {
    let mut cfg = ExperimentConfig::default();
    cfg.ni.ordering = Ordering::RobLess;
    cfg.dma.num_channels = channels;
    let mut sim = new_sim(&cfg).map_err(err)?;
    let src = NodeId::tile(3, 1);
    for dst in [NodeId::tile(4, 1), NodeId::tile(0, 3)] {
        sim.add_transfer(TransferSpec {
            src,
            dst,
            bytes: 32 * 1024,
            op: TransferOp::Read,
            start_cycle: 0,
        })
        .map_err(err)?;
    }
    finish(&mut sim, 200_000).map_err(err)?;
    Ok(sim.ni(src).ok_or("no NI")?.stats.stall_cycles[BusWidth::Wide.index()])
}

fn dma_decoupling() -> Check {
    let one = dma_stalls(1)?;
    let two = dma_stalls(2)?;
    let four = dma_stalls(4)?;
    ensure(
        two == 0 && four == 0 && one > 0,
        format!("stall cycles: 1 channel {one}, 2 channels {two}, 4 channels {four}"),
    )
}

fn run_binary(preset: &str, dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_floosim"))
        .args([preset, "--out"])
        .arg(dir)
        .arg("--seed=7")
        .env_remove("FLOOSIM_SEED")
        .output()
        .map_err(err)?;
    if !status.status.success() {
        return Err(format!(
            "{preset}: {}",
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(err)? {
        let p = e.map_err(err)?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            files.insert(
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).map_err(err)?,
            );
        }
    }
    Ok(files)
}

fn determinism() -> Check {
    let mut lines = Vec::new();
    for preset in ["latency-sweep", "traffic", "hbm-load", "ordering-compare"] {
        let (a, b) = (
            tempfile::tempdir().map_err(err)?,
            tempfile::tempdir().map_err(err)?,
        );
        let t = Instant::now();
        let fa = run_binary(preset, a.path())?;
        let once = t.elapsed();
        let fb = run_binary(preset, b.path())?;
        if fa.is_empty() || fa != fb {
            return Err(format!("{preset}: CSV outputs differ or are missing"));
        }
        lines.push(format!(
            "{preset} {} files ({:.2}s/run)",
            fa.len(),
            once.as_secs_f64()
        ));
    }
    Ok(lines.join(", "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("zero-load latency", zero_load_latency),
        ("per-hop cost", per_hop_cost),
        ("peak wide bandwidth", peak_wide_bandwidth),
        ("neighbor bandwidth", neighbor_bandwidth),
        ("bit-complement bandwidth", bit_complement_bandwidth),
        ("HBM utilization and fairness", hbm_utilization),
        ("ordering", ordering_properties),
        ("wormhole contiguity", wormhole_contiguity),
        ("DMA decoupling", dma_decoupling),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d} [{secs:.2}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {d} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
