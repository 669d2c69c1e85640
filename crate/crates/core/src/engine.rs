//! Two-phase cycle kernel.
//!
//! Every cycle, generators first hand new transactions to their NIs. Then
//! each router plans its switch from committed buffer contents, every link
//! performs its valid/ready handshake against committed occupancy, the
//! planned switch traversals are applied, and finally the NIs advance.
//! Each buffer has exactly one writer and one reader per cycle, so the
//! outcome does not depend on the order components are visited in.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::endpoints::dma::{DmaConfig, DmaEngine, TransferSpec};
use crate::endpoints::memory::MemoryEndpointConfig;
use crate::endpoints::TileGen;
use crate::fabric::{
    build_mesh, gen_tables, is_ejection, Attach, FabricError, MeshConfig, NetworkGraph,
};
use crate::metrics::{LatencySample, LinkActivity};
use crate::ni::{physical, Ni, NiConfig, NiError, NiOptions};
use crate::protocol::{ChannelKind, LinkClass, NodeId, Port, PortClass, TxnTag};
use crate::router::{Grant, RouteError, Router, RoutingMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("routing failed in router {router}: {source}")]
    Route { router: NodeId, source: RouteError },
    #[error("NI {node}: {source}")]
    Ni { node: NodeId, source: NiError },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("no tile at {0}")]
    NoSuchTile(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Cycles without any flit movement, while work is pending, before the
    /// run is declared deadlocked.
    pub deadlock_window: u64,
    pub merge_req_rsp: bool,
    pub trace_flits: bool,
    pub trace_routers: bool,
    pub log_beats: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            deadlock_window: 10_000,
            merge_req_rsp: false,
            trace_flits: false,
            trace_routers: false,
            log_beats: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSetup {
    pub mesh: MeshConfig,
    pub ni: NiConfig,
    pub dma: DmaConfig,
    pub spm: MemoryEndpointConfig,
    pub hbm: MemoryEndpointConfig,
    pub opts: SimOptions,
}

impl Default for SimSetup {
    fn default() -> Self {
        SimSetup {
            mesh: MeshConfig::default(),
            ni: NiConfig::default(),
            dma: DmaConfig::default(),
            spm: MemoryEndpointConfig::spm(),
            hbm: MemoryEndpointConfig::hbm(),
            opts: SimOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlitTraceRecord {
    pub cycle: u64,
    pub link_id: usize,
    pub class: LinkClass,
    pub src: NodeId,
    pub dst: NodeId,
    pub channel: ChannelKind,
    pub wide: bool,
    pub last: bool,
    pub atop: bool,
    pub tag: TxnTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouterTraceRecord {
    pub cycle: u64,
    pub router: usize,
    pub in_port: Port,
    pub out_port: Port,
    pub channel: ChannelKind,
    pub last: bool,
    pub tag: TxnTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlockReport {
    pub cycle: u64,
    pub outstanding: usize,
    pub blocked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunExit {
    Completed { cycle: u64 },
    MaxCycles { cycle: u64 },
    Deadlock(DeadlockReport),
}

#[derive(Debug, Clone)]
struct EvalOrder {
    routers: Vec<usize>,
    links: Vec<usize>,
    nis: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub cycle: u64,
    pub graph: NetworkGraph,
    pub routers: Vec<Router>,
    pub nis: Vec<Ni>,
    pub tiles: Vec<Option<TileGen>>,
    pub links: Vec<LinkActivity>,
    pub samples: Vec<LatencySample>,
    pub flit_trace: Vec<FlitTraceRecord>,
    pub router_trace: Vec<RouterTraceRecord>,
    pub setup: SimSetup,
    order: EvalOrder,
    idle_cycles: u64,
    flits_moved: u64,
}

impl Simulation {
    pub fn new(setup: SimSetup) -> Result<Self, SimError> {
        let graph = build_mesh(&setup.mesh)?;
        let tables = if setup.mesh.routing == RoutingMode::Table {
            Some(gen_tables(&graph)?)
        } else {
            None
        };
        let mut routers = Vec::with_capacity(graph.routers.len());
        for (i, spec) in graph.routers.iter().enumerate() {
            let mut r = Router::new(
                spec.coord,
                spec.class,
                setup.mesh.router_config(spec.class),
                setup.mesh.routing,
            );
            for p in Port::ALL {
                r.set_ejection(p, is_ejection(&graph, i, p));
            }
            if let Some(t) = &tables {
                r.set_table(t[i].clone());
            }
            routers.push(r);
        }
        let opts = NiOptions {
            source_routing: setup.mesh.routing == RoutingMode::Source,
            merge_req_rsp: setup.opts.merge_req_rsp,
            log_beats: setup.opts.log_beats,
        };
        let mut nis = Vec::with_capacity(graph.endpoints.len());
        let mut tiles = Vec::with_capacity(graph.endpoints.len());
        for (i, e) in graph.endpoints.iter().enumerate() {
            let (initiator, mem) = match e.node.class {
                PortClass::Tile => (true, setup.spm),
                PortClass::Hbm => (false, setup.hbm),
                PortClass::C2c | PortClass::Peripheral => (false, setup.spm),
            };
            nis.push(Ni::new(e.node, setup.ni, initiator, Some(mem), opts));
            tiles.push(initiator.then(|| TileGen::new(e.node, i, DmaEngine::new(setup.dma))));
        }
        let order = EvalOrder {
            routers: (0..routers.len()).collect(),
            links: (0..graph.links.len()).collect(),
            nis: (0..nis.len()).collect(),
        };
        let links = vec![LinkActivity::default(); graph.links.len()];
        Ok(Simulation {
            cycle: 0,
            graph,
            routers,
            nis,
            tiles,
            links,
            samples: Vec::new(),
            flit_trace: Vec::new(),
            router_trace: Vec::new(),
            setup,
            order,
            idle_cycles: 0,
            flits_moved: 0,
        })
    }

    /// Visit components in a shuffled order. Results must not change.
    pub fn permute_evaluation_order(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.order.routers.shuffle(&mut rng);
        self.order.links.shuffle(&mut rng);
        self.order.nis.shuffle(&mut rng);
    }

    pub fn tile_mut(&mut self, node: NodeId) -> Result<&mut TileGen, SimError> {
        let i = self
            .graph
            .endpoint_index(node)
            .ok_or(SimError::NoSuchTile(node))?;
        self.tiles[i].as_mut().ok_or(SimError::NoSuchTile(node))
    }

    pub fn tile(&self, node: NodeId) -> Option<&TileGen> {
        self.graph
            .endpoint_index(node)
            .and_then(|i| self.tiles[i].as_ref())
    }

    pub fn ni(&self, node: NodeId) -> Option<&Ni> {
        self.graph.endpoint_index(node).map(|i| &self.nis[i])
    }

    pub fn add_transfer(&mut self, spec: TransferSpec) -> Result<(), SimError> {
        self.tile_mut(spec.src)?.dma.add_transfer(spec);
        Ok(())
    }

    pub fn flits_moved(&self) -> u64 {
        self.flits_moved
    }

    /// Outstanding transactions over all NIs.
    pub fn outstanding(&self) -> usize {
        self.nis.iter().map(Ni::outstanding).sum()
    }

    pub fn is_quiescent(&self) -> bool {
        self.tiles.iter().flatten().all(|t| t.is_done(self.cycle))
            && self.nis.iter().all(Ni::is_idle)
            && self.routers.iter().all(Router::is_empty)
    }

    pub fn step(&mut self) -> Result<(), SimError> {
        let c = self.cycle;
        let mut moved = 0u64;

        for &i in &self.order.nis {
            if let Some(t) = self.tiles[i].as_mut() {
                t.step(c, &mut self.nis[i]);
            }
        }

        let mut grants: Vec<Vec<Grant>> = vec![Vec::new(); self.routers.len()];
        for &r in &self.order.routers {
            grants[r] = self.routers[r]
                .plan_switch()
                .map_err(|source| SimError::Route {
                    router: self.routers[r].coord,
                    source,
                })?;
        }

        for &l in &self.order.links {
            let link = self.graph.links[l];
            let ready = match link.to {
                Attach::Router { router, port } => self.routers[router].input_ready(port.index()),
                Attach::Ni { ni } => self.nis[ni].ingress_ready(link.class),
            };
            if !ready {
                continue;
            }
            let flit = match link.from {
                Attach::Router { router, port } => self.routers[router].pop_output(port.index()),
                Attach::Ni { ni } => self.nis[ni]
                    .egress_offer(link.class, c)
                    .map(|(s, _)| self.nis[ni].egress_commit(link.class, s)),
            };
            let Some(flit) = flit else { continue };
            if physical(flit.link(), self.setup.opts.merge_req_rsp) != link.class {
                return Err(SimError::Invariant(format!(
                    "{} flit on {} link {}",
                    flit.link(),
                    link.class,
                    l
                )));
            }
            match link.to {
                Attach::Router { router, port } => self.routers[router].accept(port.index(), flit),
                Attach::Ni { ni } => self.nis[ni].ingress_accept(link.class, flit, c),
            }
            self.links[l].record(c);
            moved += 1;
            if self.setup.opts.trace_flits {
                self.flit_trace.push(FlitTraceRecord {
                    cycle: c,
                    link_id: l,
                    class: link.class,
                    src: flit.header.src,
                    dst: flit.header.dst,
                    channel: flit.header.channel.kind,
                    wide: flit.header.channel.width == crate::protocol::BusWidth::Wide,
                    last: flit.header.last,
                    atop: flit.header.atop,
                    tag: flit.tag,
                });
            }
        }

        for &r in &self.order.routers {
            let g = &grants[r];
            moved += g.len() as u64;
            let events = self.routers[r].apply_switch(g);
            if self.setup.opts.trace_routers {
                for e in events {
                    self.router_trace.push(RouterTraceRecord {
                        cycle: c,
                        router: r,
                        in_port: e.in_port,
                        out_port: e.out_port,
                        channel: e.flit.header.channel.kind,
                        last: e.flit.header.last,
                        tag: e.flit.tag,
                    });
                }
            }
        }
        self.check_tied_off()?;

        for &i in &self.order.nis {
            let ni = &mut self.nis[i];
            ni.tick(c).map_err(|source| SimError::Ni {
                node: ni.node,
                source,
            })?;
            for done in ni.take_completions() {
                let t = done.txn;
                self.samples.push(LatencySample {
                    tag: t.tag,
                    src: t.src,
                    dst: t.dst,
                    issue_cycle: t.issue_cycle,
                    complete_cycle: done.complete_cycle,
                    class: t.width,
                    op: t.op,
                    hops: t.src.manhattan(&t.dst),
                });
                if let Some(tile) = self.tiles[i].as_mut() {
                    tile.on_completion(&done);
                }
            }
        }

        self.flits_moved += moved;
        if moved == 0 && !self.is_quiescent() {
            self.idle_cycles += 1;
        } else {
            self.idle_cycles = 0;
        }
        self.cycle += 1;
        Ok(())
    }

    /// Output buffers facing a tied-off port must stay empty.
    fn check_tied_off(&self) -> Result<(), SimError> {
        for (ri, r) in self.routers.iter().enumerate() {
            for p in Port::ALL {
                if r.output_len(p.index()) > 0
                    && self
                        .graph
                        .link_from(
                            Attach::Router {
                                router: ri,
                                port: p,
                            },
                            r.class,
                        )
                        .is_none()
                {
                    return Err(SimError::Invariant(format!(
                        "router {} {} offers a flit on tied-off port {}",
                        r.coord,
                        r.class,
                        p.letter()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn deadlock_report(&self) -> DeadlockReport {
        let mut blocked: Vec<String> = self
            .routers
            .iter()
            .filter(|r| !r.is_empty())
            .map(Router::snapshot)
            .collect();
        blocked.extend(self.nis.iter().filter(|n| !n.is_idle()).map(Ni::snapshot));
        DeadlockReport {
            cycle: self.cycle,
            outstanding: self.outstanding(),
            blocked,
        }
    }

    pub fn run(&mut self, max_cycles: u64) -> Result<RunExit, SimError> {
        loop {
            if self.is_quiescent() {
                return Ok(RunExit::Completed { cycle: self.cycle });
            }
            if self.cycle >= max_cycles {
                return Ok(RunExit::MaxCycles { cycle: self.cycle });
            }
            self.step()?;
            if self.idle_cycles >= self.setup.opts.deadlock_window {
                return Ok(RunExit::Deadlock(self.deadlock_report()));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoints::core::{CoreGen, ScriptOp};
    use crate::protocol::AxiOp;

    fn read_latency(src: NodeId, dst: NodeId) -> u64 {
        let mut sim = Simulation::new(SimSetup::default()).unwrap();
        let core = CoreGen::script(
            src,
            0,
            vec![ScriptOp {
                dst,
                op: AxiOp::Read,
                burst_len: 1,
            }],
            0,
        );
        sim.tile_mut(src).unwrap().cores.push(core);
        assert!(matches!(sim.run(1000).unwrap(), RunExit::Completed { .. }));
        assert_eq!(sim.samples.len(), 1);
        sim.samples[0].latency()
    }

    #[test]
    fn empty_workload_completes_at_zero() {
        let mut sim = Simulation::new(SimSetup::default()).unwrap();
        assert_eq!(sim.run(100).unwrap(), RunExit::Completed { cycle: 0 });
    }

    #[test]
    fn neighbour_read_takes_22_cycles() {
        assert_eq!(read_latency(NodeId::tile(0, 0), NodeId::tile(1, 0)), 22);
        assert_eq!(read_latency(NodeId::tile(3, 2), NodeId::tile(3, 1)), 22);
    }

    #[test]
    fn corner_read_takes_58_cycles() {
        assert_eq!(read_latency(NodeId::tile(0, 0), NodeId::tile(7, 3)), 58);
    }

    #[test]
    fn max_cycles_stops_run() {
        let mut sim = Simulation::new(SimSetup::default()).unwrap();
        let src = NodeId::tile(0, 0);
        let core = CoreGen::script(
            src,
            0,
            vec![ScriptOp {
                dst: NodeId::tile(7, 3),
                op: AxiOp::Read,
                burst_len: 1,
            }],
            0,
        );
        sim.tile_mut(src).unwrap().cores.push(core);
        assert_eq!(sim.run(10).unwrap(), RunExit::MaxCycles { cycle: 10 });
    }

    #[test]
    fn unknown_tile_is_reported() {
        let mut sim = Simulation::new(SimSetup::default()).unwrap();
        assert!(matches!(
            sim.tile_mut(NodeId::hbm(0)),
            Err(SimError::NoSuchTile(_))
        ));
    }
}
