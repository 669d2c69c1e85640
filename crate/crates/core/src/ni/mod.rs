//! Network interface: AXI to flit conversion, response ordering and the
//! target-side meta buffer.
//!
//! Per cycle an NI first consumes ingress flits that have spent the crossing
//! latency in the interface, then steps its local memory, then injects the
//! heads of its AXI request queues, and finally hands one R and one B beat
//! per bus back to the AXI side.

pub mod meta;
pub mod ordering;

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoints::memory::{
    MemEvent, MemRequest, MemoryEndpoint, MemoryEndpointConfig, ResponseRoom,
};
use crate::protocol::{
    is_wormhole, packetize_request, response_flit, AxiOp, AxiTransaction, BusWidth, ChannelKind,
    Flit, LinkClass, NodeId, ProtocolError, TxnId, TxnTag,
};
use crate::router::compute_source_route;
use meta::{MetaBuffer, MetaEntry};
pub use ordering::{InjectDecision, Ordering, OrderingUnit, RespBeat, ResponseOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NiError {
    #[error("response for {txn_id} (rob slot {rob_idx:?}) has no outstanding entry")]
    UnknownResponse { txn_id: TxnId, rob_idx: Option<u16> },
    #[error("reorder buffer slot {slot} already holds a beat")]
    RobSlotOccupied { slot: u16 },
    #[error("atomic with {0} while another transaction with that ID is outstanding")]
    DuplicateAtopId(TxnId),
    #[error("meta buffer at {node} overflowed on a {op:?} request")]
    MetaBufferOverflow { node: NodeId, op: AxiOp },
    #[error("write data from {src} at {node} without a pending address")]
    UnexpectedWriteData { node: NodeId, src: NodeId },
    #[error("request for {node} arrived but it has no {width} target port")]
    NoTarget { node: NodeId, width: BusWidth },
    #[error("response arrived at {node} which issues no {width} requests")]
    NoInitiator { node: NodeId, width: BusWidth },
    #[error("{id} exceeds the configured ID space of {max}")]
    TxnIdRange { id: TxnId, max: u32 },
    #[error("no source route fits from {src} to {dst}")]
    RouteTooLong { src: NodeId, dst: NodeId },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NiConfig {
    pub ordering: Ordering,
    pub rob_capacity_bytes: u32,
    /// Number of usable transaction IDs per AXI port.
    pub max_txnid: u32,
    pub ni_crossing_latency: u64,
    pub atop_buffer_depth: usize,
    pub meta_buffer_depth: usize,
    /// Backpressure the network instead of failing when the meta buffer is full.
    pub meta_flow_control: bool,
    /// Response flits a target may hold before its memory is throttled.
    pub rsp_queue_depth: usize,
    /// Requests the AXI side may queue in front of the ordering unit.
    pub axi_queue_depth: usize,
    pub ingress_depth: usize,
}

impl Default for NiConfig {
    fn default() -> Self {
        NiConfig {
            ordering: Ordering::RobLess,
            rob_capacity_bytes: 8192,
            max_txnid: 32,
            ni_crossing_latency: 1,
            atop_buffer_depth: 4,
            meta_buffer_depth: 64,
            meta_flow_control: true,
            rsp_queue_depth: 4,
            axi_queue_depth: 4,
            ingress_depth: 2,
        }
    }
}

impl NiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.ordering == Ordering::Rob
            && self.rob_capacity_bytes < crate::protocol::AXI_BURST_LIMIT_BYTES
        {
            return Err(format!(
                "rob_capacity_bytes = {} cannot hold one 4096-byte burst",
                self.rob_capacity_bytes
            ));
        }
        let positive = [
            ("max_txnid", self.max_txnid as usize),
            ("atop_buffer_depth", self.atop_buffer_depth),
            ("meta_buffer_depth", self.meta_buffer_depth),
            ("rsp_queue_depth", self.rsp_queue_depth),
            ("axi_queue_depth", self.axi_queue_depth),
            ("ingress_depth", self.ingress_depth),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Structural options fixed by the fabric rather than per-NI tuning.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NiOptions {
    pub source_routing: bool,
    /// Carry responses on the request network (deadlock experiments only).
    pub merge_req_rsp: bool,
    pub log_beats: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub txn: AxiTransaction,
    pub complete_cycle: u64,
}

impl Completion {
    pub fn latency(&self) -> u64 {
        self.complete_cycle - self.txn.issue_cycle
    }
}

/// One response beat handed to the AXI side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeatRecord {
    pub cycle: u64,
    pub width: BusWidth,
    pub kind: ChannelKind,
    pub txn_id: TxnId,
    pub tag: TxnTag,
    pub beat: u16,
    pub data: u64,
    pub atop: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NiStats {
    pub stall_cycles: [u64; 2],
    pub injected: [u64; 2],
    pub retired: [u64; 2],
    pub ingress_blocked: u64,
    pub meta_peak: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    NarrowAr,
    NarrowW,
    WideAr,
    WideW,
    NarrowR,
    NarrowB,
    WideR,
    WideB,
}

const NUM_SOURCES: usize = 8;

impl Source {
    fn index(self) -> usize {
        self as usize
    }

    fn link(self) -> LinkClass {
        match self {
            Source::NarrowAr | Source::NarrowW | Source::WideAr => LinkClass::Req,
            Source::NarrowR | Source::NarrowB | Source::WideB => LinkClass::Rsp,
            Source::WideW | Source::WideR => LinkClass::Wide,
        }
    }

    fn request(width: BusWidth, op: AxiOp) -> Source {
        match (width, op) {
            (BusWidth::Narrow, AxiOp::Read) => Source::NarrowAr,
            (BusWidth::Narrow, _) => Source::NarrowW,
            (BusWidth::Wide, AxiOp::Read) => Source::WideAr,
            (BusWidth::Wide, _) => Source::WideW,
        }
    }

    fn response(width: BusWidth, kind: ChannelKind) -> Source {
        match (width, kind) {
            (BusWidth::Narrow, ChannelKind::R) => Source::NarrowR,
            (BusWidth::Narrow, _) => Source::NarrowB,
            (BusWidth::Wide, ChannelKind::R) => Source::WideR,
            (BusWidth::Wide, _) => Source::WideB,
        }
    }

    const ALL: [Source; NUM_SOURCES] = [
        Source::NarrowAr,
        Source::NarrowW,
        Source::WideAr,
        Source::WideW,
        Source::NarrowR,
        Source::NarrowB,
        Source::WideR,
        Source::WideB,
    ];
}

#[derive(Debug, Clone, Default)]
struct Egress {
    sources: Vec<usize>,
    rr: usize,
    lock: Option<usize>,
}

#[derive(Debug, Clone)]
struct Initiator {
    ar: VecDeque<AxiTransaction>,
    aw: VecDeque<AxiTransaction>,
    reads: OrderingUnit,
    writes: OrderingUnit,
    atops: HashMap<TxnId, TxnTag>,
    r_out: VecDeque<(RespBeat, bool)>,
    b_out: VecDeque<(RespBeat, bool)>,
}

#[derive(Debug, Clone)]
struct Target {
    meta: MetaBuffer,
    memory: MemoryEndpoint,
    w_pending: HashMap<NodeId, VecDeque<u64>>,
}

#[derive(Debug, Clone)]
struct Inflight {
    txn: AxiTransaction,
    remaining: u16,
}

#[derive(Debug, Clone)]
pub struct Ni {
    pub node: NodeId,
    cfg: NiConfig,
    opts: NiOptions,
    initiators: [Option<Initiator>; 2],
    targets: [Option<Target>; 2],
    queues: [VecDeque<(u64, Flit)>; NUM_SOURCES],
    egress: [Egress; 3],
    ingress: [VecDeque<(u64, Flit)>; 3],
    inflight: HashMap<TxnTag, Inflight>,
    next_handle: u64,
    completions: Vec<Completion>,
    pub beat_log: Vec<BeatRecord>,
    pub stats: NiStats,
}

impl Ni {
    pub fn new(
        node: NodeId,
        cfg: NiConfig,
        initiator: bool,
        memory: Option<MemoryEndpointConfig>,
        opts: NiOptions,
    ) -> Self {
        let initiators = BusWidth::ALL.map(|w| {
            initiator.then(|| Initiator {
                ar: VecDeque::new(),
                aw: VecDeque::new(),
                reads: OrderingUnit::new(cfg.ordering, cfg.rob_capacity_bytes, w.beat_bytes()),
                writes: OrderingUnit::new(cfg.ordering, cfg.rob_capacity_bytes, w.beat_bytes()),
                atops: HashMap::new(),
                r_out: VecDeque::new(),
                b_out: VecDeque::new(),
            })
        });
        let targets = BusWidth::ALL.map(|_| {
            memory.map(|m| Target {
                meta: MetaBuffer::new(cfg.meta_buffer_depth, cfg.atop_buffer_depth),
                memory: MemoryEndpoint::new(m),
                w_pending: HashMap::new(),
            })
        });
        let mut egress: [Egress; 3] = Default::default();
        for s in Source::ALL {
            let link = physical(s.link(), opts.merge_req_rsp);
            egress[link.index()].sources.push(s.index());
        }
        for e in &mut egress {
            e.rr = e.sources.len().saturating_sub(1);
        }
        Ni {
            node,
            cfg,
            opts,
            initiators,
            targets,
            queues: Default::default(),
            egress,
            ingress: Default::default(),
            inflight: HashMap::new(),
            next_handle: 0,
            completions: Vec::new(),
            beat_log: Vec::new(),
            stats: NiStats::default(),
        }
    }

    pub fn config(&self) -> &NiConfig {
        &self.cfg
    }

    pub fn is_initiator(&self) -> bool {
        self.initiators.iter().any(Option::is_some)
    }

    pub fn is_target(&self) -> bool {
        self.targets.iter().any(Option::is_some)
    }

    // ---- AXI side -------------------------------------------------------

    pub fn can_issue(&self, width: BusWidth, op: AxiOp) -> bool {
        let Some(init) = &self.initiators[width.index()] else {
            return false;
        };
        let q = if op == AxiOp::Read {
            &init.ar
        } else {
            &init.aw
        };
        q.len() < self.cfg.axi_queue_depth
    }

    /// Hand a transaction to the AXI request queue. Returns it back when
    /// the queue is full.
    pub fn issue(&mut self, txn: AxiTransaction) -> Result<(), AxiTransaction> {
        if !self.can_issue(txn.width, txn.op) {
            return Err(txn);
        }
        let init = self.initiators[txn.width.index()]
            .as_mut()
            .expect("checked by can_issue");
        if txn.op == AxiOp::Read {
            init.ar.push_back(txn);
        } else {
            init.aw.push_back(txn);
        }
        Ok(())
    }

    pub fn take_completions(&mut self) -> Vec<Completion> {
        std::mem::take(&mut self.completions)
    }

    pub fn outstanding(&self) -> usize {
        self.inflight.len()
    }

    pub fn rob_peak_bytes(&self) -> u32 {
        self.initiators
            .iter()
            .flatten()
            .map(|i| i.reads.rob_peak_bytes().max(i.writes.rob_peak_bytes()))
            .max()
            .unwrap_or(0)
    }

    pub fn rob_occupancy_bytes(&self) -> u32 {
        self.initiators
            .iter()
            .flatten()
            .map(|i| i.reads.rob_occupancy_bytes() + i.writes.rob_occupancy_bytes())
            .sum()
    }

    pub fn memory(&self, width: BusWidth) -> Option<&MemoryEndpoint> {
        self.targets[width.index()].as_ref().map(|t| &t.memory)
    }

    // ---- network side ---------------------------------------------------

    /// Flit this NI offers on `link` this cycle, with its source queue.
    pub fn egress_offer(&self, link: LinkClass, cycle: u64) -> Option<(usize, Flit)> {
        let e = &self.egress[link.index()];
        let ready = |s: usize| {
            self.queues[s]
                .front()
                .filter(|(at, _)| *at <= cycle)
                .map(|(_, f)| (s, *f))
        };
        if let Some(s) = e.lock {
            return ready(s);
        }
        let n = e.sources.len();
        (1..=n).map(|k| e.sources[(e.rr + k) % n]).find_map(ready)
    }

    /// Complete the handshake for an offer made by [`Ni::egress_offer`].
    pub fn egress_commit(&mut self, link: LinkClass, source: usize) -> Flit {
        let (_, flit) = self.queues[source]
            .pop_front()
            .expect("committed offer exists");
        let e = &mut self.egress[link.index()];
        e.rr = e
            .sources
            .iter()
            .position(|&s| s == source)
            .expect("source on link");
        e.lock = (is_wormhole(&flit) && !flit.header.last).then_some(source);
        flit
    }

    pub fn ingress_ready(&self, link: LinkClass) -> bool {
        self.ingress[link.index()].len() < self.cfg.ingress_depth
    }

    pub fn ingress_accept(&mut self, link: LinkClass, flit: Flit, cycle: u64) {
        debug_assert!(self.ingress_ready(link));
        self.ingress[link.index()].push_back((cycle, flit));
    }

    pub fn is_idle(&self) -> bool {
        self.inflight.is_empty()
            && self.queues.iter().all(VecDeque::is_empty)
            && self.ingress.iter().all(VecDeque::is_empty)
            && self.initiators.iter().flatten().all(|i| {
                i.ar.is_empty() && i.aw.is_empty() && i.r_out.is_empty() && i.b_out.is_empty()
            })
            && self
                .targets
                .iter()
                .flatten()
                .all(|t| t.meta.is_empty() && t.memory.is_idle())
    }

    /// Flits waiting in the interface, for deadlock reports.
    pub fn snapshot(&self) -> String {
        let q: Vec<_> = Source::ALL
            .iter()
            .filter(|s| !self.queues[s.index()].is_empty())
            .map(|s| format!("{:?}={}", s, self.queues[s.index()].len()))
            .collect();
        let ing: Vec<_> = LinkClass::ALL
            .iter()
            .filter(|l| !self.ingress[l.index()].is_empty())
            .map(|l| format!("in_{}={}", l, self.ingress[l.index()].len()))
            .collect();
        let meta: usize = self.targets.iter().flatten().map(|t| t.meta.len()).sum();
        format!(
            "ni {}: outstanding={} meta={} {} {}",
            self.node,
            self.inflight.len(),
            meta,
            q.join(" "),
            ing.join(" ")
        )
    }

    // ---- per-cycle behaviour --------------------------------------------

    pub fn tick(&mut self, cycle: u64) -> Result<(), NiError> {
        self.process_ingress(cycle)?;
        self.step_memories(cycle)?;
        for w in BusWidth::ALL {
            self.inject(w, cycle)?;
        }
        for w in BusWidth::ALL {
            self.deliver(w, cycle);
        }
        Ok(())
    }

    fn process_ingress(&mut self, cycle: u64) -> Result<(), NiError> {
        let lat = self.cfg.ni_crossing_latency;
        for link in LinkClass::ALL {
            let Some(&(arrival, flit)) = self.ingress[link.index()].front() else {
                continue;
            };
            if arrival + lat > cycle {
                continue;
            }
            if self.consume(flit, cycle)? {
                self.ingress[link.index()].pop_front();
            } else {
                self.stats.ingress_blocked += 1;
            }
        }
        Ok(())
    }

    /// Returns false when the flit has to wait for meta buffer space.
    fn consume(&mut self, flit: Flit, cycle: u64) -> Result<bool, NiError> {
        let width = flit.header.channel.width;
        match flit.header.channel.kind {
            ChannelKind::Ar | ChannelKind::Aw => self.accept_request(flit, cycle),
            ChannelKind::W => {
                let node = self.node;
                let t = self.targets[width.index()]
                    .as_mut()
                    .ok_or(NiError::NoTarget { node, width })?;
                let err = NiError::UnexpectedWriteData {
                    node,
                    src: flit.header.src,
                };
                let fifo = t.w_pending.get_mut(&flit.header.src).ok_or(err.clone())?;
                let handle = *fifo.front().ok_or(err.clone())?;
                if !t.memory.add_w_beat(handle) {
                    return Err(err);
                }
                if flit.payload.beat + 1 == flit.payload.burst_len {
                    fifo.pop_front();
                }
                Ok(true)
            }
            ChannelKind::R | ChannelKind::B => {
                self.accept_response(flit)?;
                Ok(true)
            }
        }
    }

    fn accept_request(&mut self, flit: Flit, cycle: u64) -> Result<bool, NiError> {
        let width = flit.header.channel.width;
        let node = self.node;
        let flow_control = self.cfg.meta_flow_control;
        let t = self.targets[width.index()]
            .as_mut()
            .ok_or(NiError::NoTarget { node, width })?;
        let op = flit.payload.op;
        if flow_control && !t.meta.has_room(op) {
            return Ok(false);
        }
        let txn = AxiTransaction {
            txn_id: flit.header.txn_id,
            op,
            width,
            src: flit.header.src,
            dst: flit.header.dst,
            burst_len: flit.payload.burst_len,
            beat_bytes: width.beat_bytes(),
            issue_cycle: cycle,
            tag: flit.tag,
        };
        let handle = self.next_handle;
        self.next_handle += 1;
        let downstream_id = t.meta.push(MetaEntry {
            txn,
            rob_idx: flit.header.rob_idx,
            handle,
        })?;
        self.stats.meta_peak = self.stats.meta_peak.max(t.meta.peak());
        t.memory.push(MemRequest {
            handle,
            downstream_id,
            op,
            burst_len: txn.burst_len,
            addr: txn.tag,
            arrival: cycle,
        });
        if op != AxiOp::Read {
            t.w_pending.entry(txn.src).or_default().push_back(handle);
        }
        Ok(true)
    }

    fn accept_response(&mut self, flit: Flit) -> Result<(), NiError> {
        let width = flit.header.channel.width;
        let node = self.node;
        let init = self.initiators[width.index()]
            .as_mut()
            .ok_or(NiError::NoInitiator { node, width })?;
        let kind = flit.header.channel.kind;
        let beat = RespBeat {
            txn_id: flit.header.txn_id,
            rob_idx: flit.header.rob_idx,
            tag: flit.tag,
            beat: flit.payload.beat,
            data: flit.payload.data,
            last: kind == ChannelKind::B || flit.payload.beat + 1 == flit.payload.burst_len,
        };
        let out = if kind == ChannelKind::R {
            &mut init.r_out
        } else {
            &mut init.b_out
        };
        if flit.header.atop {
            if init.atops.get(&beat.txn_id) != Some(&beat.tag) {
                return Err(NiError::UnknownResponse {
                    txn_id: beat.txn_id,
                    rob_idx: None,
                });
            }
            out.push_back((beat, true));
            return Ok(());
        }
        let unit = if kind == ChannelKind::R {
            &mut init.reads
        } else {
            &mut init.writes
        };
        let outcome = unit.handle_response(beat)?;
        out.extend(outcome.beats().map(|b| (*b, false)));
        Ok(())
    }

    fn response_room(&self, width: BusWidth) -> ResponseRoom {
        let depth = self.cfg.rsp_queue_depth;
        ResponseRoom {
            r: self.queues[Source::response(width, ChannelKind::R).index()].len() < depth,
            b: self.queues[Source::response(width, ChannelKind::B).index()].len() < depth,
        }
    }

    fn step_memories(&mut self, cycle: u64) -> Result<(), NiError> {
        let ready_at = cycle + self.cfg.ni_crossing_latency;
        for width in BusWidth::ALL {
            if self.targets[width.index()].is_none() {
                continue;
            }
            let room = self.response_room(width);
            let t = self.targets[width.index()].as_mut().expect("checked");
            let events = t.memory.step(cycle, room);
            let mut flits = Vec::with_capacity(2);
            for ev in events {
                let orphan = |id: u32| NiError::UnknownResponse {
                    txn_id: TxnId(id),
                    rob_idx: None,
                };
                match ev {
                    MemEvent::ReadBeat {
                        downstream_id,
                        beat,
                        last,
                        data,
                    } => {
                        let e = *t.meta.front_read().ok_or(orphan(downstream_id))?;
                        if last {
                            t.meta.pop_read();
                        }
                        flits.push(response_flit(&e.txn, ChannelKind::R, beat, data, e.rob_idx));
                    }
                    MemEvent::WriteDone { downstream_id } => {
                        let e = t.meta.pop_write().ok_or(orphan(downstream_id))?;
                        flits.push(response_flit(&e.txn, ChannelKind::B, 0, 0, e.rob_idx));
                    }
                    MemEvent::AtomicDone {
                        downstream_id,
                        data,
                    } => {
                        let e = t
                            .meta
                            .take_atop(downstream_id)
                            .ok_or(orphan(downstream_id))?;
                        flits.push(response_flit(&e.txn, ChannelKind::R, 0, data, None));
                        flits.push(response_flit(&e.txn, ChannelKind::B, 0, 0, None));
                    }
                }
            }
            for mut f in flits {
                self.attach_route(&mut f)?;
                let s = Source::response(width, f.header.channel.kind);
                self.queues[s.index()].push_back((ready_at, f));
            }
        }
        Ok(())
    }

    fn attach_route(&self, flit: &mut Flit) -> Result<(), NiError> {
        if self.opts.source_routing {
            let (src, dst) = (flit.header.src, flit.header.dst);
            flit.header.route =
                Some(compute_source_route(src, dst).ok_or(NiError::RouteTooLong { src, dst })?);
        }
        Ok(())
    }

    fn inject(&mut self, width: BusWidth, cycle: u64) -> Result<(), NiError> {
        if self.initiators[width.index()].is_none() {
            return Ok(());
        }
        for op_read in [true, false] {
            let init = self.initiators[width.index()].as_mut().expect("checked");
            let queue = if op_read { &init.ar } else { &init.aw };
            let Some(&txn) = queue.front() else { continue };
            if txn.txn_id.0 >= self.cfg.max_txnid {
                return Err(NiError::TxnIdRange {
                    id: txn.txn_id,
                    max: self.cfg.max_txnid,
                });
            }
            let id = txn.txn_id;
            let decision = if txn.op == AxiOp::Atomic {
                if init.reads.outstanding(id) > 0
                    || init.writes.outstanding(id) > 0
                    || init.atops.contains_key(&id)
                {
                    return Err(NiError::DuplicateAtopId(id));
                }
                init.atops.insert(id, txn.tag);
                InjectDecision::Inject { rob_idx: None }
            } else {
                if init.atops.contains_key(&id) {
                    return Err(NiError::DuplicateAtopId(id));
                }
                let unit = if op_read {
                    &mut init.reads
                } else {
                    &mut init.writes
                };
                unit.try_inject(&txn)
            };
            let InjectDecision::Inject { rob_idx } = decision else {
                self.stats.stall_cycles[width.index()] += 1;
                continue;
            };
            if op_read {
                init.ar.pop_front();
            } else {
                init.aw.pop_front();
            }
            let mut flits = packetize_request(&txn, rob_idx);
            for f in &mut flits {
                self.attach_route(f)?;
            }
            let s = Source::request(width, txn.op).index();
            let ready_at = cycle + self.cfg.ni_crossing_latency;
            self.queues[s].extend(flits.into_iter().map(|f| (ready_at, f)));
            self.inflight.insert(
                txn.tag,
                Inflight {
                    txn,
                    remaining: txn.response_beats(),
                },
            );
            self.stats.injected[width.index()] += 1;
        }
        Ok(())
    }

    fn deliver(&mut self, width: BusWidth, cycle: u64) {
        let Some(init) = self.initiators[width.index()].as_mut() else {
            return;
        };
        let beats = [
            init.r_out.pop_front().map(|b| (ChannelKind::R, b)),
            init.b_out.pop_front().map(|b| (ChannelKind::B, b)),
        ];
        for (kind, (beat, atop)) in beats.into_iter().flatten() {
            if self.opts.log_beats {
                self.beat_log.push(BeatRecord {
                    cycle,
                    width,
                    kind,
                    txn_id: beat.txn_id,
                    tag: beat.tag,
                    beat: beat.beat,
                    data: beat.data,
                    atop,
                });
            }
            let Some(inf) = self.inflight.get_mut(&beat.tag) else {
                continue;
            };
            inf.remaining -= 1;
            if inf.remaining > 0 {
                continue;
            }
            let txn = inf.txn;
            self.inflight.remove(&beat.tag);
            if txn.op == AxiOp::Atomic {
                init.atops.remove(&txn.txn_id);
            }
            self.stats.retired[width.index()] += 1;
            self.completions.push(Completion {
                txn,
                complete_cycle: cycle,
            });
        }
    }
}

/// Physical network a logical link class travels on.
pub fn physical(link: LinkClass, merge_req_rsp: bool) -> LinkClass {
    if merge_req_rsp && link == LinkClass::Rsp {
        LinkClass::Req
    } else {
        link
    }
}
