//! Multi-channel DMA engine on the wide AXI port.
//!
//! Each channel (backend) owns one transaction ID. Transfers are cut into
//! bursts of at most 4 KiB; the frontend serves active transfers round-robin
//! and steers each burst to a channel that is idle or already busy with the
//! same destination, so independent streams do not share an ID.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TagGen;
use crate::ni::{Completion, Ni};
use crate::protocol::{
    AxiOp, AxiTransaction, BusWidth, NodeId, TxnId, TxnTag, AXI_BURST_LIMIT_BYTES, WIDE_BEAT_BYTES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmaConfig {
    pub num_channels: usize,
    pub max_outstanding_per_channel: usize,
    pub burst_bytes: u32,
    pub wide_beat_bytes: u32,
}

impl Default for DmaConfig {
    fn default() -> Self {
        DmaConfig {
            num_channels: 4,
            max_outstanding_per_channel: 2,
            burst_bytes: AXI_BURST_LIMIT_BYTES,
            wide_beat_bytes: WIDE_BEAT_BYTES,
        }
    }
}

impl DmaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=4).contains(&self.num_channels) {
            return Err(format!(
                "num_channels must be in 1..=4, got {}",
                self.num_channels
            ));
        }
        if self.max_outstanding_per_channel == 0 {
            return Err("max_outstanding_per_channel must be at least 1".into());
        }
        if self.wide_beat_bytes != WIDE_BEAT_BYTES {
            return Err(format!("wide_beat_bytes must be {WIDE_BEAT_BYTES}"));
        }
        if self.burst_bytes == 0
            || self.burst_bytes > AXI_BURST_LIMIT_BYTES
            || !self.burst_bytes.is_multiple_of(self.wide_beat_bytes)
        {
            return Err(format!(
                "burst_bytes must be a multiple of {} up to {}, got {}",
                self.wide_beat_bytes, AXI_BURST_LIMIT_BYTES, self.burst_bytes
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferOp {
    Read,
    Write,
}

impl From<TransferOp> for AxiOp {
    fn from(op: TransferOp) -> AxiOp {
        match op {
            TransferOp::Read => AxiOp::Read,
            TransferOp::Write => AxiOp::Write,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub src: NodeId,
    pub dst: NodeId,
    pub bytes: u64,
    pub op: TransferOp,
    #[serde(default)]
    pub start_cycle: u64,
}

/// Beats of each burst when `bytes` are cut into `burst_bytes` pieces.
pub fn split_bursts(bytes: u64, burst_bytes: u32, beat_bytes: u32) -> Vec<u16> {
    let mut out = Vec::new();
    let mut left = bytes;
    while left > 0 {
        let chunk = left.min(burst_bytes as u64);
        out.push(chunk.div_ceil(beat_bytes as u64) as u16);
        left -= chunk;
    }
    out
}

/// Static plan of one transfer in isolation: bursts dealt round-robin over
/// the channels, each carrying its channel's ID.
pub fn dma_issue(spec: &TransferSpec, cfg: &DmaConfig) -> Vec<AxiTransaction> {
    split_bursts(spec.bytes, cfg.burst_bytes, cfg.wide_beat_bytes)
        .into_iter()
        .enumerate()
        .map(|(i, beats)| AxiTransaction {
            txn_id: TxnId((i % cfg.num_channels) as u32),
            op: spec.op.into(),
            width: BusWidth::Wide,
            src: spec.src,
            dst: spec.dst,
            burst_len: beats,
            beat_bytes: cfg.wide_beat_bytes,
            issue_cycle: spec.start_cycle,
            tag: TxnTag(i as u64),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRecord {
    pub spec: TransferSpec,
    pub first_issue: Option<u64>,
    pub complete_cycle: Option<u64>,
    pub bytes_done: u64,
}

#[derive(Debug, Clone)]
struct Active {
    bursts: Vec<u16>,
    next: usize,
    done: usize,
}

#[derive(Debug, Clone)]
pub struct DmaEngine {
    cfg: DmaConfig,
    transfers: Vec<Active>,
    records: Vec<TransferRecord>,
    channels: Vec<Vec<(TxnTag, NodeId)>>,
    owner: HashMap<TxnTag, (usize, usize)>,
    rr_transfer: usize,
    rr_channel: usize,
}

impl DmaEngine {
    pub fn new(cfg: DmaConfig) -> Self {
        DmaEngine {
            cfg,
            transfers: Vec::new(),
            records: Vec::new(),
            channels: vec![Vec::new(); cfg.num_channels],
            owner: HashMap::new(),
            rr_transfer: usize::MAX,
            rr_channel: cfg.num_channels - 1,
        }
    }

    pub fn add_transfer(&mut self, spec: TransferSpec) {
        let bursts = split_bursts(spec.bytes, self.cfg.burst_bytes, self.cfg.wide_beat_bytes);
        self.transfers.push(Active {
            bursts,
            next: 0,
            done: 0,
        });
        self.records.push(TransferRecord {
            spec,
            first_issue: None,
            complete_cycle: None,
            bytes_done: 0,
        });
    }

    pub fn records(&self) -> &[TransferRecord] {
        &self.records
    }

    pub fn is_done(&self) -> bool {
        self.transfers.iter().all(|t| t.done == t.bursts.len())
    }

    pub fn outstanding(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }

    fn pick_channel(&self, dst: NodeId) -> Option<usize> {
        let n = self.channels.len();
        let order = || (1..=n).map(|k| (self.rr_channel + k) % n);
        let has_room = |c: usize| self.channels[c].len() < self.cfg.max_outstanding_per_channel;
        order()
            .find(|&c| has_room(c) && self.channels[c].iter().all(|(_, d)| *d == dst))
            .or_else(|| order().find(|&c| has_room(c)))
    }

    /// Offer at most one burst to the NI.
    pub fn step(&mut self, cycle: u64, ni: &mut Ni, tags: &mut TagGen) {
        let n = self.transfers.len();
        for k in 1..=n {
            let t = self.rr_transfer.wrapping_add(k) % n;
            let spec = self.records[t].spec;
            let active = &self.transfers[t];
            if spec.start_cycle > cycle || active.next >= active.bursts.len() {
                continue;
            }
            let op: AxiOp = spec.op.into();
            if !ni.can_issue(BusWidth::Wide, op) {
                continue;
            }
            let Some(ch) = self.pick_channel(spec.dst) else {
                return;
            };
            let txn = AxiTransaction {
                txn_id: TxnId(ch as u32),
                op,
                width: BusWidth::Wide,
                src: spec.src,
                dst: spec.dst,
                burst_len: active.bursts[active.next],
                beat_bytes: self.cfg.wide_beat_bytes,
                issue_cycle: cycle,
                tag: tags.next_tag(),
            };
            if ni.issue(txn).is_err() {
                return;
            }
            self.transfers[t].next += 1;
            self.records[t].first_issue.get_or_insert(cycle);
            self.channels[ch].push((txn.tag, txn.dst));
            self.owner.insert(txn.tag, (t, ch));
            self.rr_transfer = t;
            self.rr_channel = ch;
            return;
        }
    }

    /// Account a finished burst. Returns false for completions that do not
    /// belong to this engine.
    pub fn on_completion(&mut self, c: &Completion) -> bool {
        let Some((t, ch)) = self.owner.remove(&c.txn.tag) else {
            return false;
        };
        self.channels[ch].retain(|(tag, _)| *tag != c.txn.tag);
        let active = &mut self.transfers[t];
        active.done += 1;
        let rec = &mut self.records[t];
        // the tail burst may end mid-beat
        rec.bytes_done = (rec.bytes_done + c.txn.bytes() as u64).min(rec.spec.bytes);
        if active.done == active.bursts.len() {
            rec.complete_cycle = Some(c.complete_cycle);
        }
        true
    }
}
