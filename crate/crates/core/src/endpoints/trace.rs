//! Replay of a pre-generated transaction list.
//!
//! Transactions leave strictly in list order. Because the list, the tags and
//! the IDs are fixed before the run, two runs that differ only in timing
//! issue exactly the same transactions in the same order.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pattern::{pattern_destination, Pattern, PatternParams};
use super::TagGen;
use crate::ni::{Completion, Ni};
use crate::protocol::{
    AxiOp, AxiTransaction, BusWidth, NodeId, TxnId, TxnTag, AXI_BURST_LIMIT_BYTES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOp {
    pub txn: AxiTransaction,
    pub not_before: u64,
}

#[derive(Debug, Clone)]
pub struct TraceGen {
    ops: VecDeque<TraceOp>,
    max_outstanding: usize,
    outstanding: HashMap<TxnTag, (BusWidth, TxnId, AxiOp)>,
}

impl TraceGen {
    pub fn new(ops: Vec<TraceOp>, max_outstanding: usize) -> Self {
        TraceGen {
            ops: ops.into(),
            max_outstanding,
            outstanding: HashMap::new(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.ops.len()
    }

    pub fn is_done(&self) -> bool {
        self.ops.is_empty() && self.outstanding.is_empty()
    }

    /// An atomic needs its ID to be otherwise unused, and nothing may reuse
    /// the ID of an atomic in flight.
    fn id_clear(&self, txn: &AxiTransaction) -> bool {
        self.outstanding.values().all(|&(w, id, op)| {
            w != txn.width || id != txn.txn_id || (op != AxiOp::Atomic && txn.op != AxiOp::Atomic)
        })
    }

    pub fn step(&mut self, cycle: u64, ni: &mut Ni) {
        let Some(next) = self.ops.front() else { return };
        let mut txn = next.txn;
        if cycle < next.not_before
            || self.outstanding.len() >= self.max_outstanding
            || !self.id_clear(&txn)
        {
            return;
        }
        txn.issue_cycle = cycle;
        if ni.issue(txn).is_ok() {
            self.ops.pop_front();
            self.outstanding
                .insert(txn.tag, (txn.width, txn.txn_id, txn.op));
        }
    }

    pub fn on_completion(&mut self, c: &Completion) -> bool {
        self.outstanding.remove(&c.txn.tag).is_some()
    }
}

/// Parameters of randomised mixed traffic used for ordering experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixedTraffic {
    pub txns_per_tile: usize,
    /// Mean spacing between successive arrivals at one tile.
    pub mean_gap: u64,
    pub wide_fraction: f64,
    pub read_fraction: f64,
    pub write_fraction: f64,
    pub atomic_fraction: f64,
    pub hbm_fraction: f64,
    /// Distinct IDs drawn per AXI port.
    pub ids: u32,
    pub max_narrow_burst: u16,
    pub max_wide_burst: u16,
    pub max_outstanding: usize,
}

impl Default for MixedTraffic {
    fn default() -> Self {
        MixedTraffic {
            txns_per_tile: 64,
            mean_gap: 4,
            wide_fraction: 0.3,
            read_fraction: 0.6,
            write_fraction: 0.3,
            atomic_fraction: 0.1,
            hbm_fraction: 0.1,
            ids: 3,
            max_narrow_burst: 4,
            max_wide_burst: 16,
            max_outstanding: 8,
        }
    }
}

impl MixedTraffic {
    pub fn validate(&self) -> Result<(), String> {
        let f = [
            self.read_fraction,
            self.write_fraction,
            self.atomic_fraction,
        ];
        if f.iter().any(|v| *v < 0.0) || f.iter().sum::<f64>() <= 0.0 {
            return Err("operation fractions must be non-negative and not all zero".into());
        }
        if !(0.0..=1.0).contains(&self.wide_fraction) || !(0.0..=1.0).contains(&self.hbm_fraction) {
            return Err("wide_fraction and hbm_fraction must be in [0, 1]".into());
        }
        if self.ids == 0 || self.max_outstanding == 0 {
            return Err("ids and max_outstanding must be at least 1".into());
        }
        let narrow_ok = (1..=AXI_BURST_LIMIT_BYTES / 8).contains(&(self.max_narrow_burst as u32));
        let wide_ok = (1..=AXI_BURST_LIMIT_BYTES / 64).contains(&(self.max_wide_burst as u32));
        if !narrow_ok || !wide_ok {
            return Err("burst limits must be between 1 and the 4 KiB limit".into());
        }
        Ok(())
    }
}

/// Draw a transaction list for tile `src`.
pub fn mixed_trace<R: Rng + ?Sized>(
    src: NodeId,
    cfg: &MixedTraffic,
    dims: (usize, usize),
    hbm_rows: bool,
    tags: &mut TagGen,
    rng: &mut R,
) -> Vec<TraceOp> {
    let total = cfg.read_fraction + cfg.write_fraction + cfg.atomic_fraction;
    let mut at = 0u64;
    let mut ops = Vec::with_capacity(cfg.txns_per_tile);
    for _ in 0..cfg.txns_per_tile {
        at += rng.gen_range(0..=2 * cfg.mean_gap);
        let width = if rng.gen_bool(cfg.wide_fraction) {
            BusWidth::Wide
        } else {
            BusWidth::Narrow
        };
        let u = rng.gen::<f64>() * total;
        let op = if u < cfg.read_fraction {
            AxiOp::Read
        } else if u < cfg.read_fraction + cfg.write_fraction {
            AxiOp::Write
        } else {
            AxiOp::Atomic
        };
        let dst = if hbm_rows && rng.gen_bool(cfg.hbm_fraction) {
            NodeId::hbm(rng.gen_range(0..dims.1) as i16)
        } else {
            pattern_destination(
                Pattern::UniformRandom,
                src,
                dims,
                rng,
                &PatternParams::default(),
            )
        };
        let max_burst = match width {
            BusWidth::Narrow => cfg.max_narrow_burst,
            BusWidth::Wide => cfg.max_wide_burst,
        };
        let burst_len = if op == AxiOp::Atomic {
            1
        } else {
            rng.gen_range(1..=max_burst)
        };
        let id = TxnId(rng.gen_range(0..cfg.ids));
        let txn = AxiTransaction {
            txn_id: id,
            op,
            width,
            src,
            dst,
            burst_len,
            beat_bytes: width.beat_bytes(),
            issue_cycle: at,
            tag: tags.next_tag(),
        };
        ops.push(TraceOp {
            txn,
            not_before: at,
        });
    }
    ops
}
