//! Narrow-port request generators standing in for the tile's cores.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pattern::{pattern_destination, Pattern, PatternParams};
use super::TagGen;
use crate::ni::{Completion, Ni};
use crate::protocol::{AxiOp, AxiTransaction, BusWidth, NodeId, ProtocolError, TxnId, TxnTag};

/// Cores with a narrow port per tile.
pub const CORES_PER_TILE: u8 = 9;
/// Atomics of core `c` use ID `ATOP_ID_BASE + c`.
pub const ATOP_ID_BASE: u32 = 16;

/// Single-beat narrow transaction from core `core_id` of `tile`.
pub fn core_request(
    tile: NodeId,
    core_id: u8,
    dst: NodeId,
    op: AxiOp,
    tag: TxnTag,
) -> Result<AxiTransaction, ProtocolError> {
    if core_id >= CORES_PER_TILE {
        return Err(ProtocolError::TxnIdRange {
            value: core_id as u32,
            width_bits: 4,
        });
    }
    let id = if op == AxiOp::Atomic {
        ATOP_ID_BASE + core_id as u32
    } else {
        core_id as u32
    };
    AxiTransaction::new(TxnId(id), op, BusWidth::Narrow, tile, dst, 1, tag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptOp {
    pub dst: NodeId,
    pub op: AxiOp,
    #[serde(default = "one")]
    pub burst_len: u16,
}

fn one() -> u16 {
    1
}

/// Open-loop random narrow traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomTraffic {
    pub pattern: Pattern,
    /// New transactions per cycle per core.
    pub rate: f64,
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub read_fraction: f64,
    pub write_fraction: f64,
    pub atomic_fraction: f64,
    /// Probability that a request targets the HBM channel of a random row.
    pub hbm_fraction: f64,
    pub max_burst: u16,
    pub max_outstanding: usize,
}

impl Default for RandomTraffic {
    fn default() -> Self {
        RandomTraffic {
            pattern: Pattern::UniformRandom,
            rate: 0.1,
            start_cycle: 0,
            end_cycle: 10_000,
            read_fraction: 1.0,
            write_fraction: 0.0,
            atomic_fraction: 0.0,
            hbm_fraction: 0.0,
            max_burst: 1,
            max_outstanding: 1,
        }
    }
}

impl RandomTraffic {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(format!("rate must be in [0, 1], got {}", self.rate));
        }
        let fracs = [
            self.read_fraction,
            self.write_fraction,
            self.atomic_fraction,
        ];
        if fracs.iter().any(|f| *f < 0.0) || fracs.iter().sum::<f64>() <= 0.0 {
            return Err("operation fractions must be non-negative and not all zero".into());
        }
        if !(0.0..=1.0).contains(&self.hbm_fraction) {
            return Err("hbm_fraction must be in [0, 1]".into());
        }
        if self.max_burst == 0 || self.max_burst as u32 * 8 > crate::protocol::AXI_BURST_LIMIT_BYTES
        {
            return Err(format!(
                "max_burst must be in 1..=512, got {}",
                self.max_burst
            ));
        }
        if self.max_outstanding == 0 {
            return Err("max_outstanding must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Idle,
    /// Closed loop: each op waits for the previous one plus `gap` cycles.
    Script {
        ops: VecDeque<ScriptOp>,
        gap: u64,
        next_at: u64,
    },
    /// Closed loop reads to one destination until stopped.
    Probe {
        dst: NodeId,
        running: bool,
    },
    Random {
        cfg: RandomTraffic,
        rng: Box<ChaCha8Rng>,
        dims: (usize, usize),
        params: PatternParams,
    },
}

#[derive(Debug, Clone)]
pub struct CoreGen {
    pub node: NodeId,
    pub core_id: u8,
    mode: Mode,
    outstanding: HashSet<TxnTag>,
    atop_outstanding: bool,
    pending: Option<AxiTransaction>,
}

impl CoreGen {
    fn with_mode(node: NodeId, core_id: u8, mode: Mode) -> Self {
        CoreGen {
            node,
            core_id,
            mode,
            outstanding: HashSet::new(),
            atop_outstanding: false,
            pending: None,
        }
    }

    pub fn idle(node: NodeId, core_id: u8) -> Self {
        Self::with_mode(node, core_id, Mode::Idle)
    }

    pub fn script(node: NodeId, core_id: u8, ops: Vec<ScriptOp>, gap: u64) -> Self {
        Self::with_mode(
            node,
            core_id,
            Mode::Script {
                ops: ops.into(),
                gap,
                next_at: 0,
            },
        )
    }

    pub fn probe(node: NodeId, core_id: u8, dst: NodeId) -> Self {
        Self::with_mode(node, core_id, Mode::Probe { dst, running: true })
    }

    pub fn random(
        node: NodeId,
        core_id: u8,
        cfg: RandomTraffic,
        rng: ChaCha8Rng,
        dims: (usize, usize),
        params: PatternParams,
    ) -> Self {
        Self::with_mode(
            node,
            core_id,
            Mode::Random {
                cfg,
                rng: Box::new(rng),
                dims,
                params,
            },
        )
    }

    pub fn stop_probe(&mut self) {
        if let Mode::Probe { running, .. } = &mut self.mode {
            *running = false;
        }
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }

    pub fn is_done(&self, cycle: u64) -> bool {
        let source_done = match &self.mode {
            Mode::Idle => true,
            Mode::Script { ops, .. } => ops.is_empty(),
            Mode::Probe { running, .. } => !running,
            Mode::Random { cfg, .. } => cycle >= cfg.end_cycle,
        };
        source_done && self.pending.is_none() && self.outstanding.is_empty()
    }

    fn build(&mut self, cycle: u64, tags: &mut TagGen) -> Option<AxiTransaction> {
        let node = self.node;
        let core = self.core_id;
        let closed_loop_free = self.outstanding.is_empty();
        match &mut self.mode {
            Mode::Idle => None,
            Mode::Script {
                ops,
                gap: _,
                next_at,
            } => {
                if !closed_loop_free || cycle < *next_at {
                    return None;
                }
                let op = ops.pop_front()?;
                let mut txn = core_request(node, core, op.dst, op.op, tags.next_tag()).ok()?;
                if op.op != AxiOp::Atomic {
                    txn.burst_len = op.burst_len.max(1);
                }
                Some(txn)
            }
            Mode::Probe { dst, running } => {
                if !*running || !closed_loop_free {
                    return None;
                }
                core_request(node, core, *dst, AxiOp::Read, tags.next_tag()).ok()
            }
            Mode::Random {
                cfg,
                rng,
                dims,
                params,
            } => {
                if cycle < cfg.start_cycle
                    || cycle >= cfg.end_cycle
                    || self.outstanding.len() >= cfg.max_outstanding
                    || !rng.gen_bool(cfg.rate)
                {
                    return None;
                }
                let total = cfg.read_fraction + cfg.write_fraction + cfg.atomic_fraction;
                let u = rng.gen::<f64>() * total;
                let mut op = if u < cfg.read_fraction {
                    AxiOp::Read
                } else if u < cfg.read_fraction + cfg.write_fraction {
                    AxiOp::Write
                } else {
                    AxiOp::Atomic
                };
                if op == AxiOp::Atomic && self.atop_outstanding {
                    op = AxiOp::Read;
                }
                let dst = if cfg.hbm_fraction > 0.0 && rng.gen_bool(cfg.hbm_fraction) {
                    NodeId::hbm(rng.gen_range(0..dims.1) as i16)
                } else {
                    pattern_destination(cfg.pattern, node, *dims, rng.as_mut(), params)
                };
                let beats = rng.gen_range(1..=cfg.max_burst);
                let mut txn = core_request(node, core, dst, op, tags.next_tag()).ok()?;
                if op != AxiOp::Atomic {
                    txn.burst_len = beats;
                }
                Some(txn)
            }
        }
    }

    pub fn step(&mut self, cycle: u64, ni: &mut Ni, tags: &mut TagGen) {
        if self.pending.is_none() {
            self.pending = self.build(cycle, tags).map(|mut t| {
                t.issue_cycle = cycle;
                t
            });
        }
        let Some(txn) = self.pending else { return };
        if ni.issue(txn).is_ok() {
            self.pending = None;
            self.outstanding.insert(txn.tag);
            if txn.op == AxiOp::Atomic {
                self.atop_outstanding = true;
            }
        }
    }

    pub fn on_completion(&mut self, c: &Completion) -> bool {
        if !self.outstanding.remove(&c.txn.tag) {
            return false;
        }
        if c.txn.op == AxiOp::Atomic {
            self.atop_outstanding = false;
        }
        if let Mode::Script { gap, next_at, .. } = &mut self.mode {
            *next_at = c.complete_cycle + 1 + *gap;
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_ids_are_unique_per_core() {
        let t = NodeId::tile(0, 0);
        let d = NodeId::tile(1, 0);
        let a = core_request(t, 0, d, AxiOp::Read, TxnTag(1)).unwrap();
        let b = core_request(t, 3, d, AxiOp::Read, TxnTag(2)).unwrap();
        assert_ne!(a.txn_id, b.txn_id);
        assert_eq!(a.burst_len, 1);
        assert_eq!(a.width, BusWidth::Narrow);
        let atop = core_request(t, 3, d, AxiOp::Atomic, TxnTag(3)).unwrap();
        assert_eq!(atop.txn_id, TxnId(ATOP_ID_BASE + 3));
        assert!(core_request(t, 9, d, AxiOp::Read, TxnTag(4)).is_err());
    }

    #[test]
    fn minimal_read_is_one_flit_each_way() {
        let t = core_request(
            NodeId::tile(0, 0),
            0,
            NodeId::tile(1, 0),
            AxiOp::Read,
            TxnTag(1),
        )
        .unwrap();
        let p = crate::protocol::packetize(&t).unwrap();
        assert_eq!(p.request.len(), 1);
        assert_eq!(p.response.len(), 1);
    }
}
