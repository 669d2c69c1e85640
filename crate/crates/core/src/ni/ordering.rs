//! Ordering units that keep same-ID AXI responses in issue order.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::NiError;
use crate::protocol::{AxiTransaction, NodeId, TxnId, TxnTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Rob,
    RobLess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectDecision {
    Inject { rob_idx: Option<u16> },
    Stall,
}

/// A response beat as seen by the ordering unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RespBeat {
    pub txn_id: TxnId,
    pub rob_idx: Option<u16>,
    pub tag: TxnTag,
    pub beat: u16,
    pub data: u64,
    /// Final response beat of its transaction.
    pub last: bool,
}

/// Beats that may leave towards the AXI side, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResponseOutcome {
    /// The arriving beat when it could be forwarded directly.
    pub forwarded: Option<RespBeat>,
    /// Previously buffered beats that became in-order.
    pub released: Vec<RespBeat>,
}

impl ResponseOutcome {
    pub fn buffered(&self) -> bool {
        self.forwarded.is_none()
    }

    pub fn beats(&self) -> impl Iterator<Item = &RespBeat> {
        self.forwarded.iter().chain(self.released.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobLessCounter {
    pub outstanding: u32,
    pub last_dst: NodeId,
}

/// Stall-based ordering: a TxnId may only have outstanding requests to a
/// single destination at a time.
#[derive(Debug, Clone, Default)]
pub struct RobLessUnit {
    counters: HashMap<TxnId, RobLessCounter>,
}

impl RobLessUnit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn counter(&self, id: TxnId) -> Option<&RobLessCounter> {
        self.counters.get(&id)
    }

    pub fn try_inject(&mut self, txn: &AxiTransaction) -> InjectDecision {
        match self.counters.get_mut(&txn.txn_id) {
            Some(c) if c.outstanding > 0 && c.last_dst != txn.dst => InjectDecision::Stall,
            Some(c) => {
                c.outstanding += 1;
                c.last_dst = txn.dst;
                InjectDecision::Inject { rob_idx: None }
            }
            None => {
                self.counters.insert(
                    txn.txn_id,
                    RobLessCounter {
                        outstanding: 1,
                        last_dst: txn.dst,
                    },
                );
                InjectDecision::Inject { rob_idx: None }
            }
        }
    }

    pub fn handle_response(&mut self, beat: RespBeat) -> Result<ResponseOutcome, NiError> {
        let c = self
            .counters
            .get_mut(&beat.txn_id)
            .ok_or(NiError::UnknownResponse {
                txn_id: beat.txn_id,
                rob_idx: beat.rob_idx,
            })?;
        if beat.last {
            c.outstanding -= 1;
            if c.outstanding == 0 {
                self.counters.remove(&beat.txn_id);
            }
        }
        Ok(ResponseOutcome {
            forwarded: Some(beat),
            released: Vec::new(),
        })
    }

    pub fn outstanding(&self, id: TxnId) -> u32 {
        self.counters.get(&id).map_or(0, |c| c.outstanding)
    }

    pub fn total_outstanding(&self) -> u32 {
        self.counters.values().map(|c| c.outstanding).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReorderTableEntry {
    pub txn_id: TxnId,
    pub rob_idx: Option<u16>,
    pub dst: NodeId,
    pub tag: TxnTag,
    pub expected_beats: u16,
    pub received: u16,
    pub forwarded: u16,
}

impl ReorderTableEntry {
    pub fn in_order(&self) -> bool {
        self.rob_idx.is_none()
    }
}

/// Reorder-buffer based ordering with end-to-end flow control: a request
/// that may return out of order is only injected once storage for its
/// whole response is reserved.
#[derive(Debug, Clone)]
pub struct RobUnit {
    beat_bytes: u32,
    slots: Vec<Option<RespBeat>>,
    allocated: Vec<bool>,
    allocated_count: usize,
    peak_allocated: usize,
    table: HashMap<TxnId, VecDeque<ReorderTableEntry>>,
}

impl RobUnit {
    pub fn new(capacity_bytes: u32, beat_bytes: u32) -> Self {
        let n = (capacity_bytes / beat_bytes) as usize;
        RobUnit {
            beat_bytes,
            slots: vec![None; n],
            allocated: vec![false; n],
            allocated_count: 0,
            peak_allocated: 0,
            table: HashMap::new(),
        }
    }

    pub fn capacity_bytes(&self) -> u32 {
        self.slots.len() as u32 * self.beat_bytes
    }

    pub fn occupancy_bytes(&self) -> u32 {
        self.allocated_count as u32 * self.beat_bytes
    }

    pub fn peak_bytes(&self) -> u32 {
        self.peak_allocated as u32 * self.beat_bytes
    }

    pub fn buffered_beats(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn entries(&self, id: TxnId) -> impl Iterator<Item = &ReorderTableEntry> {
        self.table.get(&id).into_iter().flatten()
    }

    fn first_fit(&self, len: usize) -> Option<usize> {
        let mut run = 0;
        for (i, used) in self.allocated.iter().enumerate() {
            if *used {
                run = 0;
            } else {
                run += 1;
                if run == len {
                    return Some(i + 1 - len);
                }
            }
        }
        None
    }

    pub fn try_inject(&mut self, txn: &AxiTransaction) -> InjectDecision {
        let expected = txn.response_beats();
        let fifo = self.table.entry(txn.txn_id).or_default();
        let needs_slot = !fifo.iter().all(|e| e.dst == txn.dst);
        let rob_idx = if needs_slot {
            let Some(start) = self.first_fit(expected as usize) else {
                return InjectDecision::Stall;
            };
            for a in &mut self.allocated[start..start + expected as usize] {
                *a = true;
            }
            self.allocated_count += expected as usize;
            self.peak_allocated = self.peak_allocated.max(self.allocated_count);
            Some(start as u16)
        } else {
            None
        };
        self.table
            .entry(txn.txn_id)
            .or_default()
            .push_back(ReorderTableEntry {
                txn_id: txn.txn_id,
                rob_idx,
                dst: txn.dst,
                tag: txn.tag,
                expected_beats: expected,
                received: 0,
                forwarded: 0,
            });
        InjectDecision::Inject { rob_idx }
    }

    /// Slots stay reserved until their entry retires, so a base index is
    /// never shared by two live entries.
    fn free_range(&mut self, base: usize, len: usize) {
        for a in &mut self.allocated[base..base + len] {
            debug_assert!(*a);
            *a = false;
        }
        self.allocated_count -= len;
    }

    pub fn handle_response(&mut self, beat: RespBeat) -> Result<ResponseOutcome, NiError> {
        let unknown = NiError::UnknownResponse {
            txn_id: beat.txn_id,
            rob_idx: beat.rob_idx,
        };
        let fifo = self.table.get_mut(&beat.txn_id).ok_or(unknown.clone())?;
        let pos = match beat.rob_idx {
            Some(idx) => fifo
                .iter()
                .position(|e| e.rob_idx == Some(idx))
                .ok_or(unknown.clone())?,
            None => {
                // unallocated responses are in order by construction
                match fifo.front() {
                    Some(e) if e.in_order() => 0,
                    _ => return Err(unknown),
                }
            }
        };
        let mut outcome = ResponseOutcome::default();
        if pos == 0 {
            let entry = &mut fifo[0];
            if entry.received >= entry.expected_beats {
                return Err(unknown);
            }
            entry.received += 1;
            entry.forwarded += 1;
            outcome.forwarded = Some(beat);
            self.retire_and_release(beat.txn_id, &mut outcome.released);
        } else {
            let entry = &mut fifo[pos];
            let base = entry.rob_idx.ok_or(unknown.clone())? as usize;
            if entry.received >= entry.expected_beats {
                return Err(unknown);
            }
            let slot = base + entry.received as usize;
            entry.received += 1;
            if self.slots[slot].is_some() {
                return Err(NiError::RobSlotOccupied { slot: slot as u16 });
            }
            self.slots[slot] = Some(beat);
        }
        Ok(outcome)
    }

    /// Retire completed head entries and drain buffered beats that are now
    /// in order.
    fn retire_and_release(&mut self, id: TxnId, released: &mut Vec<RespBeat>) {
        loop {
            let Some(fifo) = self.table.get_mut(&id) else {
                return;
            };
            let Some(head) = fifo.front_mut() else {
                self.table.remove(&id);
                return;
            };
            if head.forwarded == head.expected_beats {
                let done = fifo.pop_front().expect("head exists");
                if let Some(base) = done.rob_idx {
                    self.free_range(base as usize, done.expected_beats as usize);
                }
                continue;
            }
            let Some(base) = head.rob_idx else { return };
            while head.forwarded < head.received {
                let slot = base as usize + head.forwarded as usize;
                let Some(b) = self.slots[slot].take() else {
                    break;
                };
                released.push(b);
                head.forwarded += 1;
            }
            if head.forwarded < head.expected_beats {
                return;
            }
        }
    }

    pub fn outstanding(&self, id: TxnId) -> u32 {
        self.table.get(&id).map_or(0, |f| f.len() as u32)
    }

    pub fn total_outstanding(&self) -> u32 {
        self.table.values().map(|f| f.len() as u32).sum()
    }
}

#[derive(Debug, Clone)]
pub enum OrderingUnit {
    Rob(RobUnit),
    RobLess(RobLessUnit),
}

impl OrderingUnit {
    pub fn new(ordering: Ordering, rob_capacity_bytes: u32, beat_bytes: u32) -> Self {
        match ordering {
            Ordering::Rob => OrderingUnit::Rob(RobUnit::new(rob_capacity_bytes, beat_bytes)),
            Ordering::RobLess => OrderingUnit::RobLess(RobLessUnit::new()),
        }
    }

    pub fn try_inject(&mut self, txn: &AxiTransaction) -> InjectDecision {
        match self {
            OrderingUnit::Rob(u) => u.try_inject(txn),
            OrderingUnit::RobLess(u) => u.try_inject(txn),
        }
    }

    pub fn handle_response(&mut self, beat: RespBeat) -> Result<ResponseOutcome, NiError> {
        match self {
            OrderingUnit::Rob(u) => u.handle_response(beat),
            OrderingUnit::RobLess(u) => u.handle_response(beat),
        }
    }

    pub fn outstanding(&self, id: TxnId) -> u32 {
        match self {
            OrderingUnit::Rob(u) => u.outstanding(id),
            OrderingUnit::RobLess(u) => u.outstanding(id),
        }
    }

    pub fn total_outstanding(&self) -> u32 {
        match self {
            OrderingUnit::Rob(u) => u.total_outstanding(),
            OrderingUnit::RobLess(u) => u.total_outstanding(),
        }
    }

    pub fn rob_occupancy_bytes(&self) -> u32 {
        match self {
            OrderingUnit::Rob(u) => u.occupancy_bytes(),
            OrderingUnit::RobLess(_) => 0,
        }
    }

    pub fn rob_peak_bytes(&self) -> u32 {
        match self {
            OrderingUnit::Rob(u) => u.peak_bytes(),
            OrderingUnit::RobLess(_) => 0,
        }
    }
}
