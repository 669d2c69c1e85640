//! Target-side bookkeeping that lets responses find their way back.
//!
//! Non-atomic requests are issued downstream under a single ID, so their
//! responses return in issue order and a FIFO per direction suffices.
//! Atomics keep their own downstream ID and live in an associative buffer.

use std::collections::VecDeque;

use super::NiError;
use crate::protocol::{AxiOp, AxiTransaction};

/// Downstream ID shared by every non-atomic request.
pub const COLLAPSED_ID: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaEntry {
    /// Request as reconstructed from the network; `src` is the return route.
    pub txn: AxiTransaction,
    pub rob_idx: Option<u16>,
    pub handle: u64,
}

#[derive(Debug, Clone)]
pub struct MetaBuffer {
    depth: usize,
    reads: VecDeque<MetaEntry>,
    writes: VecDeque<MetaEntry>,
    atops: Vec<Option<MetaEntry>>,
    peak: usize,
}

impl MetaBuffer {
    pub fn new(depth: usize, atop_depth: usize) -> Self {
        MetaBuffer {
            depth,
            reads: VecDeque::new(),
            writes: VecDeque::new(),
            atops: vec![None; atop_depth],
            peak: 0,
        }
    }

    pub fn has_room(&self, op: AxiOp) -> bool {
        match op {
            AxiOp::Read => self.reads.len() < self.depth,
            AxiOp::Write => self.writes.len() < self.depth,
            AxiOp::Atomic => self.atops.iter().any(Option::is_none),
        }
    }

    /// Store `entry` and return the downstream ID to issue it under.
    pub fn push(&mut self, entry: MetaEntry) -> Result<u32, NiError> {
        if !self.has_room(entry.txn.op) {
            return Err(NiError::MetaBufferOverflow {
                node: entry.txn.dst,
                op: entry.txn.op,
            });
        }
        let id = match entry.txn.op {
            AxiOp::Read => {
                self.reads.push_back(entry);
                COLLAPSED_ID
            }
            AxiOp::Write => {
                self.writes.push_back(entry);
                COLLAPSED_ID
            }
            AxiOp::Atomic => {
                let slot = self
                    .atops
                    .iter()
                    .position(Option::is_none)
                    .expect("room checked");
                self.atops[slot] = Some(entry);
                slot as u32 + 1
            }
        };
        self.peak = self.peak.max(self.len());
        Ok(id)
    }

    pub fn front_read(&self) -> Option<&MetaEntry> {
        self.reads.front()
    }

    pub fn pop_read(&mut self) -> Option<MetaEntry> {
        self.reads.pop_front()
    }

    pub fn pop_write(&mut self) -> Option<MetaEntry> {
        self.writes.pop_front()
    }

    pub fn take_atop(&mut self, downstream_id: u32) -> Option<MetaEntry> {
        let slot = (downstream_id as usize).checked_sub(1)?;
        self.atops.get_mut(slot)?.take()
    }

    pub fn len(&self) -> usize {
        self.reads.len() + self.writes.len() + self.atops.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn peak(&self) -> usize {
        self.peak
    }
}
