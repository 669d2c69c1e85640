//! Traffic sources and memory sinks attached to the network interfaces.

pub mod core;
pub mod dma;
pub mod memory;
pub mod pattern;
pub mod trace;

use self::core::CoreGen;
use crate::ni::{Completion, Ni};
use crate::protocol::{NodeId, TxnTag};
use dma::DmaEngine;
use trace::TraceGen;

/// Per-tile tag source: `(tile_index << 32) | serial`.
#[derive(Debug, Clone)]
pub struct TagGen {
    base: u64,
    serial: u64,
}

impl TagGen {
    pub fn new(tile_index: usize) -> Self {
        TagGen {
            base: (tile_index as u64) << 32,
            serial: 0,
        }
    }

    pub fn next_tag(&mut self) -> TxnTag {
        let t = TxnTag(self.base | self.serial);
        self.serial += 1;
        t
    }
}

/// All generators of one tile, driving the tile's NI.
#[derive(Debug, Clone)]
pub struct TileGen {
    pub node: NodeId,
    pub tags: TagGen,
    pub dma: DmaEngine,
    pub cores: Vec<CoreGen>,
    pub traces: Vec<TraceGen>,
    /// Stop narrow probes once the DMA has finished.
    pub probes_follow_dma: bool,
}

impl TileGen {
    pub fn new(node: NodeId, tile_index: usize, dma: DmaEngine) -> Self {
        TileGen {
            node,
            tags: TagGen::new(tile_index),
            dma,
            cores: Vec::new(),
            traces: Vec::new(),
            probes_follow_dma: false,
        }
    }

    pub fn step(&mut self, cycle: u64, ni: &mut Ni) {
        if self.probes_follow_dma && self.dma.is_done() {
            for c in &mut self.cores {
                c.stop_probe();
            }
        }
        self.dma.step(cycle, ni, &mut self.tags);
        for c in &mut self.cores {
            c.step(cycle, ni, &mut self.tags);
        }
        for t in &mut self.traces {
            t.step(cycle, ni);
        }
    }

    pub fn on_completion(&mut self, c: &Completion) {
        if self.dma.on_completion(c) {
            return;
        }
        for core in &mut self.cores {
            if core.on_completion(c) {
                return;
            }
        }
        for t in &mut self.traces {
            if t.on_completion(c) {
                return;
            }
        }
    }

    pub fn is_done(&self, cycle: u64) -> bool {
        self.dma.is_done()
            && self.cores.iter().all(|c| c.is_done(cycle))
            && self.traces.iter().all(|t| t.is_done())
    }
}
