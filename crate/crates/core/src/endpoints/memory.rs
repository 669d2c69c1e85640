//! Latency plus rate-capped memory endpoint, used for the tile scratchpad
//! and for the HBM channels on the mesh boundary.
//!
//! Requests are served in arrival order by a single data port. The port
//! moves at most one beat per cycle and is paced by a token bucket of
//! capacity one that refills at `accept_rate` beats per cycle; the bucket
//! drains whenever the port has nothing to do, so the `k`-th beat of a busy
//! period leaves `ceil(k / accept_rate) - 1` cycles after the period starts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::protocol::{read_data, AxiOp, TxnTag};

const RATE_ONE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Spm,
    Hbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryEndpointConfig {
    pub kind: MemoryKind,
    pub access_latency: u64,
    pub accept_rate: f64,
}

impl MemoryEndpointConfig {
    pub fn spm() -> Self {
        MemoryEndpointConfig {
            kind: MemoryKind::Spm,
            access_latency: 10,
            accept_rate: 1.0,
        }
    }

    /// 57.6 GB/s channel against 64 B/cycle at 1.26 GHz.
    pub fn hbm() -> Self {
        MemoryEndpointConfig {
            kind: MemoryKind::Hbm,
            access_latency: 40,
            accept_rate: 0.715,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.accept_rate > 0.0 && self.accept_rate <= 1.0) {
            return Err(format!(
                "accept_rate must be in (0, 1], got {}",
                self.accept_rate
            ));
        }
        Ok(())
    }

    fn rate_units(&self) -> u64 {
        ((self.accept_rate * RATE_ONE as f64).round() as u64).clamp(1, RATE_ONE)
    }
}

/// Cycle offsets (from the start of a busy period) at which `beats`
/// back-to-back beats leave a port paced at `accept_rate`.
pub fn schedule_beats(beats: u32, accept_rate: f64) -> Vec<u64> {
    let cfg = MemoryEndpointConfig {
        kind: MemoryKind::Spm,
        access_latency: 0,
        accept_rate,
    };
    let rate = cfg.rate_units();
    let mut credit = 0u64;
    let mut out = Vec::with_capacity(beats as usize);
    let mut cycle = 0u64;
    while out.len() < beats as usize {
        credit += rate;
        if credit >= RATE_ONE {
            credit -= RATE_ONE;
            out.push(cycle);
        }
        cycle += 1;
    }
    out
}

/// Request as seen below the NI: the ID is the collapsed downstream ID
/// (0 for every non-atomic request, a private slot ID for atomics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRequest {
    pub handle: u64,
    pub downstream_id: u32,
    pub op: AxiOp,
    pub burst_len: u16,
    pub addr: TxnTag,
    pub arrival: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemEvent {
    ReadBeat {
        downstream_id: u32,
        beat: u16,
        last: bool,
        data: u64,
    },
    WriteDone {
        downstream_id: u32,
    },
    AtomicDone {
        downstream_id: u32,
        data: u64,
    },
}

/// Space the NI has for responses this cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseRoom {
    pub r: bool,
    pub b: bool,
}

#[derive(Debug, Clone)]
struct Pending {
    req: MemRequest,
    beats_done: u16,
    w_available: u16,
}

#[derive(Debug, Clone)]
pub struct MemoryEndpoint {
    cfg: MemoryEndpointConfig,
    rate: u64,
    credit: u64,
    queue: VecDeque<Pending>,
    atomics: VecDeque<Pending>,
    b_pending: VecDeque<(u64, u32)>,
    pub beats_moved: u64,
    pub first_beat_cycle: Option<u64>,
    pub last_beat_cycle: Option<u64>,
}

impl MemoryEndpoint {
    pub fn new(cfg: MemoryEndpointConfig) -> Self {
        MemoryEndpoint {
            rate: cfg.rate_units(),
            cfg,
            credit: 0,
            queue: VecDeque::new(),
            atomics: VecDeque::new(),
            b_pending: VecDeque::new(),
            beats_moved: 0,
            first_beat_cycle: None,
            last_beat_cycle: None,
        }
    }

    pub fn config(&self) -> &MemoryEndpointConfig {
        &self.cfg
    }

    pub fn push(&mut self, req: MemRequest) {
        let p = Pending {
            req,
            beats_done: 0,
            w_available: 0,
        };
        if req.op == AxiOp::Atomic {
            self.atomics.push_back(p);
        } else {
            self.queue.push_back(p);
        }
    }

    /// A W beat for the write identified by `handle` reached the memory.
    /// Returns false if no such write is pending.
    pub fn add_w_beat(&mut self, handle: u64) -> bool {
        let found = self
            .atomics
            .iter_mut()
            .chain(self.queue.iter_mut())
            .find(|p| p.req.handle == handle && p.req.op != AxiOp::Read);
        match found {
            Some(p) if p.w_available < p.req.burst_len => {
                p.w_available += 1;
                true
            }
            _ => false,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.atomics.is_empty() && self.b_pending.is_empty()
    }

    pub fn pending(&self) -> usize {
        self.queue.len() + self.atomics.len() + self.b_pending.len()
    }

    fn latency_met(&self, p: &Pending, cycle: u64) -> bool {
        cycle >= p.req.arrival + self.cfg.access_latency
    }

    /// Advance one cycle. Emits at most one data-port event plus at most
    /// one write response.
    pub fn step(&mut self, cycle: u64, room: ResponseRoom) -> Vec<MemEvent> {
        let mut events = Vec::new();

        // write responses leave independently of the data port
        let mut b_room = room.b;
        if b_room {
            if let Some(&(ready, id)) = self.b_pending.front() {
                if cycle >= ready {
                    self.b_pending.pop_front();
                    events.push(MemEvent::WriteDone { downstream_id: id });
                    b_room = false;
                }
            }
        }

        let atomic_ready = self
            .atomics
            .front()
            .is_some_and(|p| p.w_available >= 1 && self.latency_met(p, cycle) && room.r && b_room);
        let head_ready = self.queue.front().is_some_and(|p| match p.req.op {
            AxiOp::Read => room.r && self.latency_met(p, cycle),
            _ => p.beats_done < p.w_available,
        });

        if !(atomic_ready || head_ready) {
            self.credit = 0;
            return events;
        }
        self.credit += self.rate;
        if self.credit < RATE_ONE {
            return events;
        }
        self.credit -= RATE_ONE;
        self.beats_moved += 1;
        self.first_beat_cycle.get_or_insert(cycle);
        self.last_beat_cycle = Some(cycle);

        if atomic_ready {
            let p = self.atomics.pop_front().expect("atomic ready");
            events.push(MemEvent::AtomicDone {
                downstream_id: p.req.downstream_id,
                data: read_data(p.req.addr, 0),
            });
            return events;
        }

        let latency = self.cfg.access_latency;
        let head = self.queue.front_mut().expect("head ready");
        let beat = head.beats_done;
        head.beats_done += 1;
        let done = head.beats_done == head.req.burst_len;
        match head.req.op {
            AxiOp::Read => events.push(MemEvent::ReadBeat {
                downstream_id: head.req.downstream_id,
                beat,
                last: done,
                data: read_data(head.req.addr, beat),
            }),
            _ => {
                if done {
                    let ready = (cycle + 1).max(head.req.arrival + latency);
                    self.b_pending.push_back((ready, head.req.downstream_id));
                }
            }
        }
        if done {
            self.queue.pop_front();
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(handle: u64, beats: u16, arrival: u64) -> MemRequest {
        MemRequest {
            handle,
            downstream_id: 0,
            op: AxiOp::Read,
            burst_len: beats,
            addr: TxnTag(handle),
            arrival,
        }
    }

    const ROOM: ResponseRoom = ResponseRoom { r: true, b: true };

    fn run_reads(cfg: MemoryEndpointConfig, reqs: &[MemRequest], cycles: u64) -> Vec<u64> {
        let mut m = MemoryEndpoint::new(cfg);
        for r in reqs {
            m.push(*r);
        }
        let mut out = Vec::new();
        for c in 0..cycles {
            for e in m.step(c, ROOM) {
                if let MemEvent::ReadBeat { .. } = e {
                    out.push(c);
                }
            }
        }
        out
    }

    #[test]
    fn spm_full_rate_after_latency() {
        let cfg = MemoryEndpointConfig::spm();
        let beats = run_reads(cfg, &[read(1, 8, 0)], 40);
        assert_eq!(beats, (10..18).collect::<Vec<_>>());
    }

    #[test]
    fn hbm_rate_eight_beats_in_twelve_cycles() {
        let sched = schedule_beats(8, 0.715);
        assert_eq!(sched.len(), 8);
        // first beat in cycle 0 of the period's accounting window, last in 11
        assert_eq!(*sched.last().unwrap() + 1, (8.0f64 / 0.715).ceil() as u64);

        let cfg = MemoryEndpointConfig {
            access_latency: 0,
            ..MemoryEndpointConfig::hbm()
        };
        let beats = run_reads(cfg, &[read(1, 8, 0)], 40);
        assert_eq!(beats, sched);
    }

    #[test]
    fn back_to_back_requests_overlap_latency() {
        let cfg = MemoryEndpointConfig::spm();
        let beats = run_reads(cfg, &[read(1, 4, 0), read(2, 4, 1)], 40);
        assert_eq!(beats, (10..18).collect::<Vec<_>>());
    }

    #[test]
    fn write_waits_for_data_then_responds() {
        let mut m = MemoryEndpoint::new(MemoryEndpointConfig::spm());
        m.push(MemRequest {
            handle: 5,
            downstream_id: 0,
            op: AxiOp::Write,
            burst_len: 2,
            addr: TxnTag(5),
            arrival: 0,
        });
        let mut done = None;
        for c in 0..30 {
            if c == 3 || c == 4 {
                assert!(m.add_w_beat(5));
            }
            for e in m.step(c, ROOM) {
                if let MemEvent::WriteDone { .. } = e {
                    done = Some(c);
                }
            }
        }
        assert_eq!(done, Some(10));
        assert!(!m.add_w_beat(5));
    }

    #[test]
    fn atomics_bypass_queue() {
        let mut m = MemoryEndpoint::new(MemoryEndpointConfig::spm());
        m.push(read(1, 16, 0));
        m.push(MemRequest {
            handle: 2,
            downstream_id: 3,
            op: AxiOp::Atomic,
            burst_len: 1,
            addr: TxnTag(2),
            arrival: 1,
        });
        m.add_w_beat(2);
        let mut order = Vec::new();
        for c in 0..40 {
            for e in m.step(c, ROOM) {
                order.push(match e {
                    MemEvent::ReadBeat { .. } => 'r',
                    MemEvent::AtomicDone { .. } => 'a',
                    MemEvent::WriteDone { .. } => 'b',
                });
            }
        }
        assert_eq!(order.len(), 17);
        assert_eq!(order[0], 'r');
        assert!(order.iter().position(|&c| c == 'a').unwrap() < 16);
    }

    #[test]
    fn backpressure_holds_beats() {
        let mut m = MemoryEndpoint::new(MemoryEndpointConfig::spm());
        m.push(read(1, 2, 0));
        for c in 0..20 {
            assert!(m.step(c, ResponseRoom { r: false, b: true }).is_empty());
        }
        assert_eq!(m.step(20, ROOM).len(), 1);
    }
}
