//! Time-ordered event queue.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Microseconds since the start of the run.
pub type Time = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimEventKind {
    MsgArrival,
    HashArrival,
    FetchTimeout,
    BlockMined,
    BlockArrival,
    OracleEmit,
    Background,
    Response,
    SimEnd,
}

impl SimEventKind {
    /// Tie-break at equal times. Blocks settle before new work is injected,
    /// so a block mined at the same instant as an emission excludes it.
    pub fn rank(self) -> u8 {
        match self {
            SimEventKind::BlockArrival => 0,
            SimEventKind::BlockMined => 1,
            SimEventKind::MsgArrival => 2,
            SimEventKind::HashArrival => 3,
            SimEventKind::FetchTimeout => 4,
            SimEventKind::Response => 5,
            SimEventKind::OracleEmit => 6,
            SimEventKind::Background => 7,
            SimEventKind::SimEnd => 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimEvent<P> {
    pub time: Time,
    pub kind: SimEventKind,
    pub seq: u64,
    pub payload: P,
}

impl<P> SimEvent<P> {
    fn key(&self) -> (Time, u8, u64) {
        (self.time, self.kind.rank(), self.seq)
    }
}

impl<P> PartialEq for SimEvent<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for SimEvent<P> {}

impl<P> PartialOrd for SimEvent<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for SimEvent<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

pub struct EventQueue<P> {
    heap: BinaryHeap<Reverse<SimEvent<P>>>,
    seq: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), seq: 0 }
    }
}

impl<P> EventQueue<P> {
    pub fn push(&mut self, time: Time, kind: SimEventKind, payload: P) {
        self.seq += 1;
        self.heap.push(Reverse(SimEvent { time, kind, seq: self.seq, payload }));
    }

    pub fn pop(&mut self) -> Option<SimEvent<P>> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
