use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cells::Cell;

pub(crate) type NodeId = usize;
pub(crate) type PortId = usize;

#[derive(Debug, Clone, Copy)]
pub(crate) enum EventKind {
    /// A cell finished propagating over `via` and reached `node`.
    Arrival {
        node: NodeId,
        from: NodeId,
        via: PortId,
        cell: Cell,
    },
    TransmitComplete {
        port: PortId,
    },
    IntervalTimer {
        port: PortId,
        epoch: u64,
    },
    SourceEmit {
        vc: usize,
        generation: u64,
    },
    /// A client request reached a bursty source.
    BurstRequest {
        vc: usize,
    },
    RoundTimeout {
        branch: usize,
        epoch: u64,
    },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pending events ordered by (time, scheduling sequence).
#[derive(Debug, Default)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter()
    }
}
