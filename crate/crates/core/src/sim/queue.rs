use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TaskArrival { task: usize },
    WarmStartComplete { qpu: usize, epoch: usize, generation: u64 },
    TransferComplete { task: usize, subtask: usize, input: usize },
    SubtaskStart { task: usize, subtask: usize },
    SubtaskComplete { task: usize, subtask: usize },
    CooldownExpired { qpu: usize, generation: u64 },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TaskArrival { .. } => "TaskArrival",
            EventKind::WarmStartComplete { .. } => "WarmStartComplete",
            EventKind::TransferComplete { .. } => "TransferComplete",
            EventKind::SubtaskStart { .. } => "SubtaskStart",
            EventKind::SubtaskComplete { .. } => "SubtaskComplete",
            EventKind::CooldownExpired { .. } => "CooldownExpired",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time_s: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // Reversed so the max-heap pops the least (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.time_s.total_cmp(&self.time_s).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future event set ordered by `(time, insertion sequence)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    now: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time_s: f64, kind: EventKind) -> Result<u64, SimError> {
        if !(time_s >= self.now) {
            return Err(SimError::TimeTravel { now: self.now, requested: time_s });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time_s, seq, kind });
        Ok(seq)
    }

    /// Removes the least event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        self.now = ev.time_s;
        Some(ev)
    }
}
