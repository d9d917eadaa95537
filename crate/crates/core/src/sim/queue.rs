use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::SimError;

/// A scheduled action with its due time and insertion sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<T> {
    pub time: f64,
    pub seq: u64,
    pub payload: T,
}

struct Entry<T>(SimEvent<T>);

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Entry<T> {}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .time
            .total_cmp(&other.0.time)
            .then(self.0.seq.cmp(&other.0.seq))
    }
}

/// Time-ordered event queue. Events due at the same time resolve in the
/// order they were scheduled.
pub struct EventQueue<T> {
    heap: BinaryHeap<Reverse<Entry<T>>>,
    now: f64,
    next_seq: u64,
    resolved: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: 0.0,
            next_seq: 0,
            resolved: 0,
        }
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

    /// Number of events popped so far.
    pub fn resolved(&self) -> u64 {
        self.resolved
    }

    pub fn schedule(&mut self, time: f64, payload: T) -> Result<u64, SimError> {
        if !(time >= self.now) {
            return Err(SimError::TimeRegression { now: self.now, time });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry(SimEvent { time, seq, payload })));
        Ok(seq)
    }

    /// Pops the earliest event and advances the clock to its due time.
    pub fn resolve_next(&mut self) -> Result<SimEvent<T>, SimError> {
        let Reverse(Entry(ev)) = self.heap.pop().ok_or(SimError::EmptyQueue)?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        self.resolved += 1;
        Ok(ev)
    }
}
