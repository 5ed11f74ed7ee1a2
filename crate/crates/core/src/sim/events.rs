use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Worker fetches parameters and starts a gradient.
    WorkerReady(usize),
    /// Worker's gradient reaches the server.
    GradientArrival(usize),
    Evaluation,
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
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
    // reversed: BinaryHeap is a max-heap and we pop the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

/// Future event set popping in `(time, sequence)` order. Sequence numbers
/// are assigned at insertion, so equal-time events run first-in first-out.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event {
            time,
            sequence,
            kind,
        });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_insertion() {
        let mut q = EventQueue::new();
        q.push(1.0, EventKind::WorkerReady(3));
        q.push(0.5, EventKind::Evaluation);
        q.push(1.0, EventKind::WorkerReady(1));
        assert_eq!(q.pop().unwrap().kind, EventKind::Evaluation);
        assert_eq!(q.pop().unwrap().kind, EventKind::WorkerReady(3));
        assert_eq!(q.pop().unwrap().kind, EventKind::WorkerReady(1));
        assert!(q.pop().is_none());
    }

    proptest! {
        #[test]
        fn pops_in_lexicographic_order(times in proptest::collection::vec(0u8..20, 1..200)) {
            let mut q = EventQueue::new();
            for &t in &times {
                q.push(t as f64 * 0.25, EventKind::Evaluation);
            }
            let mut last = (f64::NEG_INFINITY, 0u64);
            let mut n = 0;
            while let Some(e) = q.pop() {
                prop_assert!(e.time > last.0 || (e.time == last.0 && e.sequence > last.1));
                last = (e.time, e.sequence);
                n += 1;
            }
            prop_assert_eq!(n, times.len());
        }
    }
}
