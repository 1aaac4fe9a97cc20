use crate::error::{Error, Result};
use crate::graph::TemporalEdge;

/// Fixed-capacity FIFO ring that stages stream arrivals until the next batch
/// boundary.
///
/// A full queue rejects new edges instead of overwriting old ones, so callers
/// see backpressure and nothing is lost.
#[derive(Debug, Clone)]
pub struct EdgeQueue {
    slots: Vec<Option<TemporalEdge>>,
    head: usize,
    len: usize,
    d_e: usize,
}

impl EdgeQueue {
    pub fn new(capacity: usize, d_e: usize) -> Self {
        assert!(capacity > 0, "edge queue capacity must be positive");
        Self {
            slots: vec![None; capacity],
            head: 0,
            len: 0,
            d_e,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.slots.len()
    }

    /// Stages `edge` in the next slot. Returns `Ok(false)` when the ring is
    /// full; the queue is left untouched in that case.
    pub fn enqueue(&mut self, edge: TemporalEdge) -> Result<bool> {
        if edge.feat.len() != self.d_e {
            return Err(Error::FeatureLength {
                expected: self.d_e,
                got: edge.feat.len(),
            });
        }
        if self.is_full() {
            return Ok(false);
        }
        let tail = (self.head + self.len) % self.slots.len();
        self.slots[tail] = Some(edge);
        self.len += 1;
        Ok(true)
    }

    /// Removes and returns up to `max_count` of the oldest edges in arrival
    /// order.
    pub fn flush_batch(&mut self, max_count: usize) -> Vec<TemporalEdge> {
        let take = max_count.min(self.len);
        let mut out = Vec::with_capacity(take);
        for _ in 0..take {
            out.push(self.pop_front());
        }
        out
    }

    /// Like [`flush_batch`](Self::flush_batch), but stops before the first
    /// edge whose timestamp lies more than `window` after the oldest staged
    /// edge. Opt-in; batches are count-based otherwise.
    pub fn flush_batch_within(&mut self, max_count: usize, window: f64) -> Vec<TemporalEdge> {
        let Some(first_t) = self.peek().map(|e| e.t) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        while out.len() < max_count {
            match self.peek() {
                Some(e) if e.t - first_t <= window => out.push(self.pop_front()),
                _ => break,
            }
        }
        out
    }

    pub fn peek(&self) -> Option<&TemporalEdge> {
        if self.len == 0 {
            None
        } else {
            self.slots[self.head].as_ref()
        }
    }

    fn pop_front(&mut self) -> TemporalEdge {
        let edge = self.slots[self.head].take().expect("occupied ring slot");
        self.head = (self.head + 1) % self.slots.len();
        self.len -= 1;
        edge
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(t: f64) -> TemporalEdge {
        TemporalEdge::new(0, 1, t, vec![])
    }

    #[test]
    fn enqueue_into_empty_queue() {
        let mut q = EdgeQueue::new(4, 0);
        assert!(q.enqueue(edge(1.0)).unwrap());
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn full_queue_rejects_without_dropping() {
        let mut q = EdgeQueue::new(4, 0);
        for i in 0..4 {
            assert!(q.enqueue(edge(i as f64)).unwrap());
        }
        assert!(!q.enqueue(edge(9.0)).unwrap());
        assert_eq!(q.len(), 4);
        let ts: Vec<f64> = q.flush_batch(10).iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn feature_mismatch_is_an_error_not_backpressure() {
        let mut q = EdgeQueue::new(2, 3);
        let err = q.enqueue(TemporalEdge::new(0, 1, 0.0, vec![1.0])).unwrap_err();
        assert_eq!(err, Error::FeatureLength { expected: 3, got: 1 });
        assert!(q.is_empty());
    }

    #[test]
    fn flush_behaviour() {
        let mut q = EdgeQueue::new(16, 0);
        assert!(q.flush_batch(5).is_empty());
        for i in 0..10 {
            q.enqueue(edge(i as f64)).unwrap();
        }
        let first: Vec<f64> = q.flush_batch(4).iter().map(|e| e.t).collect();
        assert_eq!(first, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(q.len(), 6);
        assert_eq!(q.flush_batch(600).len(), 6);
    }

    #[test]
    fn windowed_flush_stops_at_time_gap() {
        let mut q = EdgeQueue::new(8, 0);
        for t in [1.0, 2.0, 2.5, 9.0] {
            q.enqueue(edge(t)).unwrap();
        }
        assert_eq!(q.flush_batch_within(10, 2.0).len(), 3);
        assert_eq!(q.flush_batch_within(10, 2.0).len(), 1);
    }

    proptest! {
        // any enqueue/flush interleaving reproduces arrival order
        #[test]
        fn fifo_matches_list_oracle(ops in proptest::collection::vec((any::<bool>(), 1usize..6), 1..80)) {
            let mut q = EdgeQueue::new(5, 0);
            let mut oracle: std::collections::VecDeque<f64> = Default::default();
            let mut next = 0.0;
            let mut flushed = Vec::new();
            let mut expected = Vec::new();
            for (is_push, k) in ops {
                if is_push {
                    let accepted = q.enqueue(edge(next)).unwrap();
                    prop_assert_eq!(accepted, oracle.len() < 5);
                    if accepted { oracle.push_back(next); }
                    next += 1.0;
                } else {
                    flushed.extend(q.flush_batch(k).into_iter().map(|e| e.t));
                    for _ in 0..k.min(oracle.len()) { expected.push(oracle.pop_front().unwrap()); }
                }
                prop_assert!(q.len() <= q.capacity());
            }
            prop_assert_eq!(flushed, expected);
        }
    }
}
