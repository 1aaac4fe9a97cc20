use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, NodeId, TemporalEdge};

/// One entry of a node's temporal neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub node: NodeId,
    pub t: f64,
    pub edge: EdgeId,
}

/// Append-only temporal adjacency list.
///
/// Every edge is logged once and referenced from both endpoints' lists
/// (self-loops are referenced once). Because accepted timestamps never
/// decrease, appending keeps each per-node list sorted ascending; queries walk
/// it backwards, so results are most-recent-first with later insertions ahead
/// of earlier ones on equal timestamps.
#[derive(Debug, Clone)]
pub struct TemporalAdjacency {
    d_e: usize,
    edges: Vec<TemporalEdge>,
    lists: Vec<Vec<NeighborEntry>>,
    last_t: Option<f64>,
}

impl TemporalAdjacency {
    pub fn new(d_e: usize) -> Self {
        Self {
            d_e,
            edges: Vec::new(),
            lists: Vec::new(),
            last_t: None,
        }
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    /// Node count: largest id seen plus one.
    pub fn num_nodes(&self) -> usize {
        self.lists.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.last_t
    }

    pub fn edge(&self, id: EdgeId) -> &TemporalEdge {
        &self.edges[id]
    }

    pub fn features(&self, id: EdgeId) -> &[f64] {
        &self.edges[id].feat
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.lists.get(v).map_or(0, Vec::len)
    }

    /// Grows the node range without adding edges.
    pub fn ensure_nodes(&mut self, n: usize) {
        if self.lists.len() < n {
            self.lists.resize_with(n, Vec::new);
        }
    }

    /// Checks that `edge` could be inserted next without mutating the store.
    pub fn check_insertable(&self, edge: &TemporalEdge) -> Result<()> {
        self.check_batch(std::slice::from_ref(edge))
    }

    /// Checks a whole batch, in order, as if each edge were inserted.
    pub fn check_batch(&self, edges: &[TemporalEdge]) -> Result<()> {
        let mut last = self.last_t;
        for edge in edges {
            if edge.feat.len() != self.d_e {
                return Err(Error::FeatureLength {
                    expected: self.d_e,
                    got: edge.feat.len(),
                });
            }
            if let Some(l) = last {
                if edge.t < l {
                    return Err(Error::NonMonotonic { last: l, got: edge.t });
                }
            }
            if !edge.t.is_finite() || edge.t < 0.0 {
                return Err(Error::Contract(format!(
                    "timestamp must be finite and non-negative, got {}",
                    edge.t
                )));
            }
            last = Some(edge.t);
        }
        Ok(())
    }

    pub fn insert_edge(&mut self, edge: TemporalEdge) -> Result<EdgeId> {
        self.check_insertable(&edge)?;
        let id = self.edges.len();
        self.ensure_nodes(edge.node_bound());
        self.lists[edge.src].push(NeighborEntry {
            node: edge.dst,
            t: edge.t,
            edge: id,
        });
        if !edge.is_self_loop() {
            self.lists[edge.dst].push(NeighborEntry {
                node: edge.src,
                t: edge.t,
                edge: id,
            });
        }
        self.last_t = Some(edge.t);
        self.edges.push(edge);
        Ok(id)
    }

    /// Full neighbor list, most recent first.
    pub fn neighbors(&self, v: NodeId) -> Vec<NeighborEntry> {
        self.lists
            .get(v)
            .map(|l| l.iter().rev().copied().collect())
            .unwrap_or_default()
    }

    /// Entries with `t_start <= t <= t_end`, most recent first.
    pub fn get_temporal_neighbors(&self, v: NodeId, t_start: f64, t_end: f64) -> Vec<NeighborEntry> {
        let Some(list) = self.lists.get(v) else {
            return Vec::new();
        };
        let lo = list.partition_point(|e| e.t < t_start);
        let hi = list.partition_point(|e| e.t <= t_end);
        if lo >= hi {
            return Vec::new();
        }
        list[lo..hi].iter().rev().copied().collect()
    }

    /// The `l` most recent entries strictly before `before`.
    pub fn get_recent_neighbors(&self, v: NodeId, l: usize, before: f64) -> Vec<NeighborEntry> {
        let Some(list) = self.lists.get(v) else {
            return Vec::new();
        };
        let hi = list.partition_point(|e| e.t < before);
        list[..hi].iter().rev().take(l).copied().collect()
    }

    /// The `l` most recent committed entries no older than `t_ref - window`.
    ///
    /// This is the sampled neighborhood the embedding layers attend over.
    pub fn sample_recent(&self, v: NodeId, l: usize, t_ref: f64, window: Option<f64>) -> Vec<NeighborEntry> {
        let Some(list) = self.lists.get(v) else {
            return Vec::new();
        };
        let lo = match window {
            Some(w) => list.partition_point(|e| e.t < t_ref - w),
            None => 0,
        };
        list[lo..].iter().rev().take(l).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(src: NodeId, dst: NodeId, t: f64) -> TemporalEdge {
        TemporalEdge::new(src, dst, t, vec![])
    }

    fn pairs(entries: &[NeighborEntry]) -> Vec<(NodeId, f64)> {
        entries.iter().map(|x| (x.node, x.t)).collect()
    }

    #[test]
    fn insert_is_bidirectional() {
        let mut s = TemporalAdjacency::new(0);
        s.insert_edge(e(0, 1, 5.0)).unwrap();
        assert_eq!(pairs(&s.neighbors(0)), vec![(1, 5.0)]);
        assert_eq!(pairs(&s.neighbors(1)), vec![(0, 5.0)]);
        assert_eq!(s.num_edges(), 1);
        assert_eq!(s.num_nodes(), 2);
    }

    #[test]
    fn lists_are_most_recent_first() {
        let mut s = TemporalAdjacency::new(0);
        s.insert_edge(e(0, 1, 5.0)).unwrap();
        s.insert_edge(e(0, 2, 7.0)).unwrap();
        assert_eq!(pairs(&s.neighbors(0)), vec![(2, 7.0), (1, 5.0)]);
    }

    #[test]
    fn out_of_order_insert_is_rejected() {
        let mut s = TemporalAdjacency::new(0);
        s.insert_edge(e(0, 1, 5.0)).unwrap();
        let err = s.insert_edge(e(0, 1, 4.0)).unwrap_err();
        assert_eq!(err, Error::NonMonotonic { last: 5.0, got: 4.0 });
        assert_eq!(s.num_edges(), 1);
    }

    #[test]
    fn window_and_recent_queries() {
        let mut s = TemporalAdjacency::new(0);
        for (i, t) in [1.0, 3.0, 5.0, 7.0].into_iter().enumerate() {
            s.insert_edge(e(0, i + 1, t)).unwrap();
        }
        let ts = |v: Vec<NeighborEntry>| v.iter().map(|x| x.t).collect::<Vec<_>>();
        assert!(s.get_temporal_neighbors(42, 0.0, 10.0).is_empty());
        assert_eq!(ts(s.get_temporal_neighbors(0, 2.0, 6.0)), vec![5.0, 3.0]);
        assert_eq!(s.get_temporal_neighbors(0, 0.0, f64::INFINITY).len(), 4);
        assert_eq!(ts(s.get_recent_neighbors(0, 2, 6.0)), vec![5.0, 3.0]);
        assert_eq!(s.get_recent_neighbors(0, 10, 8.0).len(), 4);
        assert!(s.get_recent_neighbors(0, 10, 1.0).is_empty());
        assert_eq!(ts(s.sample_recent(0, 10, 7.0, Some(4.0))), vec![7.0, 5.0, 3.0]);
    }

    #[test]
    fn ties_put_later_insertions_first() {
        let mut s = TemporalAdjacency::new(0);
        s.insert_edge(e(0, 1, 2.0)).unwrap();
        s.insert_edge(e(0, 2, 2.0)).unwrap();
        assert_eq!(pairs(&s.get_recent_neighbors(0, 1, 3.0)), vec![(2, 2.0)]);
    }

    #[test]
    fn self_loop_is_listed_once() {
        let mut s = TemporalAdjacency::new(0);
        s.insert_edge(e(3, 3, 1.0)).unwrap();
        assert_eq!(pairs(&s.neighbors(3)), vec![(3, 1.0)]);
        assert_eq!(s.num_nodes(), 4);
    }

    fn arb_stream() -> impl Strategy<Value = Vec<(usize, usize, u8)>> {
        proptest::collection::vec((0usize..6, 0usize..6, 0u8..3), 0..40)
    }

    fn build(stream: &[(usize, usize, u8)]) -> TemporalAdjacency {
        let mut s = TemporalAdjacency::new(0);
        let mut t = 0.0;
        for &(a, b, dt) in stream {
            t += dt as f64;
            s.insert_edge(e(a, b, t)).unwrap();
        }
        s
    }

    proptest! {
        #[test]
        fn window_query_equals_filter(stream in arb_stream(), v in 0usize..6, a in 0.0f64..60.0, w in 0.0f64..30.0) {
            let s = build(&stream);
            let full = s.neighbors(v);
            let expected: Vec<_> = full.iter().filter(|x| a <= x.t && x.t <= a + w).copied().collect();
            prop_assert_eq!(s.get_temporal_neighbors(v, a, a + w), expected);
        }

        #[test]
        fn lists_descend_and_recent_matches_sort_truncate(stream in arb_stream(), v in 0usize..6, l in 1usize..5, before in 0.0f64..60.0) {
            let s = build(&stream);
            let full = s.neighbors(v);
            prop_assert!(full.windows(2).all(|w| w[0].t >= w[1].t));
            let mut expected: Vec<_> = full.iter().filter(|x| x.t < before).copied().collect();
            expected.truncate(l);
            prop_assert_eq!(s.get_recent_neighbors(v, l, before), expected);
        }

        #[test]
        fn inserted_edge_visible_from_both_ends(stream in arb_stream()) {
            let s = build(&stream);
            for id in 0..s.num_edges() {
                let edge = s.edge(id).clone();
                for end in [edge.src, edge.dst] {
                    let hits = s.get_recent_neighbors(end, usize::MAX, edge.t + 1e-9);
                    prop_assert!(hits.iter().any(|x| x.edge == id));
                }
            }
        }
    }
}
