use serde::{Deserialize, Serialize};

/// Dense node identifier. External ids are remapped by the ingestion layer.
pub type NodeId = usize;

/// Index of an edge in the adjacency store's append-only edge log.
pub type EdgeId = usize;

/// One time-stamped interaction of the stream.
///
/// Direction is kept for the message functions (source and destination use
/// different weights); adjacency treats the edge as undirected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub t: f64,
    pub feat: Vec<f64>,
}

impl TemporalEdge {
    pub fn new(src: NodeId, dst: NodeId, t: f64, feat: Vec<f64>) -> Self {
        Self { src, dst, t, feat }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }

    /// Largest node id touched, plus one.
    pub fn node_bound(&self) -> usize {
        self.src.max(self.dst) + 1
    }
}
