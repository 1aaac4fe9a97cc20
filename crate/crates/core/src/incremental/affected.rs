use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{NeighborEntry, NodeId, TemporalEdge};
use crate::incremental::caches::{NeighborCache, ReverseIndex};

/// How one node's sampled neighborhood changed in a batch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub added: Vec<NeighborEntry>,
    pub expired: Vec<NeighborEntry>,
    /// Cached neighbors whose memory changed, ascending.
    pub updated: Vec<NodeId>,
}

impl ChangeRecord {
    /// `|ΔN_v|`: added, expired and updated entries together.
    pub fn size(&self) -> usize {
        self.added.len() + self.expired.len() + self.updated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffectedSet {
    /// Batch endpoints, ascending.
    pub direct: Vec<NodeId>,
    /// K-hop closure of `direct` under the sampled-neighbor relation, ascending.
    pub all: Vec<NodeId>,
    /// Nodes whose embeddings read a changed node within K hops: the K-hop
    /// closure of `direct` under the reverse relation, ascending.
    pub dependents: Vec<NodeId>,
    pub changes: BTreeMap<NodeId, ChangeRecord>,
}

impl AffectedSet {
    /// `all ∪ dependents`, ascending.
    pub fn closure(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = self.all.iter().chain(&self.dependents).copied().collect();
        set.into_iter().collect()
    }
}

/// Endpoints of `batch`, ascending and deduplicated.
pub fn direct_nodes(batch: &[TemporalEdge]) -> Vec<NodeId> {
    let set: BTreeSet<NodeId> = batch.iter().flat_map(|e| [e.src, e.dst]).collect();
    set.into_iter().collect()
}

fn closure(start: &[NodeId], hops: usize, step: impl Fn(NodeId, &mut Vec<NodeId>)) -> Vec<NodeId> {
    let mut seen: BTreeSet<NodeId> = start.iter().copied().collect();
    let mut frontier: Vec<NodeId> = seen.iter().copied().collect();
    let mut next = Vec::new();
    for _ in 0..hops {
        let mut grown = Vec::new();
        for &v in &frontier {
            next.clear();
            step(v, &mut next);
            for &u in &next {
                if seen.insert(u) {
                    grown.push(u);
                }
            }
        }
        if grown.is_empty() {
            break;
        }
        frontier = grown;
    }
    seen.into_iter().collect()
}

/// `direct` plus every node reachable in at most `k` steps along cached
/// neighbor lists. Lists must already include the batch.
pub fn detect_affected(batch: &[TemporalEdge], neighbor_cache: &NeighborCache, k: usize) -> AffectedSet {
    let direct = direct_nodes(batch);
    let all = forward_closure(&direct, neighbor_cache, k);
    AffectedSet {
        direct,
        all,
        ..AffectedSet::default()
    }
}

pub fn forward_closure(start: &[NodeId], neighbor_cache: &NeighborCache, k: usize) -> Vec<NodeId> {
    closure(start, k, |v, out| {
        out.extend(neighbor_cache.list(v).iter().map(|e| e.node))
    })
}

pub fn reverse_closure(start: &[NodeId], reverse: &ReverseIndex, k: usize) -> Vec<NodeId> {
    closure(start, k, |v, out| out.extend(reverse.dependents(v)))
}
