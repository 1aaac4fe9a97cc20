use std::collections::HashMap;

use crate::graph::{NeighborEntry, NodeId};
use crate::incremental::delta::NodeAttention;
use crate::incremental::ChangeRecord;
use crate::model::LayerTable;

/// Per-node sampled neighborhoods: at most `capacity` entries, most recent
/// first, none older than `window` before the node's reference time.
#[derive(Debug, Clone)]
pub struct NeighborCache {
    capacity: usize,
    window: Option<f64>,
    lists: Vec<Vec<NeighborEntry>>,
}

impl NeighborCache {
    pub fn new(capacity: usize, window: Option<f64>) -> Self {
        Self {
            capacity,
            window,
            lists: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window(&self) -> Option<f64> {
        self.window
    }

    pub fn ensure_nodes(&mut self, n: usize) {
        if self.lists.len() < n {
            self.lists.resize_with(n, Vec::new);
        }
    }

    pub fn list(&self, v: NodeId) -> &[NeighborEntry] {
        self.lists.get(v).map_or(&[], Vec::as_slice)
    }

    pub fn set_list(&mut self, v: NodeId, list: Vec<NeighborEntry>) {
        self.ensure_nodes(v + 1);
        self.lists[v] = list;
    }

    /// Prepends `new_entries` (most recent first), evicts past capacity and
    /// drops entries older than `t_now - window`. The record lists the
    /// entries that entered and those that left.
    pub fn update_neighbor_cache(&mut self, v: NodeId, new_entries: &[NeighborEntry], t_now: f64) -> ChangeRecord {
        self.ensure_nodes(v + 1);
        let floor = self.window.map(|w| t_now - w);
        let keep = |e: &NeighborEntry| floor.map_or(true, |f| e.t >= f);
        let old = std::mem::take(&mut self.lists[v]);
        let list: Vec<NeighborEntry> = new_entries
            .iter()
            .chain(old.iter())
            .filter(|e| keep(e))
            .take(self.capacity)
            .copied()
            .collect();
        let in_list = |e: &NeighborEntry| list.iter().any(|x| x.edge == e.edge);
        let record = ChangeRecord {
            added: new_entries.iter().filter(|e| in_list(e)).copied().collect(),
            expired: old.iter().filter(|e| !in_list(e)).copied().collect(),
            updated: Vec::new(),
        };
        self.lists[v] = list;
        record
    }
}

/// `rev[u]` counts the entries naming `u` in each node's cached list.
#[derive(Debug, Clone, Default)]
pub struct ReverseIndex {
    rev: Vec<HashMap<NodeId, u32>>,
}

impl ReverseIndex {
    pub fn ensure_nodes(&mut self, n: usize) {
        if self.rev.len() < n {
            self.rev.resize_with(n, HashMap::new);
        }
    }

    pub fn add(&mut self, owner: NodeId, entries: &[NeighborEntry]) {
        for e in entries {
            self.ensure_nodes(e.node + 1);
            *self.rev[e.node].entry(owner).or_insert(0) += 1;
        }
    }

    pub fn remove(&mut self, owner: NodeId, entries: &[NeighborEntry]) {
        for e in entries {
            let slot = &mut self.rev[e.node];
            if let Some(c) = slot.get_mut(&owner) {
                *c -= 1;
                if *c == 0 {
                    slot.remove(&owner);
                }
            }
        }
    }

    /// Nodes whose cached lists name `u`, in no particular order.
    pub fn dependents(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.rev.get(u).into_iter().flat_map(|m| m.keys().copied())
    }

    pub fn clear(&mut self) {
        for m in &mut self.rev {
            m.clear();
        }
    }
}

/// Cached outputs of every attention layer. `layers[K - 1]` holds the final
/// embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    pub layers: Vec<LayerTable>,
    valid: Vec<bool>,
    valid_at: Vec<f64>,
}

impl EmbeddingCache {
    pub fn new(layers: usize, d: usize) -> Self {
        Self {
            layers: vec![LayerTable::new(d, 0); layers],
            valid: Vec::new(),
            valid_at: Vec::new(),
        }
    }

    pub fn ensure_nodes(&mut self, n: usize) {
        for t in &mut self.layers {
            t.ensure_rows(n);
        }
        if self.valid.len() < n {
            // An untouched node has no neighbors, so its zero row is exact.
            self.valid.resize(n, true);
            self.valid_at.resize(n, 0.0);
        }
    }

    pub fn embedding(&self, v: NodeId) -> &[f64] {
        self.layers.last().expect("at least one layer").row(v)
    }

    pub fn is_valid(&self, v: NodeId) -> bool {
        self.valid.get(v).copied().unwrap_or(true)
    }

    pub fn valid_at(&self, v: NodeId) -> f64 {
        self.valid_at.get(v).copied().unwrap_or(0.0)
    }

    pub fn mark_valid(&mut self, v: NodeId, t: f64) {
        self.valid[v] = true;
        self.valid_at[v] = t;
    }

    pub fn invalidate(&mut self, v: NodeId) {
        self.valid[v] = false;
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn mark_all_valid(&mut self, t: f64) {
        self.valid.iter_mut().for_each(|v| *v = true);
        self.valid_at.iter_mut().for_each(|v| *v = t);
    }
}

/// Per-layer attention state of nodes whose neighborhoods are cached.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    layers: Vec<HashMap<NodeId, NodeAttention>>,
}

impl AttentionCache {
    pub fn new(layers: usize) -> Self {
        Self {
            layers: vec![HashMap::new(); layers],
        }
    }

    pub fn get(&self, layer: usize, v: NodeId) -> Option<&NodeAttention> {
        self.layers[layer].get(&v)
    }

    pub fn get_mut(&mut self, layer: usize, v: NodeId) -> Option<&mut NodeAttention> {
        self.layers[layer].get_mut(&v)
    }

    pub fn insert(&mut self, layer: usize, v: NodeId, entry: NodeAttention) {
        self.layers[layer].insert(v, entry);
    }

    pub fn invalidate(&mut self, v: NodeId) {
        for l in &mut self.layers {
            l.remove(&v);
        }
    }

    pub fn invalidate_layer(&mut self, layer: usize, v: NodeId) {
        self.layers[layer].remove(&v);
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.clear();
        }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
