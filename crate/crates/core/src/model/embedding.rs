use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NeighborEntry, NodeId, TemporalAdjacency};
use crate::model::kernels::{temporal_attention, AttentionOutput};
use crate::model::{ModelParameters, NodeMemoryTable};

/// How a node's neighborhood is sampled: the `fanout` most recent committed
/// interactions, optionally restricted to those no older than `window`
/// before the node's reference time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub fanout: usize,
    pub window: Option<f64>,
}

impl Sampling {
    pub fn new(fanout: usize) -> Self {
        Self { fanout, window: None }
    }

    pub fn with_window(mut self, window: Option<f64>) -> Self {
        self.window = window;
        self
    }
}

/// The time at which node `v` is embedded: its last interaction.
pub fn reference_time(memory: &NodeMemoryTable, v: NodeId) -> f64 {
    memory.last_interaction(v)
}

pub fn sample_neighbors(
    store: &TemporalAdjacency,
    memory: &NodeMemoryTable,
    v: NodeId,
    sampling: Sampling,
) -> Vec<NeighborEntry> {
    store.sample_recent(v, sampling.fanout, reference_time(memory, v), sampling.window)
}

/// Row-indexed table of per-node vectors. Rows past the end read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTable {
    width: usize,
    data: Vec<f64>,
    zero: Vec<f64>,
}

impl LayerTable {
    pub fn new(width: usize, rows: usize) -> Self {
        Self {
            width,
            data: vec![0.0; width * rows],
            zero: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn ensure_rows(&mut self, n: usize) {
        if self.rows() < n {
            self.data.resize(n * self.width, 0.0);
        }
    }

    pub fn row(&self, v: NodeId) -> &[f64] {
        if v < self.rows() {
            &self.data[v * self.width..(v + 1) * self.width]
        } else {
            &self.zero
        }
    }

    pub fn set_row(&mut self, v: NodeId, x: &[f64]) {
        self.ensure_rows(v + 1);
        self.data[v * self.width..(v + 1) * self.width].copy_from_slice(x);
    }

    /// Row-major view, for gathers.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Appends the layer-0 representation `[s_u ‖ x_u]` of `u` to `buf`.
/// Static node features are zero vectors.
pub fn push_base_repr(memory: &NodeMemoryTable, d_x: usize, u: NodeId, buf: &mut Vec<f64>) {
    buf.extend_from_slice(memory.state(u));
    buf.extend(std::iter::repeat(0.0).take(d_x));
}

/// One attention layer for node `v` over `neighbors`, reading every node's
/// layer input through `repr`.
pub fn embed_with(
    v: NodeId,
    neighbors: &[NeighborEntry],
    t_ref: f64,
    layer: usize,
    repr: &dyn Fn(NodeId, &mut Vec<f64>),
    store: &TemporalAdjacency,
    params: &ModelParameters,
) -> Result<AttentionOutput> {
    let mut query = Vec::with_capacity(params.dims.repr_width(layer));
    repr(v, &mut query);
    let inputs: Vec<(Vec<f64>, f64)> = neighbors
        .iter()
        .map(|e| {
            let mut x = Vec::with_capacity(params.dims.repr_width(layer) + params.dims.d_e);
            repr(e.node, &mut x);
            x.extend_from_slice(store.features(e.edge));
            (x, e.t)
        })
        .collect();
    temporal_attention(&query, &inputs, t_ref, layer, params)
}

/// Layer `layer` of node `v`, reading its inputs from `memory` (layer 0) or
/// from `below`, the table of layer-`layer` representations.
pub fn embed_layer(
    v: NodeId,
    layer: usize,
    below: Option<&LayerTable>,
    store: &TemporalAdjacency,
    memory: &NodeMemoryTable,
    params: &ModelParameters,
    sampling: Sampling,
) -> Result<AttentionOutput> {
    let neighbors = sample_neighbors(store, memory, v, sampling);
    embed_layer_over(v, &neighbors, layer, below, store, memory, params)
}

pub fn embed_layer_over(
    v: NodeId,
    neighbors: &[NeighborEntry],
    layer: usize,
    below: Option<&LayerTable>,
    store: &TemporalAdjacency,
    memory: &NodeMemoryTable,
    params: &ModelParameters,
) -> Result<AttentionOutput> {
    let t_ref = reference_time(memory, v);
    let d_x = params.dims.d_x;
    match (layer, below) {
        (0, _) => {
            let repr = |u: NodeId, buf: &mut Vec<f64>| push_base_repr(memory, d_x, u, buf);
            embed_with(v, neighbors, t_ref, 0, &repr, store, params)
        }
        (_, Some(table)) => {
            let repr = |u: NodeId, buf: &mut Vec<f64>| buf.extend_from_slice(table.row(u));
            embed_with(v, neighbors, t_ref, layer, &repr, store, params)
        }
        (_, None) => Err(Error::Contract(format!(
            "layer {layer} needs the table of layer {layer} inputs"
        ))),
    }
}

/// Every layer of every node, computed layer by layer in node order.
/// Element `l` holds the outputs of attention layer `l`; the last element is
/// the final embedding table.
pub fn compute_all_layers(
    store: &TemporalAdjacency,
    memory: &NodeMemoryTable,
    params: &ModelParameters,
    sampling: Sampling,
    n: usize,
) -> Result<Vec<LayerTable>> {
    let mut tables: Vec<LayerTable> = Vec::with_capacity(params.dims.layers);
    for layer in 0..params.dims.layers {
        let mut table = LayerTable::new(params.dims.d, n);
        for v in 0..n {
            if store.degree(v) == 0 {
                continue;
            }
            let out = embed_layer(v, layer, tables.last(), store, memory, params, sampling)?;
            table.set_row(v, &out.embedding);
        }
        tables.push(table);
    }
    Ok(tables)
}

/// On-demand embedding of single nodes through the recursive definition,
/// memoizing intermediate layers. Produces the same bits as
/// [`compute_all_layers`].
pub struct RecursiveEmbedder<'a> {
    store: &'a TemporalAdjacency,
    memory: &'a NodeMemoryTable,
    params: &'a ModelParameters,
    sampling: Sampling,
    memo: Vec<HashMap<NodeId, Vec<f64>>>,
    pub evaluations: usize,
}

impl<'a> RecursiveEmbedder<'a> {
    pub fn new(
        store: &'a TemporalAdjacency,
        memory: &'a NodeMemoryTable,
        params: &'a ModelParameters,
        sampling: Sampling,
    ) -> Self {
        Self {
            store,
            memory,
            params,
            sampling,
            memo: vec![HashMap::new(); params.dims.layers + 1],
            evaluations: 0,
        }
    }

    /// Final embedding of `v`.
    pub fn embed(&mut self, v: NodeId) -> Result<Vec<f64>> {
        self.level(v, self.params.dims.layers)
    }

    /// Representation of `v` after `level` attention layers.
    pub fn level(&mut self, v: NodeId, level: usize) -> Result<Vec<f64>> {
        if let Some(h) = self.memo[level].get(&v) {
            return Ok(h.clone());
        }
        let h = if level == 0 {
            let mut buf = Vec::new();
            push_base_repr(self.memory, self.params.dims.d_x, v, &mut buf);
            buf
        } else {
            self.attend(v, level)?.embedding
        };
        self.memo[level].insert(v, h.clone());
        Ok(h)
    }

    /// Attention evaluation producing level `level >= 1` of `v`, with its
    /// per-head records. Not memoized.
    pub fn attend(&mut self, v: NodeId, level: usize) -> Result<AttentionOutput> {
        let neighbors = sample_neighbors(self.store, self.memory, v, self.sampling);
        if neighbors.is_empty() {
            return Ok(AttentionOutput {
                embedding: vec![0.0; self.params.dims.d],
                heads: Vec::new(),
            });
        }
        let mut below = HashMap::new();
        below.insert(v, self.level(v, level - 1)?);
        for e in &neighbors {
            if !below.contains_key(&e.node) {
                let h = self.level(e.node, level - 1)?;
                below.insert(e.node, h);
            }
        }
        self.evaluations += 1;
        let repr = |u: NodeId, buf: &mut Vec<f64>| buf.extend_from_slice(&below[&u]);
        let t_ref = reference_time(self.memory, v);
        embed_with(v, &neighbors, t_ref, level - 1, &repr, self.store, self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TemporalEdge;
    use crate::model::ModelDims;

    fn setup(layers: usize) -> (TemporalAdjacency, NodeMemoryTable, ModelParameters) {
        let dims = ModelDims {
            layers,
            d_x: 2,
            ..ModelDims::default()
        };
        let params = ModelParameters::init(21, dims).unwrap();
        let mut store = TemporalAdjacency::new(dims.d_e);
        let mut memory = NodeMemoryTable::new(dims.d_s);
        let edges = [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (0, 2, 4.0), (4, 4, 5.0)];
        for (i, &(a, b, t)) in edges.iter().enumerate() {
            store
                .insert_edge(TemporalEdge::new(a, b, t, vec![0.1 * i as f64; dims.d_e]))
                .unwrap();
            for v in [a, b] {
                memory.set_state(v, &vec![0.05 * (v + i) as f64; dims.d_s]);
                memory.set_last_interaction(v, t);
            }
        }
        (store, memory, params)
    }

    #[test]
    fn recursive_matches_layerwise_bitwise() {
        for layers in [1, 2, 3] {
            let (store, memory, params) = setup(layers);
            let sampling = Sampling::new(2);
            let tables = compute_all_layers(&store, &memory, &params, sampling, 6).unwrap();
            let mut rec = RecursiveEmbedder::new(&store, &memory, &params, sampling);
            for v in 0..6 {
                assert_eq!(rec.embed(v).unwrap(), tables[layers - 1].row(v));
            }
        }
    }

    #[test]
    fn isolated_node_is_zero() {
        let (store, memory, params) = setup(2);
        let tables = compute_all_layers(&store, &memory, &params, Sampling::new(5), 7).unwrap();
        assert_eq!(tables[1].row(5), vec![0.0; 8].as_slice());
        assert_eq!(tables[1].row(100), vec![0.0; 8].as_slice());
        assert_ne!(tables[1].row(0), vec![0.0; 8].as_slice());
    }

    #[test]
    fn window_limits_neighborhood() {
        let (store, memory, _) = setup(1);
        let all = sample_neighbors(&store, &memory, 2, Sampling::new(10));
        assert_eq!(all.len(), 3);
        let recent = sample_neighbors(&store, &memory, 2, Sampling::new(10).with_window(Some(1.5)));
        assert_eq!(recent.iter().map(|e| e.t).collect::<Vec<_>>(), vec![4.0, 3.0]);
    }

    #[test]
    fn deeper_layer_without_table_is_an_error() {
        let (store, memory, params) = setup(2);
        assert!(embed_layer(0, 1, None, &store, &memory, &params, Sampling::new(3)).is_err());
    }
}
