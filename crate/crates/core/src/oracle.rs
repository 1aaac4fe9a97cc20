//! Ground truth: full recomputation of every embedding, and strict
//! one-edge-at-a-time replay.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::Result;
use crate::graph::{NodeId, TemporalAdjacency, TemporalEdge};
use crate::model::embedding::{compute_all_layers, sample_neighbors};
use crate::model::kernels::predict_link;
use crate::model::{
    commit_batch, Aggregator, LayerTable, ModelParameters, NodeMemoryTable, RecursiveEmbedder, Sampling,
};

/// Every node's embedding (plus the intermediate layers) next to the memory
/// it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSnapshot {
    pub layers: Vec<LayerTable>,
    pub memory: NodeMemoryTable,
    pub timestamp: f64,
    pub n: usize,
}

impl EngineSnapshot {
    pub fn empty(params: &ModelParameters) -> Self {
        Self {
            layers: vec![LayerTable::new(params.dims.d, 0); params.dims.layers],
            memory: NodeMemoryTable::new(params.dims.d_s),
            timestamp: 0.0,
            n: 0,
        }
    }

    pub fn embeddings(&self) -> &LayerTable {
        self.layers.last().expect("at least one layer")
    }

    pub fn embedding(&self, v: NodeId) -> &[f64] {
        self.embeddings().row(v)
    }

    /// `node <id> <values...>` per row under a one-line header; values use
    /// the shortest round-tripping decimal form.
    pub fn to_text(&self) -> String {
        let table = self.embeddings();
        let mut out = format!(
            "# streamtgn-snapshot v1 n={} d={} t={}\n",
            self.n,
            table.width(),
            self.timestamp
        );
        for v in 0..self.n {
            let _ = write!(out, "node {v}");
            for x in table.row(v) {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Recomputes all `n` embeddings from scratch. Memory and store are only
/// read.
pub fn full_recompute(
    store: &TemporalAdjacency,
    memory: &NodeMemoryTable,
    params: &ModelParameters,
    sampling: Sampling,
    t_now: f64,
) -> Result<EngineSnapshot> {
    let n = store.num_nodes().max(memory.num_nodes());
    Ok(EngineSnapshot {
        layers: compute_all_layers(store, memory, params, sampling, n)?,
        memory: memory.clone(),
        timestamp: t_now,
        n,
    })
}

/// Nodes within `k` sampled-neighbor hops of `start`, by breadth-first
/// search over neighborhoods sampled afresh from the store.
pub fn affected_bfs(
    store: &TemporalAdjacency,
    memory: &NodeMemoryTable,
    sampling: Sampling,
    start: &[NodeId],
    k: usize,
) -> Vec<NodeId> {
    let mut seen: std::collections::BTreeSet<NodeId> = start.iter().copied().collect();
    let mut frontier: Vec<NodeId> = seen.iter().copied().collect();
    for _ in 0..k {
        let mut next = Vec::new();
        for &u in &frontier {
            for e in sample_neighbors(store, memory, u, sampling) {
                if seen.insert(e.node) {
                    next.push(e.node);
                }
            }
        }
        frontier = next;
    }
    seen.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialReplay {
    pub predictions: Vec<f64>,
    pub memory: NodeMemoryTable,
}

/// Processes `stream` one edge at a time: embed both endpoints from the
/// current state, score the edge, then commit it alone.
pub fn replay_sequential(
    stream: &[TemporalEdge],
    params: &ModelParameters,
    sampling: Sampling,
    aggregator: Aggregator,
) -> Result<SequentialReplay> {
    let mut store = TemporalAdjacency::new(params.dims.d_e);
    let mut memory = NodeMemoryTable::new(params.dims.d_s);
    let mut predictions = Vec::with_capacity(stream.len());
    for edge in stream {
        let (h_src, h_dst) = {
            let mut emb = RecursiveEmbedder::new(&store, &memory, params, sampling);
            (emb.embed(edge.src)?, emb.embed(edge.dst)?)
        };
        predictions.push(predict_link(&h_src, &h_dst, params));
        commit_batch(std::slice::from_ref(edge), &mut store, &mut memory, params, aggregator)?;
    }
    Ok(SequentialReplay { predictions, memory })
}

/// Batch-at-a-time baseline that recomputes every embedding after every
/// batch.
#[derive(Debug, Clone)]
pub struct OracleEngine {
    params: Arc<ModelParameters>,
    sampling: Sampling,
    aggregator: Aggregator,
    store: TemporalAdjacency,
    memory: NodeMemoryTable,
    snapshot: EngineSnapshot,
    /// False when batches were committed without recomputing.
    fresh: bool,
    /// Node pipelines run by the latest batch.
    pub last_recomputed: usize,
    pub total_recomputed: u64,
}

impl OracleEngine {
    pub fn new(params: Arc<ModelParameters>, sampling: Sampling, aggregator: Aggregator) -> Self {
        Self {
            store: TemporalAdjacency::new(params.dims.d_e),
            memory: NodeMemoryTable::new(params.dims.d_s),
            snapshot: EngineSnapshot::empty(&params),
            fresh: true,
            params,
            sampling,
            aggregator,
            last_recomputed: 0,
            total_recomputed: 0,
        }
    }

    pub fn store(&self) -> &TemporalAdjacency {
        &self.store
    }

    pub fn memory(&self) -> &NodeMemoryTable {
        &self.memory
    }

    pub fn snapshot(&self) -> &EngineSnapshot {
        &self.snapshot
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    /// Scores every batch edge from pre-batch embeddings, commits the batch,
    /// then recomputes all embeddings. Returns the scores; the post-commit
    /// snapshot is available through [`snapshot`](Self::snapshot).
    pub fn apply_batch_full(&mut self, batch: &[TemporalEdge]) -> Result<Vec<f64>> {
        self.last_recomputed = 0;
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        self.store.check_batch(batch)?;
        if !self.fresh {
            self.refresh()?;
        }
        let predictions = batch
            .iter()
            .map(|e| {
                predict_link(
                    self.snapshot.embedding(e.src),
                    self.snapshot.embedding(e.dst),
                    &self.params,
                )
            })
            .collect();
        commit_batch(batch, &mut self.store, &mut self.memory, &self.params, self.aggregator)?;
        let t_now = batch.last().map_or(0.0, |e| e.t);
        self.snapshot = full_recompute(&self.store, &self.memory, &self.params, self.sampling, t_now)?;
        self.last_recomputed = self.snapshot.n;
        self.total_recomputed += self.snapshot.n as u64;
        self.fresh = true;
        Ok(predictions)
    }

    /// Commits a batch without scoring it or recomputing embeddings. The
    /// snapshot goes stale until the next [`refresh`](Self::refresh) or
    /// full batch.
    pub fn commit_only(&mut self, batch: &[TemporalEdge]) -> Result<()> {
        self.last_recomputed = 0;
        if batch.is_empty() {
            return Ok(());
        }
        commit_batch(batch, &mut self.store, &mut self.memory, &self.params, self.aggregator)?;
        self.fresh = false;
        Ok(())
    }

    /// Recomputes the snapshot from the committed state.
    pub fn refresh(&mut self) -> Result<()> {
        let t_now = self.store.last_timestamp().unwrap_or(0.0);
        self.snapshot = full_recompute(&self.store, &self.memory, &self.params, self.sampling, t_now)?;
        self.fresh = true;
        Ok(())
    }
}
