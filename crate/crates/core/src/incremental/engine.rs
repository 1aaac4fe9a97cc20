use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::batcher::{form_batch, Batch};
use crate::drift::{fixed_schedule_decide, DriftConfig, DriftState, RebuildDecision, RebuildPolicy};
use crate::error::{Error, Result};
use crate::graph::{EdgeQueue, NeighborEntry, NodeId, TemporalAdjacency, TemporalEdge};
use crate::incremental::affected::{detect_affected, reverse_closure, AffectedSet};
use crate::incremental::caches::{AttentionCache, EmbeddingCache, NeighborCache, ReverseIndex};
use crate::incremental::delta::{
    delta_embed, delta_error_bound, output_magnitude, DeltaChange, NeighborInput, NodeAttention,
};
use crate::incremental::gather::gather_sorted;
use crate::model::embedding::{compute_all_layers, embed_layer_over, embed_with, reference_time};
use crate::model::kernels::predict_link;
use crate::model::linalg::l2_diff;
use crate::model::{
    commit_batch, Aggregator, LayerTable, ModelParameters, NodeMemoryTable, RecursiveEmbedder, Sampling,
};
use crate::oracle::EngineSnapshot;

/// Floating-point allowance when checking a delta update against its bound.
pub const DELTA_BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Recompute every node whose embedding can change.
    #[default]
    Exact,
    /// Patch cached attention state and leave indirect dependents stale.
    Delta,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Delta => "delta",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "delta" => Ok(Mode::Delta),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub sampling: Sampling,
    pub aggregator: Aggregator,
    pub mode: Mode,
    pub policy: RebuildPolicy,
    pub queue_capacity: usize,
    /// Re-evaluate every delta update exactly and check it against its
    /// error bound.
    pub audit_delta: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            sampling: Sampling::new(10),
            aggregator: Aggregator::Mean,
            mode: Mode::Exact,
            policy: RebuildPolicy::default(),
            queue_capacity: 4096,
            audit_delta: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sampling.fanout == 0 {
            return Err(Error::Config("fanout L must be at least 1".into()));
        }
        if let Some(w) = self.sampling.window {
            if !(w >= 0.0) {
                return Err(Error::Config(format!("window must be non-negative, got {w}")));
            }
        }
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue capacity must be positive".into()));
        }
        if let RebuildPolicy::Adaptive(c) = &self.policy {
            c.validate()?;
        }
        Ok(())
    }
}

/// Work done by one batch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchCounters {
    pub batch_index: u64,
    pub edges: usize,
    pub t_batch: f64,
    pub s_max: f64,
    pub direct: usize,
    /// Size of the forward K-hop closure.
    pub affected: usize,
    /// Size of the reverse K-hop closure.
    pub dependents: usize,
    /// Node embedding pipelines run (each covers all K layers).
    pub recomputed: usize,
    /// Dependents left with stale embeddings (delta mode).
    pub stale: usize,
    pub nodes_sampled: usize,
    pub rows_gathered: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub gru_steps: usize,
    pub messages: usize,
    /// `Σ_{v recomputed} |N_v|`: neighborhood entries read by attention.
    pub affected_edges: usize,
    pub attention_macs: u64,
    pub global_drift: f64,
    pub rebuild: String,
    pub drifted: usize,
    pub rebuild_cost: usize,
    pub delta_audits: usize,
    pub delta_violations: usize,
    pub max_delta_deviation: f64,
}

/// Run-level sums of [`BatchCounters`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineTotals {
    pub batches: u64,
    pub edges: u64,
    pub recomputed: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub full_rebuilds: u64,
    pub partial_rebuilds: u64,
    pub rebuild_cost: u64,
    pub delta_audits: u64,
    pub delta_violations: u64,
    pub max_delta_deviation: f64,
}

/// Incremental inference over an edge stream.
///
/// Each batch is scored from the embeddings cached before it, committed to
/// memory and adjacency, and then only the nodes whose embeddings can have
/// changed are recomputed.
#[derive(Debug, Clone)]
pub struct IncrementalEngine {
    params: Arc<ModelParameters>,
    config: EngineConfig,
    store: TemporalAdjacency,
    memory: NodeMemoryTable,
    queue: EdgeQueue,
    neighbors: NeighborCache,
    reverse: ReverseIndex,
    embeddings: EmbeddingCache,
    attention: AttentionCache,
    drift: DriftState,
    batch_index: u64,
    last: BatchCounters,
    last_affected: AffectedSet,
    totals: EngineTotals,
    max_value_magnitude: f64,
}

fn layer_macs(params: &ModelParameters, layer: usize, evaluated: usize, removed: usize, with_query: bool) -> u64 {
    let d = &params.dims;
    let (h, d_k) = (d.heads as u64, d.d_k as u64);
    let per_neighbor = 2 * d.kv_width(layer) as u64 * d_k + 2 * d_k;
    let query = if with_query {
        d.query_width(layer) as u64 * d_k
    } else {
        0
    };
    h * (query + evaluated as u64 * per_neighbor + removed as u64 * d_k) + h * d_k * d.d as u64
}

impl IncrementalEngine {
    pub fn new(params: Arc<ModelParameters>, config: EngineConfig) -> Result<Self> {
        params.dims.validate()?;
        config.validate()?;
        let layers = params.dims.layers;
        let drift_config = match config.policy {
            RebuildPolicy::Adaptive(c) => c,
            _ => DriftConfig::default(),
        };
        Ok(Self {
            store: TemporalAdjacency::new(params.dims.d_e),
            memory: NodeMemoryTable::new(params.dims.d_s),
            queue: EdgeQueue::new(config.queue_capacity, params.dims.d_e),
            neighbors: NeighborCache::new(config.sampling.fanout, config.sampling.window),
            reverse: ReverseIndex::default(),
            embeddings: EmbeddingCache::new(layers, params.dims.d),
            attention: AttentionCache::new(layers),
            drift: DriftState::new(drift_config),
            batch_index: 0,
            last: BatchCounters::default(),
            last_affected: AffectedSet::default(),
            totals: EngineTotals::default(),
            max_value_magnitude: 0.0,
            params,
            config,
        })
    }

    pub fn params(&self) -> &Arc<ModelParameters> {
        &self.params
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> &TemporalAdjacency {
        &self.store
    }

    pub fn memory(&self) -> &NodeMemoryTable {
        &self.memory
    }

    pub fn neighbor_cache(&self) -> &NeighborCache {
        &self.neighbors
    }

    pub fn attention_cache(&self) -> &AttentionCache {
        &self.attention
    }

    pub fn embedding_cache(&self) -> &EmbeddingCache {
        &self.embeddings
    }

    pub fn drift(&self) -> &DriftState {
        &self.drift
    }

    pub fn num_nodes(&self) -> usize {
        self.store.num_nodes()
    }

    pub fn batch_index(&self) -> u64 {
        self.batch_index
    }

    /// Counters of the most recent batch.
    pub fn counters(&self) -> &BatchCounters {
        &self.last
    }

    pub fn totals(&self) -> &EngineTotals {
        &self.totals
    }

    /// Affected set of the most recent batch.
    pub fn last_affected(&self) -> &AffectedSet {
        &self.last_affected
    }

    /// Largest output-space value magnitude seen by a final-layer evaluation
    /// (tracked in delta mode).
    pub fn max_value_magnitude(&self) -> f64 {
        self.max_value_magnitude
    }

    /// Cached final embedding of `v` (zero for unseen nodes).
    pub fn embedding(&self, v: NodeId) -> &[f64] {
        self.embeddings.embedding(v)
    }

    pub fn embeddings(&self) -> &LayerTable {
        self.embeddings.layers.last().expect("at least one layer")
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        let n = self.store.num_nodes();
        EngineSnapshot {
            layers: self.embeddings.layers.clone(),
            memory: self.memory.clone(),
            timestamp: self.store.last_timestamp().unwrap_or(0.0),
            n,
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Stages an edge; `Ok(false)` when the queue is full.
    pub fn enqueue(&mut self, edge: TemporalEdge) -> Result<bool> {
        self.queue.enqueue(edge)
    }

    /// Forms a batch of up to `b` queued edges and processes it.
    pub fn step(&mut self, b: usize) -> Result<Option<(Batch, Vec<f64>)>> {
        let Some(batch) = form_batch(&mut self.queue, b) else {
            return Ok(None);
        };
        let scores = self.process_batch(&batch.edges)?;
        Ok(Some((batch, scores)))
    }

    fn ensure_nodes(&mut self, n: usize) {
        self.memory.ensure_nodes(n);
        self.neighbors.ensure_nodes(n);
        self.reverse.ensure_nodes(n);
        self.embeddings.ensure_nodes(n);
    }

    /// Scores, commits and refreshes one batch. Returns one score per edge.
    pub fn process_batch(&mut self, batch: &[TemporalEdge]) -> Result<Vec<f64>> {
        self.last = BatchCounters::default();
        self.last_affected = AffectedSet::default();
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        self.store.check_batch(batch)?;
        let params = self.params.clone();
        let k = params.dims.layers;
        self.batch_index += 1;
        let mut counters = BatchCounters {
            batch_index: self.batch_index,
            edges: batch.len(),
            t_batch: batch.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max),
            s_max: 0.0,
            rebuild: "none".into(),
            ..BatchCounters::default()
        };
        counters.s_max = counters.t_batch - batch.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);

        let scores: Vec<f64> = batch
            .iter()
            .map(|e| {
                predict_link(
                    self.embeddings.embedding(e.src),
                    self.embeddings.embedding(e.dst),
                    &params,
                )
            })
            .collect();

        let commit = commit_batch(
            batch,
            &mut self.store,
            &mut self.memory,
            &params,
            self.config.aggregator,
        )?;
        counters.gru_steps = commit.gru_steps;
        counters.messages = commit.messages;
        self.ensure_nodes(self.store.num_nodes());

        // Stage 1: refresh sampled neighborhoods of the batch endpoints.
        let mut fresh: HashMap<NodeId, Vec<NeighborEntry>> = HashMap::new();
        for (e, &id) in batch.iter().zip(&commit.edge_ids).rev() {
            fresh.entry(e.src).or_default().push(NeighborEntry {
                node: e.dst,
                t: e.t,
                edge: id,
            });
            if !e.is_self_loop() {
                fresh.entry(e.dst).or_default().push(NeighborEntry {
                    node: e.src,
                    t: e.t,
                    edge: id,
                });
            }
        }
        let mut changes = BTreeMap::new();
        for &v in &commit.direct {
            let rec = self
                .neighbors
                .update_neighbor_cache(v, &fresh[&v], reference_time(&self.memory, v));
            self.reverse.remove(v, &rec.expired);
            self.reverse.add(v, &rec.added);
            changes.insert(v, rec);
        }
        counters.nodes_sampled = commit.direct.len();

        let mut affected = detect_affected(batch, &self.neighbors, k);
        affected.dependents = reverse_closure(&affected.direct, &self.reverse, k);
        for v in affected.closure() {
            let mut updated: Vec<NodeId> = self
                .neighbors
                .list(v)
                .iter()
                .map(|e| e.node)
                .filter(|u| affected.direct.binary_search(u).is_ok())
                .collect();
            updated.sort_unstable();
            updated.dedup();
            if !updated.is_empty() {
                changes.entry(v).or_default().updated = updated;
            }
        }
        changes.retain(|_, rec| !rec.is_empty());
        affected.changes = changes;
        counters.direct = affected.direct.len();
        counters.affected = affected.all.len();
        counters.dependents = affected.dependents.len();

        let recompute = match self.config.mode {
            Mode::Exact => affected.closure(),
            Mode::Delta => affected.all.clone(),
        };
        self.recompute_layers(&recompute, &affected.direct, &mut counters)?;
        for &v in &recompute {
            self.embeddings.mark_valid(v, counters.t_batch);
        }
        if self.config.mode == Mode::Delta {
            for &v in &affected.dependents {
                if affected.all.binary_search(&v).is_err() {
                    self.embeddings.invalidate(v);
                    self.attention.invalidate(v);
                    counters.stale += 1;
                }
            }
        }

        let reports = self.change_ratios(&affected);
        self.drift.record_batch_changes(&reports)?;
        counters.global_drift = self.drift.global_drift();
        let decision = match self.config.policy {
            RebuildPolicy::Adaptive(_) => self.drift.decide_rebuild(self.store.num_nodes()),
            RebuildPolicy::Fixed { interval } => fixed_schedule_decide(self.batch_index, Some(interval)),
            RebuildPolicy::Never => RebuildDecision::None,
        };
        if decision.is_rebuild() {
            counters.rebuild = decision.kind().into();
            counters.drifted = match &decision {
                RebuildDecision::Partial(nodes) => nodes.len(),
                _ => self.store.num_nodes(),
            };
            counters.rebuild_cost = self.execute_rebuild(&decision)?;
        }

        self.totals.batches += 1;
        self.totals.edges += batch.len() as u64;
        self.totals.recomputed += counters.recomputed as u64;
        self.totals.cache_hits += counters.cache_hits as u64;
        self.totals.cache_misses += counters.cache_misses as u64;
        self.totals.delta_audits += counters.delta_audits as u64;
        self.totals.delta_violations += counters.delta_violations as u64;
        self.totals.max_delta_deviation = self.totals.max_delta_deviation.max(counters.max_delta_deviation);
        self.totals.rebuild_cost += counters.rebuild_cost as u64;
        self.last = counters;
        self.last_affected = affected;
        Ok(scores)
    }

    /// Stages 2-4: gather the memory rows the recompute set reads, then run
    /// every attention layer for the set in ascending node order.
    fn recompute_layers(
        &mut self,
        recompute: &[NodeId],
        direct: &[NodeId],
        counters: &mut BatchCounters,
    ) -> Result<()> {
        let Self {
            params,
            config,
            store,
            memory,
            neighbors,
            embeddings,
            attention,
            max_value_magnitude,
            ..
        } = self;
        let params: &ModelParameters = params;
        let k = params.dims.layers;
        let d_x = params.dims.d_x;

        let mut ids = Vec::new();
        let mut pos: HashMap<NodeId, usize> = HashMap::new();
        for &v in recompute {
            for u in std::iter::once(v).chain(neighbors.list(v).iter().map(|e| e.node)) {
                if let std::collections::hash_map::Entry::Vacant(slot) = pos.entry(u) {
                    slot.insert(ids.len());
                    ids.push(u);
                }
            }
        }
        let gathered = gather_sorted(&ids, memory.as_slice(), params.dims.d_s)?;
        counters.rows_gathered = ids.len();
        counters.recomputed = recompute.len();

        let mut changed_below: HashSet<NodeId> = direct.iter().copied().collect();
        for layer in 0..k {
            let final_layer = layer + 1 == k;
            let (lower, upper) = embeddings.layers.split_at_mut(layer);
            let below: Option<&LayerTable> = lower.last();
            let table = &mut upper[0];
            let base = |u: NodeId, buf: &mut Vec<f64>| {
                buf.extend_from_slice(gathered.row(pos[&u]));
                buf.extend(std::iter::repeat(0.0).take(d_x));
            };
            let from_table = |u: NodeId, buf: &mut Vec<f64>| buf.extend_from_slice(below.expect("lower layer").row(u));
            let repr: &dyn Fn(NodeId, &mut Vec<f64>) = if layer == 0 { &base } else { &from_table };
            let input_of = |e: &NeighborEntry| {
                let mut x = Vec::with_capacity(params.dims.repr_width(layer) + params.dims.d_e);
                repr(e.node, &mut x);
                x.extend_from_slice(store.features(e.edge));
                x
            };

            let mut outputs: Vec<(NodeId, Vec<f64>)> = Vec::with_capacity(recompute.len());
            for &v in recompute {
                let list = neighbors.list(v);
                let t_ref = reference_time(memory, v);
                counters.affected_edges += list.len();
                let exact = |counters: &mut BatchCounters| -> Result<_> {
                    counters.cache_misses += 1;
                    counters.attention_macs += if list.is_empty() {
                        0
                    } else {
                        layer_macs(params, layer, list.len(), 0, true)
                    };
                    embed_with(v, list, t_ref, layer, repr, store, params)
                };
                if config.mode == Mode::Exact {
                    outputs.push((v, exact(counters)?.embedding));
                    continue;
                }
                let reusable = !changed_below.contains(&v) && attention.get(layer, v).is_some_and(|c| c.t_ref == t_ref);
                if reusable {
                    let cache = attention.get_mut(layer, v).expect("checked above");
                    let cached = cache.entries();
                    let in_list: HashSet<usize> = list.iter().map(|e| e.edge).collect();
                    let in_cache: HashSet<usize> = cached.iter().map(|e| e.edge).collect();
                    let change = DeltaChange {
                        added: list
                            .iter()
                            .filter(|e| !in_cache.contains(&e.edge))
                            .map(|e| NeighborInput {
                                entry: *e,
                                x: input_of(e),
                            })
                            .collect(),
                        expired: cached
                            .iter()
                            .filter(|e| !in_list.contains(&e.edge))
                            .map(|e| e.edge)
                            .collect(),
                        updated: list
                            .iter()
                            .filter(|e| in_cache.contains(&e.edge) && changed_below.contains(&e.node))
                            .map(|e| NeighborInput {
                                entry: *e,
                                x: input_of(e),
                            })
                            .collect(),
                    };
                    counters.cache_hits += 1;
                    if change.is_empty() {
                        continue;
                    }
                    let old = config.audit_delta.then(|| cache.clone());
                    let h = delta_embed(cache, &change, layer, params)?;
                    counters.attention_macs += layer_macs(
                        params,
                        layer,
                        change.added.len() + change.updated.len(),
                        change.expired.len() + change.updated.len(),
                        false,
                    );
                    if final_layer && !cache.is_empty() {
                        *max_value_magnitude = max_value_magnitude.max(cache.value_magnitude(layer, params));
                    }
                    if let Some(old) = old {
                        let reference = embed_with(v, list, t_ref, layer, repr, store, params)?;
                        let deviation = l2_diff(&h, &reference.embedding);
                        let bound = delta_error_bound(&old, cache, change.size(), layer, params);
                        counters.delta_audits += 1;
                        counters.max_delta_deviation = counters.max_delta_deviation.max(deviation);
                        if deviation > bound + DELTA_BOUND_SLACK {
                            counters.delta_violations += 1;
                        }
                    }
                    outputs.push((v, h));
                } else {
                    let out = exact(counters)?;
                    if final_layer && !out.heads.is_empty() {
                        *max_value_magnitude = max_value_magnitude.max(output_magnitude(&out, layer, params));
                    }
                    match NodeAttention::from_output(list, t_ref, &out) {
                        Some(entry) => attention.insert(layer, v, entry),
                        None => attention.invalidate_layer(layer, v),
                    }
                    outputs.push((v, out.embedding));
                }
            }

            let mut changed_here = HashSet::new();
            for (v, h) in outputs {
                if table.row(v) != h.as_slice() {
                    changed_here.insert(v);
                    table.set_row(v, &h);
                }
            }
            changed_below = changed_here;
        }
        Ok(())
    }

    /// `(v, |ΔN_v|, |N_v|)` for every node of `affected` whose sampled
    /// neighborhood changed and is non-empty.
    pub fn change_ratios(&self, affected: &AffectedSet) -> Vec<(NodeId, usize, usize)> {
        affected
            .changes
            .iter()
            .filter_map(|(&v, rec)| {
                let size = self.neighbors.list(v).len();
                (size > 0).then_some((v, rec.size(), size))
            })
            .collect()
    }

    /// Runs a rebuild and resets the drift estimators. Returns the number of
    /// node pipelines it ran.
    pub fn execute_rebuild(&mut self, decision: &RebuildDecision) -> Result<usize> {
        let t = self.store.last_timestamp().unwrap_or(0.0);
        let k = self.params.dims.layers;
        let cost = match (decision, self.config.mode) {
            (RebuildDecision::None, _) => return Ok(0),
            // Exact-mode caches already equal a fresh recomputation.
            (_, Mode::Exact) => 0,
            (RebuildDecision::Partial(nodes), Mode::Delta) => {
                let mut rec = RecursiveEmbedder::new(&self.store, &self.memory, &self.params, self.config.sampling);
                for &v in nodes {
                    for level in 1..k {
                        let h = rec.level(v, level)?;
                        self.embeddings.layers[level - 1].set_row(v, &h);
                    }
                    let out = rec.attend(v, k)?;
                    if !out.heads.is_empty() {
                        self.max_value_magnitude =
                            self.max_value_magnitude
                                .max(output_magnitude(&out, k - 1, &self.params));
                    }
                    self.embeddings.layers[k - 1].set_row(v, &out.embedding);
                    self.embeddings.mark_valid(v, t);
                }
                // Cached attention records that read the rebuilt rows are
                // now out of date.
                for v in reverse_closure(nodes, &self.reverse, k) {
                    self.attention.invalidate(v);
                }
                rec.evaluations
            }
            (RebuildDecision::Full, Mode::Delta) => {
                let n = self.store.num_nodes();
                let tables = compute_all_layers(&self.store, &self.memory, &self.params, self.config.sampling, n)?;
                let below = if k > 1 { Some(&tables[k - 2]) } else { None };
                for v in 0..n {
                    let list = self.neighbors.list(v);
                    if list.is_empty() {
                        continue;
                    }
                    let out = embed_layer_over(v, list, k - 1, below, &self.store, &self.memory, &self.params)?;
                    self.max_value_magnitude =
                        self.max_value_magnitude
                            .max(output_magnitude(&out, k - 1, &self.params));
                }
                self.embeddings.layers = tables;
                self.embeddings.mark_all_valid(t);
                self.attention.clear();
                n
            }
        };
        match decision {
            RebuildDecision::Full => self.totals.full_rebuilds += 1,
            RebuildDecision::Partial(_) => self.totals.partial_rebuilds += 1,
            RebuildDecision::None => {}
        }
        self.drift.reset();
        Ok(cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;
    use crate::oracle::OracleEngine;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(layers: usize) -> Arc<ModelParameters> {
        Arc::new(
            ModelParameters::init(
                31,
                ModelDims {
                    layers,
                    ..ModelDims::default()
                },
            )
            .unwrap(),
        )
    }

    fn stream(seed: u64, n: usize, m: usize) -> Vec<TemporalEdge> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        (0..m)
            .map(|_| {
                t += rng.gen_range(0.0..2.0);
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                TemporalEdge::new(a, b, t, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            })
            .collect()
    }

    fn lockstep(layers: usize, fanout: usize, b: usize, aggregator: Aggregator) {
        let p = params(layers);
        let config = EngineConfig {
            sampling: Sampling::new(fanout),
            aggregator,
            ..EngineConfig::default()
        };
        let mut engine = IncrementalEngine::new(p.clone(), config).unwrap();
        let mut oracle = OracleEngine::new(p, config.sampling, aggregator);
        for chunk in stream(layers as u64 * 7 + fanout as u64, 30, 240).chunks(b) {
            let a = engine.process_batch(chunk).unwrap();
            let o = oracle.apply_batch_full(chunk).unwrap();
            assert_eq!(a, o);
            let snap = oracle.snapshot();
            for v in 0..snap.n {
                assert_eq!(engine.embedding(v), snap.embedding(v), "node {v}");
            }
            assert_eq!(engine.memory(), oracle.memory());
        }
    }

    #[test]
    fn exact_mode_matches_oracle() {
        for (layers, fanout, b) in [(1, 2, 1), (1, 5, 7), (2, 2, 5), (2, 3, 20), (3, 2, 9)] {
            for agg in Aggregator::ALL {
                lockstep(layers, fanout, b, agg);
            }
        }
    }

    #[test]
    fn empty_batch_is_a_no_op() {
        let mut engine = IncrementalEngine::new(params(1), EngineConfig::default()).unwrap();
        assert!(engine.process_batch(&[]).unwrap().is_empty());
        assert_eq!(engine.counters(), &BatchCounters::default());
        assert_eq!(engine.batch_index(), 0);
    }

    #[test]
    fn unaffected_rows_are_untouched() {
        let mut engine = IncrementalEngine::new(params(1), EngineConfig::default()).unwrap();
        let s = stream(3, 40, 100);
        engine.process_batch(&s[..90]).unwrap();
        let before = engine.snapshot();
        engine.process_batch(&s[90..]).unwrap();
        let touched = engine.last_affected().closure();
        for v in 0..before.n {
            if touched.binary_search(&v).is_err() {
                assert_eq!(engine.embedding(v), before.embedding(v));
                assert_eq!(engine.memory().state(v), before.memory.state(v));
            }
        }
    }

    #[test]
    fn counters_match_sets() {
        let mut engine = IncrementalEngine::new(params(2), EngineConfig::default()).unwrap();
        for chunk in stream(4, 50, 200).chunks(10) {
            engine.process_batch(chunk).unwrap();
            let a = engine.last_affected();
            let c = engine.counters();
            assert_eq!(c.recomputed, a.closure().len());
            assert_eq!(c.direct, a.direct.len());
            assert_eq!(c.affected, a.all.len());
            assert!(a.direct.iter().all(|v| a.all.binary_search(v).is_ok()));
        }
    }

    #[test]
    fn queue_and_step() {
        let mut engine = IncrementalEngine::new(
            params(1),
            EngineConfig {
                queue_capacity: 3,
                ..EngineConfig::default()
            },
        )
        .unwrap();
        let s = stream(5, 10, 4);
        for e in &s[..3] {
            assert!(engine.enqueue(e.clone()).unwrap());
        }
        assert!(!engine.enqueue(s[3].clone()).unwrap());
        let (batch, scores) = engine.step(2).unwrap().unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(scores.len(), 2);
        assert_eq!(engine.queue_len(), 1);
        assert!(engine.enqueue(TemporalEdge::new(0, 1, 1e9, vec![0.0; 3])).is_err());
    }

    #[test]
    fn delta_mode_audits_clean() {
        let p = params(2);
        let config = EngineConfig {
            sampling: Sampling::new(4).with_window(Some(20.0)),
            mode: Mode::Delta,
            audit_delta: true,
            policy: RebuildPolicy::Never,
            ..EngineConfig::default()
        };
        let mut engine = IncrementalEngine::new(p, config).unwrap();
        for chunk in stream(6, 60, 600).chunks(15) {
            engine.process_batch(chunk).unwrap();
        }
        let totals = engine.totals();
        assert!(totals.delta_audits > 0);
        assert_eq!(totals.delta_violations, 0);
        assert!(totals.cache_hits > 0);
    }

    #[test]
    fn full_rebuild_restores_exact_embeddings() {
        let p = params(2);
        let config = EngineConfig {
            sampling: Sampling::new(3),
            mode: Mode::Delta,
            policy: RebuildPolicy::Fixed { interval: 4 },
            ..EngineConfig::default()
        };
        let mut engine = IncrementalEngine::new(p.clone(), config).unwrap();
        let mut oracle = OracleEngine::new(p, config.sampling, config.aggregator);
        for (i, chunk) in stream(8, 25, 160).chunks(10).enumerate() {
            engine.process_batch(chunk).unwrap();
            oracle.apply_batch_full(chunk).unwrap();
            if (i + 1) % 4 == 0 {
                assert_eq!(engine.counters().rebuild, "full");
                assert_eq!(engine.drift().global_drift(), 0.0);
                for v in 0..engine.num_nodes() {
                    assert_eq!(engine.embedding(v), oracle.snapshot().embedding(v));
                }
            }
        }
    }

    #[test]
    fn partial_rebuild_touches_only_its_nodes() {
        let p = params(1);
        let config = EngineConfig {
            sampling: Sampling::new(3),
            mode: Mode::Delta,
            policy: RebuildPolicy::Never,
            ..EngineConfig::default()
        };
        let mut engine = IncrementalEngine::new(p.clone(), config).unwrap();
        let mut oracle = OracleEngine::new(p, config.sampling, config.aggregator);
        for chunk in stream(9, 25, 200).chunks(10) {
            engine.process_batch(chunk).unwrap();
            oracle.apply_batch_full(chunk).unwrap();
        }
        let before = engine.snapshot();
        let target = vec![1, 4, 7];
        engine
            .execute_rebuild(&RebuildDecision::Partial(target.clone()))
            .unwrap();
        for v in 0..engine.num_nodes() {
            if target.contains(&v) {
                assert_eq!(engine.embedding(v), oracle.snapshot().embedding(v));
            } else {
                assert_eq!(engine.embedding(v), before.embedding(v));
            }
        }
        assert_eq!(engine.drift().global_drift(), 0.0);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("delta".parse::<Mode>().unwrap(), Mode::Delta);
        assert_eq!(Mode::Exact.to_string(), "exact");
        assert!("fast".parse::<Mode>().is_err());
    }
}
