use crate::error::{Error, Result};
use crate::graph::{EdgeId, NeighborEntry};
use crate::model::kernels::{combine_heads, head_key_value, kv_input, AttentionOutput};
use crate::model::linalg::norm2;
use crate::model::ModelParameters;

/// Below this fraction of its previous size a shrunken normalizer is summed
/// again from the stored scores.
const RESUM_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CachedNeighbor {
    pub entry: NeighborEntry,
    pub logit: f64,
    /// `exp(logit - max_logit)`.
    pub score: f64,
    pub value: Vec<f64>,
}

/// One head's attention over a node's neighborhood, kept unnormalized:
/// `output = numerator / z` with `z = Σ score` and `numerator = Σ score·value`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadCache {
    pub query: Vec<f64>,
    pub records: Vec<CachedNeighbor>,
    pub max_logit: f64,
    pub z: f64,
    pub numerator: Vec<f64>,
}

impl HeadCache {
    fn output(&self) -> Vec<f64> {
        self.numerator.iter().map(|x| x / self.z).collect()
    }

    /// `ln Σ exp(logit)`, for comparing normalizers across max shifts.
    pub fn log_z(&self) -> f64 {
        self.z.ln() + self.max_logit
    }

    fn remove(&mut self, edge: EdgeId) -> bool {
        let Some(i) = self.records.iter().position(|r| r.entry.edge == edge) else {
            return false;
        };
        let r = self.records.remove(i);
        self.z -= r.score;
        for (n, v) in self.numerator.iter_mut().zip(&r.value) {
            *n -= r.score * v;
        }
        true
    }

    fn insert(&mut self, entry: NeighborEntry, logit: f64, value: Vec<f64>) {
        if self.records.is_empty() || logit > self.max_logit {
            let factor = if self.records.is_empty() {
                0.0
            } else {
                (self.max_logit - logit).exp()
            };
            self.z *= factor;
            self.numerator.iter_mut().for_each(|n| *n *= factor);
            self.records.iter_mut().for_each(|r| r.score *= factor);
            self.max_logit = logit;
        }
        let score = (logit - self.max_logit).exp();
        self.z += score;
        for (n, v) in self.numerator.iter_mut().zip(&value) {
            *n += score * v;
        }
        self.records.push(CachedNeighbor {
            entry,
            logit,
            score,
            value,
        });
    }

    fn resum(&mut self) {
        self.max_logit = self.records.iter().map(|r| r.logit).fold(f64::NEG_INFINITY, f64::max);
        self.z = 0.0;
        self.numerator.iter_mut().for_each(|n| *n = 0.0);
        for r in &mut self.records {
            r.score = (r.logit - self.max_logit).exp();
            self.z += r.score;
            for (n, v) in self.numerator.iter_mut().zip(&r.value) {
                *n += r.score * v;
            }
        }
    }
}

/// Attention state of one node at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAttention {
    /// Reference time the keys were encoded against.
    pub t_ref: f64,
    pub heads: Vec<HeadCache>,
}

impl NodeAttention {
    /// Captures the records of an exact attention evaluation. `None` for an
    /// empty neighborhood.
    pub fn from_output(neighbors: &[NeighborEntry], t_ref: f64, out: &AttentionOutput) -> Option<Self> {
        if neighbors.is_empty() {
            return None;
        }
        let heads = out
            .heads
            .iter()
            .map(|h| {
                let max_logit = h.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                let mut numerator = vec![0.0; h.query.len()];
                let mut records = Vec::with_capacity(neighbors.len());
                for ((entry, &logit), value) in neighbors.iter().zip(&h.logits).zip(&h.values) {
                    let score = (logit - max_logit).exp();
                    z += score;
                    for (n, v) in numerator.iter_mut().zip(value) {
                        *n += score * v;
                    }
                    records.push(CachedNeighbor {
                        entry: *entry,
                        logit,
                        score,
                        value: value.clone(),
                    });
                }
                HeadCache {
                    query: h.query.clone(),
                    records,
                    max_logit,
                    z,
                    numerator,
                }
            })
            .collect();
        Some(Self { t_ref, heads })
    }

    pub fn len(&self) -> usize {
        self.heads.first().map_or(0, |h| h.records.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, edge: EdgeId) -> bool {
        self.heads
            .first()
            .is_some_and(|h| h.records.iter().any(|r| r.entry.edge == edge))
    }

    pub fn entries(&self) -> Vec<NeighborEntry> {
        self.heads
            .first()
            .map(|h| h.records.iter().map(|r| r.entry).collect())
            .unwrap_or_default()
    }

    pub fn embedding(&self, layer: usize, params: &ModelParameters) -> Vec<f64> {
        if self.is_empty() {
            return vec![0.0; params.dims.d];
        }
        let outputs: Vec<Vec<f64>> = self.heads.iter().map(HeadCache::output).collect();
        combine_heads(&outputs, layer, params)
    }

    /// `Σ_h max_u ‖v_u^h · W_O^h‖`: the largest norm any neighbor's value can
    /// reach in output space, summed over heads.
    pub fn value_magnitude(&self, layer: usize, params: &ModelParameters) -> f64 {
        let values: Vec<Vec<&[f64]>> = self
            .heads
            .iter()
            .map(|h| h.records.iter().map(|r| r.value.as_slice()).collect())
            .collect();
        value_magnitude(&values, layer, params)
    }
}

/// Per-head output-space magnitudes `max_u ‖v_u^h · W_O^h‖`.
pub fn head_magnitudes(values: &[Vec<&[f64]>], layer: usize, params: &ModelParameters) -> Vec<f64> {
    let out = &params.attention[layer].output;
    let d_k = params.dims.d_k;
    values
        .iter()
        .enumerate()
        .map(|(h, vs)| {
            vs.iter()
                .map(|v| norm2(&out.vecmat_rows(v, h * d_k)))
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn value_magnitude(values: &[Vec<&[f64]>], layer: usize, params: &ModelParameters) -> f64 {
    head_magnitudes(values, layer, params).iter().sum()
}

/// Output magnitude of an exact attention evaluation.
pub fn output_magnitude(out: &AttentionOutput, layer: usize, params: &ModelParameters) -> f64 {
    let values: Vec<Vec<&[f64]>> = out
        .heads
        .iter()
        .map(|h| h.values.iter().map(Vec::as_slice).collect())
        .collect();
    value_magnitude(&values, layer, params)
}

/// A neighbor with its layer input `repr_u ‖ e` (time encoding excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborInput {
    pub entry: NeighborEntry,
    pub x: Vec<f64>,
}

/// Neighborhood changes applied by [`delta_embed`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeltaChange {
    pub added: Vec<NeighborInput>,
    pub expired: Vec<EdgeId>,
    /// Cached neighbors whose input changed, with the new input.
    pub updated: Vec<NeighborInput>,
}

impl DeltaChange {
    pub fn size(&self) -> usize {
        self.added.len() + self.expired.len() + self.updated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }
}

/// Updates a cached attention state in place and returns the new embedding.
///
/// Expired and updated neighbors have their old score and weighted value
/// subtracted from the running sums; added and updated neighbors are scored
/// against the cached query and folded in, rescaling when a new largest
/// logit appears. Only the changed neighbors are touched. An unknown expired
/// or updated edge means the cache entry is not the one the change was
/// derived from; the caller should fall back to an exact evaluation.
pub fn delta_embed(
    cache: &mut NodeAttention,
    change: &DeltaChange,
    layer: usize,
    params: &ModelParameters,
) -> Result<Vec<f64>> {
    for edge in change
        .expired
        .iter()
        .chain(change.updated.iter().map(|u| &u.entry.edge))
    {
        if !cache.contains(*edge) {
            return Err(Error::Contract(format!("edge {edge} is not cached for this node")));
        }
    }
    if let Some(a) = change.added.iter().find(|a| cache.contains(a.entry.edge)) {
        return Err(Error::Contract(format!("edge {} is already cached", a.entry.edge)));
    }
    if change.is_empty() {
        return Ok(cache.embedding(layer, params));
    }
    let t_ref = cache.t_ref;
    let inputs: Vec<(NeighborEntry, Vec<f64>)> = change
        .updated
        .iter()
        .chain(&change.added)
        .map(|n| (n.entry, kv_input(&n.x, t_ref - n.entry.t, params)))
        .collect();
    for (h, head) in cache.heads.iter_mut().enumerate() {
        let z_before = head.z;
        for edge in change
            .expired
            .iter()
            .chain(change.updated.iter().map(|u| &u.entry.edge))
        {
            head.remove(*edge);
        }
        let shrunk = head.z < RESUM_FRACTION * z_before;
        if head.records.is_empty() || shrunk {
            head.resum();
        }
        for (entry, kv) in &inputs {
            let (logit, value) = head_key_value(&head.query, kv, layer, h, params);
            head.insert(*entry, logit, value);
        }
    }
    Ok(cache.embedding(layer, params))
}

/// `Σ_h (|ΔN_v| / |N_v|) · M_h · |1 - Z_old^h / Z_new^h|`, with `|N_v|` the
/// cached neighborhood size before the change and `M_h` the largest
/// output-space value norm among the old and new neighbors. Infinite when
/// either neighborhood is empty.
pub fn delta_error_bound(
    old: &NodeAttention,
    new: &NodeAttention,
    change_size: usize,
    layer: usize,
    params: &ModelParameters,
) -> f64 {
    if change_size == 0 {
        return 0.0;
    }
    if old.is_empty() || new.is_empty() {
        return f64::INFINITY;
    }
    let values: Vec<Vec<&[f64]>> = old
        .heads
        .iter()
        .zip(&new.heads)
        .map(|(a, b)| a.records.iter().chain(&b.records).map(|r| r.value.as_slice()).collect())
        .collect();
    let m = head_magnitudes(&values, layer, params);
    let share = change_size as f64 / old.len() as f64;
    old.heads
        .iter()
        .zip(&new.heads)
        .zip(m)
        .map(|((a, b), m_h)| share * m_h * (1.0 - (a.log_z() - b.log_z()).exp()).abs())
        .sum()
}
