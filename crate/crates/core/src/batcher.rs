//! Count-based batch formation and the sequential-versus-batched staleness
//! harness.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeQueue, TemporalEdge};
use crate::incremental::{EngineConfig, IncrementalEngine};
use crate::model::ModelParameters;
use crate::oracle::replay_sequential;

/// Edges processed together, all treated as concurrent at `t_batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub edges: Vec<TemporalEdge>,
    /// Largest member timestamp.
    pub t_batch: f64,
    /// `t_batch` minus the smallest member timestamp.
    pub s_max: f64,
}

impl Batch {
    /// `None` for an empty edge list.
    pub fn from_edges(edges: Vec<TemporalEdge>) -> Option<Self> {
        if edges.is_empty() {
            return None;
        }
        let t_batch = edges.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max);
        let t_min = edges.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
        Some(Self {
            edges,
            t_batch,
            s_max: t_batch - t_min,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Staleness `t_batch - t` of each member edge.
    pub fn staleness(&self) -> Vec<f64> {
        self.edges.iter().map(|e| self.t_batch - e.t).collect()
    }
}

/// Flushes up to `b` edges in arrival order.
pub fn form_batch(queue: &mut EdgeQueue, b: usize) -> Option<Batch> {
    Batch::from_edges(queue.flush_batch(b))
}

/// Splits a stream into consecutive batches of `b` edges.
pub fn batches(stream: &[TemporalEdge], b: usize) -> impl Iterator<Item = Batch> + '_ {
    stream.chunks(b.max(1)).filter_map(|c| Batch::from_edges(c.to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessRow {
    pub batch_size: usize,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// Largest `s_max` over the run's batches.
    pub max_staleness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessReport {
    pub rows: Vec<StalenessRow>,
    /// Least-squares slope of max deviation against batch size.
    pub slope: f64,
}

impl StalenessReport {
    pub fn to_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "staleness batch_size={} max_dev={:e} mean_dev={:e} max_staleness={}",
                    r.batch_size, r.max_deviation, r.mean_deviation, r.max_staleness
                )
            })
            .collect();
        lines.push(format!("staleness_fit slope={:e}", self.slope));
        lines
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Replays `stream` one edge at a time once, then through the batched
/// engine for each batch size, and compares predictions edge by edge.
pub fn compare_sequential_vs_batched(
    stream: &[TemporalEdge],
    batch_sizes: &[usize],
    params: Arc<ModelParameters>,
    config: EngineConfig,
) -> Result<StalenessReport> {
    if batch_sizes.contains(&0) {
        return Err(Error::Config("batch sizes must be positive".into()));
    }
    let reference = replay_sequential(stream, &params, config.sampling, config.aggregator)?;
    let mut rows = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let mut engine = IncrementalEngine::new(params.clone(), config)?;
        let mut predictions = Vec::with_capacity(stream.len());
        let mut max_staleness: f64 = 0.0;
        for batch in batches(stream, b) {
            max_staleness = max_staleness.max(batch.s_max);
            predictions.extend(engine.process_batch(&batch.edges)?);
        }
        let devs: Vec<f64> = predictions
            .iter()
            .zip(&reference.predictions)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let max_deviation = devs.iter().copied().fold(0.0, f64::max);
        let mean_deviation = if devs.is_empty() {
            0.0
        } else {
            devs.iter().sum::<f64>() / devs.len() as f64
        };
        rows.push(StalenessRow {
            batch_size: b,
            max_deviation,
            mean_deviation,
            max_staleness,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.batch_size as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max_deviation).collect();
    Ok(StalenessReport {
        slope: slope(&xs, &ys),
        rows,
    })
}
