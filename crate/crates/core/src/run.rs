//! Verification, benchmark, sweep and policy-comparison runs over a stream.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::drift::{DriftConfig, DriftState, RebuildPolicy};
use crate::error::Result;
use crate::graph::{NodeId, TemporalEdge};
use crate::incremental::{EngineConfig, IncrementalEngine, Mode};
use crate::model::linalg::l2_diff;
use crate::model::ModelParameters;
use crate::oracle::{affected_bfs, full_recompute, OracleEngine};
use crate::speedup::lower_bound_ops;

/// Exact-mode deviations above this fail verification.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Floating-point allowance on the drift bound.
pub const DRIFT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBatch {
    pub batch: u64,
    pub edges: usize,
    pub affected: usize,
    pub recomputed: usize,
    pub embedding_deviation: f64,
    pub prediction_deviation: f64,
    pub bfs_match: bool,
    pub rebuild: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: Mode,
    pub policy: String,
    pub batches: u64,
    pub checked: Vec<VerifyBatch>,
    pub max_embedding_deviation: f64,
    pub max_prediction_deviation: f64,
    pub bfs_mismatches: usize,
    pub delta_audits: u64,
    pub delta_violations: u64,
    /// `(δ_max/(1-γ))·max‖v_u‖`, checked under the adaptive policy in
    /// delta mode.
    pub drift_bound: Option<f64>,
    pub max_value_magnitude: f64,
    pub drift_violations: usize,
    pub rebuilds: u64,
    /// Rebuilds after which some estimator was not zero.
    pub reset_failures: usize,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .checked
            .iter()
            .map(|b| {
                format!(
                    "verify batch={} edges={} affected={} recomputed={} emb_dev={:e} pred_dev={:e} bfs_match={} rebuild={}",
                    b.batch,
                    b.edges,
                    b.affected,
                    b.recomputed,
                    b.embedding_deviation,
                    b.prediction_deviation,
                    b.bfs_match,
                    b.rebuild
                )
            })
            .collect();
        let bound = self.drift_bound.map_or("none".to_string(), |b| format!("{b:e}"));
        lines.push(format!(
            "verify_summary mode={} policy={} batches={} max_emb_dev={:e} max_pred_dev={:e} bfs_mismatches={} delta_audits={} delta_violations={} drift_bound={} max_value_norm={:e} drift_violations={} rebuilds={} reset_failures={} passed={}",
            self.mode,
            self.policy,
            self.batches,
            self.max_embedding_deviation,
            self.max_prediction_deviation,
            self.bfs_mismatches,
            self.delta_audits,
            self.delta_violations,
            bound,
            self.max_value_magnitude,
            self.drift_violations,
            self.rebuilds,
            self.reset_failures,
            self.passed
        ));
        lines
    }
}

fn max_node_deviation(engine: &IncrementalEngine, oracle: &OracleEngine) -> f64 {
    let snap = oracle.snapshot();
    (0..snap.n.max(engine.num_nodes()))
        .map(|v| l2_diff(engine.embedding(v), snap.embedding(v)))
        .fold(0.0, f64::max)
}

/// Runs the incremental engine and the oracle in lockstep. Every
/// `check_every`-th batch is scored and compared against a full
/// recomputation; every batch's affected set is compared against a
/// breadth-first search.
pub fn run_verify(cfg: &RunConfig, params: Arc<ModelParameters>, edges: &[TemporalEdge]) -> Result<VerifyReport> {
    cfg.validate()?;
    let engine_config = EngineConfig {
        audit_delta: cfg.mode == Mode::Delta,
        ..cfg.engine_config()
    };
    let k = params.dims.layers;
    let mut engine = IncrementalEngine::new(params.clone(), engine_config)?;
    let mut oracle = OracleEngine::new(params, engine_config.sampling, engine_config.aggregator);
    let drift_config = match engine_config.policy {
        RebuildPolicy::Adaptive(d) if cfg.mode == Mode::Delta => Some(d),
        _ => None,
    };
    let mut report = VerifyReport {
        mode: cfg.mode,
        policy: engine_config.policy.to_string(),
        batches: 0,
        checked: Vec::new(),
        max_embedding_deviation: 0.0,
        max_prediction_deviation: 0.0,
        bfs_mismatches: 0,
        delta_audits: 0,
        delta_violations: 0,
        drift_bound: None,
        max_value_magnitude: 0.0,
        drift_violations: 0,
        rebuilds: 0,
        reset_failures: 0,
        passed: false,
    };
    for (i, chunk) in edges.chunks(cfg.batch_size).enumerate() {
        let index = i as u64 + 1;
        let check = index % cfg.check_every as u64 == 0;
        let scores = engine.process_batch(chunk)?;
        let affected = engine.last_affected();
        let bfs = affected_bfs(
            engine.store(),
            engine.memory(),
            engine_config.sampling,
            &affected.direct,
            k,
        );
        let bfs_match = bfs == affected.all;
        if !bfs_match {
            report.bfs_mismatches += 1;
        }
        let counters = engine.counters();
        if counters.rebuild != "none" {
            report.rebuilds += 1;
            if engine.drift().global_drift() != 0.0 || engine.drift().max_estimate() != 0.0 {
                report.reset_failures += 1;
            }
        }
        if check {
            let expected = oracle.apply_batch_full(chunk)?;
            let prediction_deviation = scores
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let embedding_deviation = max_node_deviation(&engine, &oracle);
            report.max_embedding_deviation = report.max_embedding_deviation.max(embedding_deviation);
            report.max_prediction_deviation = report.max_prediction_deviation.max(prediction_deviation);
            if let Some(d) = drift_config {
                let bound = d.drift_factor() * engine.max_value_magnitude();
                if embedding_deviation > bound + DRIFT_SLACK {
                    report.drift_violations += 1;
                }
            }
            report.checked.push(VerifyBatch {
                batch: index,
                edges: chunk.len(),
                affected: affected.all.len(),
                recomputed: counters.recomputed,
                embedding_deviation,
                prediction_deviation,
                bfs_match,
                rebuild: counters.rebuild.clone(),
            });
        } else {
            oracle.commit_only(chunk)?;
        }
        report.batches = index;
    }
    let totals = engine.totals();
    report.delta_audits = totals.delta_audits;
    report.delta_violations = totals.delta_violations;
    report.max_value_magnitude = engine.max_value_magnitude();
    report.drift_bound = drift_config.map(|d| d.drift_factor() * engine.max_value_magnitude());
    let exact_ok = cfg.mode != Mode::Exact
        || (report.max_embedding_deviation <= EXACT_TOLERANCE && report.max_prediction_deviation <= EXACT_TOLERANCE);
    report.passed = exact_ok
        && report.bfs_mismatches == 0
        && report.delta_violations == 0
        && report.drift_violations == 0
        && report.reset_failures == 0;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub batch: u64,
    pub edges: usize,
    pub nodes: usize,
    pub direct: usize,
    pub affected: usize,
    pub recomputed: usize,
    /// `recomputed / nodes`.
    pub affected_ratio: f64,
    /// `nodes / recomputed`: full-recompute pipelines over incremental ones.
    pub counter_speedup: f64,
    pub cache_hit_rate: f64,
    pub attention_macs: u64,
    pub affected_edges: usize,
    pub rebuild: String,
    pub drifted: usize,
    pub rebuild_cost: usize,
    pub global_drift: f64,
    pub micros: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub batches: u64,
    pub edges: u64,
    pub nodes: usize,
    pub mean_affected_ratio: f64,
    /// `Σ nodes / Σ recomputed` over all batches.
    pub counter_speedup: f64,
    pub rebuilds: u64,
    pub rebuild_cost: u64,
    /// Attention multiply-accumulates over `|E_aff|·K·d`.
    pub work_ratio: f64,
    pub final_max_deviation: f64,
    pub final_mean_deviation: f64,
    pub micros: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: BenchSummary,
}

impl BenchReport {
    pub fn to_lines(&self) -> Vec<String> {
        let mut lines = Vec::with_capacity(2 * self.rows.len() + 2);
        for r in &self.rows {
            lines.push(format!(
                "batch index={} edges={} nodes={} direct={} affected={} recomputed={} affected_ratio={} counter_speedup={} cache_hit_rate={} attention_macs={} affected_edges={} rebuild={} drifted={} rebuild_cost={} global_drift={}",
                r.batch,
                r.edges,
                r.nodes,
                r.direct,
                r.affected,
                r.recomputed,
                r.affected_ratio,
                r.counter_speedup,
                r.cache_hit_rate,
                r.attention_macs,
                r.affected_edges,
                r.rebuild,
                r.drifted,
                r.rebuild_cost,
                r.global_drift
            ));
            lines.push(format!("time.batch index={} micros={}", r.batch, r.micros));
        }
        let s = &self.summary;
        lines.push(format!(
            "summary batches={} edges={} nodes={} mean_affected_ratio={} counter_speedup={} rebuilds={} rebuild_cost={} work_ratio={} final_max_dev={:e} final_mean_dev={:e}",
            s.batches,
            s.edges,
            s.nodes,
            s.mean_affected_ratio,
            s.counter_speedup,
            s.rebuilds,
            s.rebuild_cost,
            s.work_ratio,
            s.final_max_deviation,
            s.final_mean_deviation
        ));
        lines.push(format!("time.summary micros={}", s.micros));
        lines
    }
}

/// Streams `edges` through the engine, recording per-batch work counters,
/// and compares the final embeddings against one full recomputation.
pub fn run_bench(cfg: &RunConfig, params: Arc<ModelParameters>, edges: &[TemporalEdge]) -> Result<BenchReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut engine = IncrementalEngine::new(params.clone(), cfg.engine_config())?;
    let mut rows = Vec::new();
    let mut affected_edges_total = 0u64;
    let mut macs_total = 0u128;
    for chunk in edges.chunks(cfg.batch_size) {
        let t0 = Instant::now();
        engine.process_batch(chunk)?;
        let micros = t0.elapsed().as_micros();
        let c = engine.counters();
        let nodes = engine.num_nodes();
        let lookups = c.cache_hits + c.cache_misses;
        affected_edges_total += c.affected_edges as u64;
        macs_total += c.attention_macs as u128;
        rows.push(BenchRow {
            batch: c.batch_index,
            edges: c.edges,
            nodes,
            direct: c.direct,
            affected: c.affected,
            recomputed: c.recomputed,
            affected_ratio: c.recomputed as f64 / nodes as f64,
            counter_speedup: nodes as f64 / c.recomputed as f64,
            cache_hit_rate: if lookups == 0 {
                0.0
            } else {
                c.cache_hits as f64 / lookups as f64
            },
            attention_macs: c.attention_macs,
            affected_edges: c.affected_edges,
            rebuild: c.rebuild.clone(),
            drifted: c.drifted,
            rebuild_cost: c.rebuild_cost,
            global_drift: c.global_drift,
            micros,
        });
    }
    let snap = full_recompute(
        engine.store(),
        engine.memory(),
        &params,
        cfg.sampling(),
        engine.store().last_timestamp().unwrap_or(0.0),
    )?;
    let devs: Vec<f64> = (0..snap.n)
        .map(|v| l2_diff(engine.embedding(v), snap.embedding(v)))
        .collect();
    let totals = engine.totals();
    let batches = rows.len().max(1) as f64;
    let node_sum: f64 = rows.iter().map(|r| r.nodes as f64).sum();
    let lower = lower_bound_ops(affected_edges_total, params.dims.layers as u32, params.dims.d as u64);
    let summary = BenchSummary {
        batches: totals.batches,
        edges: totals.edges,
        nodes: engine.num_nodes(),
        mean_affected_ratio: rows.iter().map(|r| r.affected_ratio).sum::<f64>() / batches,
        counter_speedup: node_sum / totals.recomputed.max(1) as f64,
        rebuilds: totals.full_rebuilds + totals.partial_rebuilds,
        rebuild_cost: totals.rebuild_cost,
        work_ratio: if lower == 0 {
            0.0
        } else {
            macs_total as f64 / lower as f64
        },
        final_max_deviation: devs.iter().copied().fold(0.0, f64::max),
        final_mean_deviation: if devs.is_empty() {
            0.0
        } else {
            devs.iter().sum::<f64>() / devs.len() as f64
        },
        micros: started.elapsed().as_micros(),
    };
    Ok(BenchReport { rows, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    BatchSize,
    Fanout,
    /// Fixed rebuild interval; a value of 0 means never rebuild.
    RebuildInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: usize,
    pub mean_affected_ratio: f64,
    pub counter_speedup: f64,
    pub rebuilds: u64,
    pub rebuild_cost: u64,
    pub final_max_deviation: f64,
}

impl SweepPoint {
    pub fn to_line(&self) -> String {
        let (axis, value) = match (self.axis, self.value) {
            (SweepAxis::BatchSize, v) => ("B", v.to_string()),
            (SweepAxis::Fanout, v) => ("L", v.to_string()),
            (SweepAxis::RebuildInterval, 0) => ("R", "never".to_string()),
            (SweepAxis::RebuildInterval, v) => ("R", v.to_string()),
        };
        format!(
            "sweep {axis}={value} mean_affected_ratio={} counter_speedup={} rebuilds={} rebuild_cost={} final_max_deviation={}",
            self.mean_affected_ratio, self.counter_speedup, self.rebuilds, self.rebuild_cost, self.final_max_deviation
        )
    }
}

/// Benchmarks the same stream once per value of `axis`.
pub fn run_sweep(
    cfg: &RunConfig,
    params: Arc<ModelParameters>,
    edges: &[TemporalEdge],
    axis: SweepAxis,
    values: &[usize],
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            match axis {
                SweepAxis::BatchSize => c.batch_size = value,
                SweepAxis::Fanout => c.fanout = value,
                SweepAxis::RebuildInterval => {
                    c.policy = match value {
                        0 => RebuildPolicy::Never,
                        interval => RebuildPolicy::Fixed {
                            interval: interval as u64,
                        },
                    }
                }
            }
            let report = run_bench(&c, params.clone(), edges)?;
            Ok(SweepPoint {
                axis,
                value,
                mean_affected_ratio: report.summary.mean_affected_ratio,
                counter_speedup: report.summary.counter_speedup,
                rebuilds: report.summary.rebuilds,
                rebuild_cost: report.summary.rebuild_cost,
                final_max_deviation: report.summary.final_max_deviation,
            })
        })
        .collect()
}

/// Per-batch drift reports `(v, |ΔN_v|, |N_v|)` and node counts. Neither
/// depends on the mode or the rebuild policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeTrace {
    pub batches: Vec<(usize, Vec<(NodeId, usize, usize)>)>,
}

pub fn record_change_trace(
    cfg: &RunConfig,
    params: Arc<ModelParameters>,
    edges: &[TemporalEdge],
) -> Result<ChangeTrace> {
    cfg.validate()?;
    let config = EngineConfig {
        mode: Mode::Exact,
        policy: RebuildPolicy::Never,
        ..cfg.engine_config()
    };
    let mut engine = IncrementalEngine::new(params, config)?;
    let mut batches = Vec::new();
    for chunk in edges.chunks(cfg.batch_size) {
        engine.process_batch(chunk)?;
        batches.push((engine.num_nodes(), engine.change_ratios(engine.last_affected())));
    }
    Ok(ChangeTrace { batches })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub rebuilds: u64,
    /// Largest global drift estimate seen before any reset.
    pub worst_drift: f64,
}

/// Replays a trace through the drift estimators under `policy`. Drift seen
/// during the first `warmup` batches is not counted toward `worst_drift`.
pub fn simulate_policy(
    trace: &ChangeTrace,
    drift: DriftConfig,
    policy: RebuildPolicy,
    warmup: usize,
) -> Result<PolicyOutcome> {
    let mut state = DriftState::new(drift);
    let mut outcome = PolicyOutcome {
        rebuilds: 0,
        worst_drift: 0.0,
    };
    for (i, (n, reports)) in trace.batches.iter().enumerate() {
        state.record_batch_changes(reports)?;
        if i >= warmup {
            outcome.worst_drift = outcome.worst_drift.max(state.global_drift());
        }
        let rebuild = match policy {
            RebuildPolicy::Adaptive(_) => state.decide_rebuild(*n).is_rebuild(),
            RebuildPolicy::Fixed { interval } => (i as u64 + 1) % interval == 0,
            RebuildPolicy::Never => false,
        };
        if rebuild {
            outcome.rebuilds += 1;
            state.reset();
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub batches: usize,
    pub warmup: usize,
    pub adaptive: PolicyOutcome,
    /// Largest interval whose worst drift does not exceed the adaptive
    /// policy's; `None` if even every-batch rebuilding exceeds it.
    pub tuned_interval: Option<u64>,
    pub fixed: Option<PolicyOutcome>,
}

impl PolicyComparison {
    /// Adaptive rebuilds over tuned-fixed rebuilds.
    pub fn rebuild_ratio(&self) -> f64 {
        match self.fixed {
            Some(f) if f.rebuilds > 0 => self.adaptive.rebuilds as f64 / f.rebuilds as f64,
            _ => f64::INFINITY,
        }
    }

    pub fn to_line(&self) -> String {
        let (interval, fixed_rebuilds, fixed_drift) = match (self.tuned_interval, self.fixed) {
            (Some(r), Some(f)) => (r.to_string(), f.rebuilds.to_string(), format!("{}", f.worst_drift)),
            _ => ("none".into(), "none".into(), "none".into()),
        };
        let mut out = String::new();
        let _ = write!(
            out,
            "policy_compare batches={} warmup={} adaptive_rebuilds={} adaptive_worst_drift={} tuned_interval={} fixed_rebuilds={} fixed_worst_drift={} ratio={}",
            self.batches,
            self.warmup,
            self.adaptive.rebuilds,
            self.adaptive.worst_drift,
            interval,
            fixed_rebuilds,
            fixed_drift,
            self.rebuild_ratio()
        );
        out
    }
}

/// Counts adaptive rebuilds, then tunes a fixed interval to the adaptive
/// run's worst observed drift and counts its rebuilds.
pub fn compare_rebuild_policies(trace: &ChangeTrace, drift: DriftConfig, warmup: usize) -> Result<PolicyComparison> {
    drift.validate()?;
    let adaptive = simulate_policy(trace, drift, RebuildPolicy::Adaptive(drift), warmup)?;
    let mut tuned = None;
    for interval in 1..=trace.batches.len().max(1) as u64 {
        let outcome = simulate_policy(trace, drift, RebuildPolicy::Fixed { interval }, warmup)?;
        if outcome.worst_drift <= adaptive.worst_drift {
            tuned = Some((interval, outcome));
        }
    }
    Ok(PolicyComparison {
        batches: trace.batches.len(),
        warmup,
        adaptive,
        tuned_interval: tuned.map(|t| t.0),
        fixed: tuned.map(|t| t.1),
    })
}
