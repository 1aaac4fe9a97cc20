//! JSON bodies exchanged between `streamtgn-server` and its clients.
//!
//! Edge streams and parameter files travel in their canonical text forms so
//! that timestamps and weights survive the trip bit for bit.

use serde::{Deserialize, Serialize};

use streamtgn_core::batcher::StalenessReport;
use streamtgn_core::config::RunConfig;
use streamtgn_core::graph::{NodeId, TemporalEdge};
use streamtgn_core::incremental::{BatchCounters, EngineTotals};
use streamtgn_core::io::GenConfig;
use streamtgn_core::model::ModelDims;
use streamtgn_core::run::{BenchReport, PolicyComparison, SweepAxis, SweepPoint, VerifyReport};
use streamtgn_core::speedup::SpeedupRow;

pub const API_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub sessions: usize,
}

/// Error body for every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: ErrorKind,
    /// 1-based line in the offending input file, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Input,
    NotFound,
    QueueFull,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenResponse {
    pub edges: usize,
    /// Edge file text.
    pub text: String,
}

/// Stream plus run settings shared by verify, bench and policy requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub config: RunConfig,
    /// Edge file text.
    pub edges: String,
    /// Parameter file text; parameters are drawn from `config.seed` when absent.
    #[serde(default)]
    pub params: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRequest {
    #[serde(flatten)]
    pub run: RunRequest,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchResponse {
    Run(BenchReport),
    Sweep { points: Vec<SweepPoint> },
}

pub type VerifyResponse = VerifyReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessRequest {
    #[serde(flatten)]
    pub run: RunRequest,
    pub batch_sizes: Vec<usize>,
}

pub type StalenessResponse = StalenessReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRequest {
    #[serde(flatten)]
    pub run: RunRequest,
    /// Leading batches excluded from the worst-drift comparison.
    #[serde(default)]
    pub warmup: usize,
}

pub type PolicyResponse = PolicyComparison;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeedupQuery {
    pub n: u64,
    pub b: u64,
    pub l: u64,
    pub k: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRequest {
    /// Extra rows printed after the reference rows.
    #[serde(default)]
    pub rows: Vec<SpeedupQuery>,
    /// Skip the reference rows.
    #[serde(default)]
    pub only_user_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupResponse {
    pub rows: Vec<SpeedupRow>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsInitRequest {
    pub seed: u64,
    pub dims: ModelDims,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsText {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsSummary {
    pub dims: ModelDims,
    pub tensors: usize,
    pub scalars: usize,
    /// Canonical re-serialization of the input.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub config: RunConfig,
    #[serde(default)]
    pub params: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: u64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeList {
    pub edges: Vec<TemporalEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enqueued {
    pub accepted: usize,
    /// Edges turned away because the queue was full.
    pub rejected: usize,
    pub queued: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub predictions: Vec<f64>,
    pub counters: BatchCounters,
    pub queued: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub node: NodeId,
    pub values: Vec<f64>,
    pub memory: Vec<f64>,
    pub last_interaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub id: u64,
    pub config: RunConfig,
    pub nodes: usize,
    pub batches: u64,
    pub queued: usize,
    pub global_drift: f64,
    pub totals: EngineTotals,
}

pub type GenRequest = GenConfig;
