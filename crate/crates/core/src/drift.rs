//! Decayed per-node change accumulators and the rebuild policies they drive.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub gamma: f64,
    pub delta_max: f64,
    pub alpha: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            delta_max: 0.5,
            alpha: 0.1,
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.delta_max > 0.0) {
            return Err(Error::Config(format!(
                "delta_max must be positive, got {}",
                self.delta_max
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    /// `δ_max / (1 - γ)`, the factor in front of the value magnitude in the
    /// worst-case drift.
    pub fn drift_factor(&self) -> f64 {
        self.delta_max / (1.0 - self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RebuildDecision {
    None,
    Partial(Vec<NodeId>),
    Full,
}

impl RebuildDecision {
    pub fn kind(&self) -> &'static str {
        match self {
            RebuildDecision::None => "none",
            RebuildDecision::Partial(_) => "partial",
            RebuildDecision::Full => "full",
        }
    }

    pub fn is_rebuild(&self) -> bool {
        !matches!(self, RebuildDecision::None)
    }
}

/// When to rebuild.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RebuildPolicy {
    Adaptive(DriftConfig),
    /// Full rebuild every `interval` batches.
    Fixed {
        interval: u64,
    },
    Never,
}

impl Default for RebuildPolicy {
    fn default() -> Self {
        RebuildPolicy::Adaptive(DriftConfig::default())
    }
}

impl fmt::Display for RebuildPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RebuildPolicy::Adaptive(_) => f.write_str("adaptive"),
            RebuildPolicy::Fixed { interval } => write!(f, "fixed:{interval}"),
            RebuildPolicy::Never => f.write_str("never"),
        }
    }
}

impl FromStr for RebuildPolicy {
    type Err = Error;

    /// `adaptive`, `never`, `fixed:<R>` or `fixed:never`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(RebuildPolicy::Adaptive(DriftConfig::default())),
            "never" | "fixed:never" => Ok(RebuildPolicy::Never),
            _ => {
                let r = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| Error::Config(format!("unknown rebuild policy `{s}`")))?;
                let interval: u64 = r
                    .parse()
                    .map_err(|_| Error::Config(format!("bad rebuild interval `{r}`")))?;
                if interval == 0 {
                    return Err(Error::Config("rebuild interval must be at least 1".into()));
                }
                Ok(RebuildPolicy::Fixed { interval })
            }
        }
    }
}

/// Full iff `batch_index` is a positive multiple of `interval`.
pub fn fixed_schedule_decide(batch_index: u64, interval: Option<u64>) -> RebuildDecision {
    match interval {
        Some(r) if r > 0 && batch_index > 0 && batch_index % r == 0 => RebuildDecision::Full,
        _ => RebuildDecision::None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Accumulator {
    value: f64,
    /// `tau` at which `value` was last written.
    at: u64,
}

/// Per-node accumulators `δ̂_v ← γ·δ̂_v + |ΔN_v|/|N_v|`, decayed lazily: a
/// node's stored value is scaled by `γ^(τ - at)` when read or touched, so a
/// batch costs time proportional to the nodes it reports.
#[derive(Debug, Clone)]
pub struct DriftState {
    config: DriftConfig,
    acc: HashMap<NodeId, Accumulator>,
    tau: u64,
    /// Sum of the decayed accumulators over every node touched since the
    /// last reset.
    sum: f64,
}

impl DriftState {
    pub fn new(config: DriftConfig) -> Self {
        Self {
            config,
            acc: HashMap::new(),
            tau: 0,
            sum: 0.0,
        }
    }

    pub fn config(&self) -> &DriftConfig {
        &self.config
    }

    /// Batches since the last rebuild.
    pub fn tau(&self) -> u64 {
        self.tau
    }

    /// Nodes touched since the last rebuild.
    pub fn tracked(&self) -> usize {
        self.acc.len()
    }

    pub fn estimate(&self, v: NodeId) -> f64 {
        self.acc.get(&v).map_or(0.0, |a| self.decayed(a))
    }

    fn decayed(&self, a: &Accumulator) -> f64 {
        a.value * self.config.gamma.powi((self.tau - a.at) as i32)
    }

    /// Advances one batch and folds in each reported `(|ΔN_v|, |N_v|)`.
    pub fn record_batch_changes(&mut self, changes: &[(NodeId, usize, usize)]) -> Result<()> {
        if let Some(&(v, _, _)) = changes.iter().find(|c| c.2 == 0) {
            return Err(Error::Contract(format!("node {v} reported an empty neighborhood")));
        }
        self.tau += 1;
        self.sum *= self.config.gamma;
        let tau = self.tau;
        for &(v, delta, size) in changes {
            let ratio = delta as f64 / size as f64;
            let previous = self.acc.get(&v).map_or(0.0, |a| self.decayed(a));
            self.acc.insert(
                v,
                Accumulator {
                    value: previous + ratio,
                    at: tau,
                },
            );
            self.sum += ratio;
        }
        Ok(())
    }

    /// Mean accumulator over the nodes touched since the last rebuild.
    pub fn global_drift(&self) -> f64 {
        if self.acc.is_empty() {
            0.0
        } else {
            (self.sum / self.acc.len() as f64).max(0.0)
        }
    }

    pub fn decide_rebuild(&self, n: usize) -> RebuildDecision {
        if self.global_drift() <= self.config.delta_max {
            return RebuildDecision::None;
        }
        let mut drifted: Vec<NodeId> = self
            .acc
            .iter()
            .filter(|(_, a)| self.decayed(a) > self.config.delta_max)
            .map(|(&v, _)| v)
            .collect();
        drifted.sort_unstable();
        if (drifted.len() as f64) < self.config.alpha * n as f64 {
            RebuildDecision::Partial(drifted)
        } else {
            RebuildDecision::Full
        }
    }

    /// Zeroes every accumulator and `τ`.
    pub fn reset(&mut self) {
        self.acc.clear();
        self.tau = 0;
        self.sum = 0.0;
    }

    pub fn max_estimate(&self) -> f64 {
        self.acc.values().map(|a| self.decayed(a)).fold(0.0, f64::max)
    }
}
