//! Run configuration and its `key=value` text form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::drift::{DriftConfig, RebuildPolicy};
use crate::error::{Error, Result};
use crate::incremental::{EngineConfig, Mode};
use crate::model::{Aggregator, ModelDims, Sampling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub batch_size: usize,
    pub fanout: usize,
    pub window: Option<f64>,
    pub dims: ModelDims,
    pub mode: Mode,
    pub aggregator: Aggregator,
    pub policy: RebuildPolicy,
    pub drift: DriftConfig,
    pub seed: u64,
    pub queue_capacity: usize,
    pub input: Option<String>,
    pub report: Option<String>,
    /// Sort out-of-order input rows by timestamp instead of rejecting them.
    pub sort: bool,
    /// Compare against the oracle every this many batches.
    pub check_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            batch_size: 600,
            fanout: 10,
            window: None,
            dims: ModelDims::default(),
            mode: Mode::Exact,
            aggregator: Aggregator::Mean,
            policy: RebuildPolicy::default(),
            drift: DriftConfig::default(),
            seed: 0,
            queue_capacity: 4096,
            input: None,
            report: None,
            sort: false,
            check_every: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for {key}"))),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 25] = [
        "batch_size",
        "fanout",
        "window",
        "layers",
        "d_s",
        "d_e",
        "d_t",
        "d_x",
        "d_m",
        "d_k",
        "heads",
        "d",
        "mode",
        "aggregator",
        "policy",
        "gamma",
        "delta_max",
        "alpha",
        "seed",
        "queue_capacity",
        "input",
        "report",
        "sort",
        "check_every",
        "rebuild_interval",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "batch_size" | "B" => self.batch_size = parse(key, value)?,
            "fanout" | "L" => self.fanout = parse(key, value)?,
            "window" => {
                self.window = match value {
                    "none" => None,
                    _ => Some(parse(key, value)?),
                }
            }
            "layers" | "K" => self.dims.layers = parse(key, value)?,
            "d_s" => self.dims.d_s = parse(key, value)?,
            "d_e" => self.dims.d_e = parse(key, value)?,
            "d_t" => self.dims.d_t = parse(key, value)?,
            "d_x" => self.dims.d_x = parse(key, value)?,
            "d_m" => self.dims.d_m = parse(key, value)?,
            "d_k" => self.dims.d_k = parse(key, value)?,
            "heads" | "H" => self.dims.heads = parse(key, value)?,
            "d" => self.dims.d = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "aggregator" => self.aggregator = value.parse()?,
            "policy" => self.policy = value.parse()?,
            "rebuild_interval" => self.policy = format!("fixed:{value}").parse()?,
            "gamma" => self.drift.gamma = parse(key, value)?,
            "delta_max" => self.drift.delta_max = parse(key, value)?,
            "alpha" => self.drift.alpha = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "queue_capacity" => self.queue_capacity = parse(key, value)?,
            "input" => self.input = Some(value.to_string()),
            "report" => self.report = Some(value.to_string()),
            "sort" => self.sort = parse_bool(key, value)?,
            "check_every" => self.check_every = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` tokens separated by whitespace or newlines; `#`
    /// starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, found `{token}`")))?;
                self.set(key, value).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let d = &self.dims;
        let mut out = String::new();
        let window = self.window.map_or("none".to_string(), |w| w.to_string());
        let _ = writeln!(
            out,
            "batch_size={} fanout={} window={} layers={}",
            self.batch_size, self.fanout, window, d.layers
        );
        let _ = writeln!(
            out,
            "d_s={} d_e={} d_t={} d_x={} d_m={} d_k={} heads={} d={}",
            d.d_s, d.d_e, d.d_t, d.d_x, d.d_m, d.d_k, d.heads, d.d
        );
        let _ = writeln!(
            out,
            "mode={} aggregator={} policy={} gamma={} delta_max={} alpha={}",
            self.mode, self.aggregator, self.policy, self.drift.gamma, self.drift.delta_max, self.drift.alpha
        );
        let _ = writeln!(
            out,
            "seed={} queue_capacity={} sort={} check_every={}",
            self.seed, self.queue_capacity, self.sort, self.check_every
        );
        if let Some(p) = &self.input {
            let _ = writeln!(out, "input={p}");
        }
        if let Some(p) = &self.report {
            let _ = writeln!(out, "report={p}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.check_every == 0 {
            return Err(Error::Config("check_every must be at least 1".into()));
        }
        self.dims.validate()?;
        self.drift.validate()?;
        self.engine_config().validate()
    }

    pub fn sampling(&self) -> Sampling {
        Sampling::new(self.fanout).with_window(self.window)
    }

    pub fn engine_config(&self) -> EngineConfig {
        let policy = match self.policy {
            RebuildPolicy::Adaptive(_) => RebuildPolicy::Adaptive(self.drift),
            other => other,
        };
        EngineConfig {
            sampling: self.sampling(),
            aggregator: self.aggregator,
            mode: self.mode,
            policy,
            queue_capacity: self.queue_capacity,
            audit_delta: false,
        }
    }
}
