//! Closed-form cost and speedup calculators.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub n: u64,
    pub b: u64,
    pub l: u64,
    pub k: u32,
    pub d: u64,
    pub d_m: u64,
    /// Mean temporal degree.
    pub mean_degree: f64,
    /// Kernel-to-batched per-operation cost ratio.
    pub r_overhead: f64,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.b == 0 || self.l == 0 || self.k == 0 || self.d == 0 || self.d_m == 0 {
            return Err(Error::Config("cost model sizes must be positive".into()));
        }
        if !(self.mean_degree > 0.0) || !(self.r_overhead > 0.0) {
            return Err(Error::Config("mean degree and overhead ratio must be positive".into()));
        }
        Ok(())
    }

    /// Per-batch cost of affected-set detection, `B·L^K`.
    pub fn detection_cost(&self) -> Result<u128> {
        detection_term(self.b, self.l, self.k)
    }
}

fn overflow() -> Error {
    Error::Config("operation count overflows".into())
}

fn detection_term(b: u64, l: u64, k: u32) -> Result<u128> {
    (l as u128)
        .checked_pow(k)
        .and_then(|p| p.checked_mul(b as u128))
        .ok_or_else(overflow)
}

fn pipeline_cost(nodes: u128, m: &CostModel) -> Result<u128> {
    let (l, k, d, d_m) = (m.l as u128, m.k as u128, m.d as u128, m.d_m as u128);
    let attention = nodes
        .checked_mul(l * k)
        .and_then(|x| x.checked_mul(d * d))
        .ok_or_else(overflow)?;
    let memory = nodes.checked_mul(d_m * d_m).ok_or_else(overflow)?;
    attention.checked_add(memory).ok_or_else(overflow)
}

/// `n·L·K·d² + n·d_m²`.
pub fn full_cost(m: &CostModel) -> Result<u128> {
    m.validate()?;
    pipeline_cost(m.n as u128, m)
}

/// `|A|·L·K·d² + |A|·d_m² + B·L^K`.
pub fn incremental_cost(m: &CostModel, affected: u64) -> Result<u128> {
    m.validate()?;
    if affected > m.n {
        return Err(Error::Config(format!("affected size {affected} exceeds n = {}", m.n)));
    }
    pipeline_cost(affected as u128, m)?
        .checked_add(m.detection_cost()?)
        .ok_or_else(overflow)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub n: u64,
    pub b: u64,
    pub l: u64,
    pub k: u32,
    /// Affected-set bound `2B·L^K`.
    pub bound: u128,
    /// `n / bound`.
    pub speedup: f64,
}

impl SpeedupRow {
    /// The speedup when `bound` divides `n`.
    pub fn exact_speedup(&self) -> Option<u128> {
        (self.n as u128 % self.bound == 0).then(|| self.n as u128 / self.bound)
    }
}

pub fn theoretical_speedup(n: u64, b: u64, l: u64, k: u32) -> Result<SpeedupRow> {
    if n == 0 || b == 0 || l == 0 {
        return Err(Error::Config("n, B and L must be positive".into()));
    }
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let bound = detection_term(b, l, k)?.checked_mul(2).ok_or_else(overflow)?;
    Ok(SpeedupRow {
        n,
        b,
        l,
        k,
        bound,
        speedup: n as f64 / bound as f64,
    })
}

/// The four standard parameter regimes `(n, B, L, K)`.
pub const REFERENCE_ROWS: [(u64, u64, u64, u32); 4] = [
    (1_000_000, 200, 10, 1),
    (1_000_000, 200, 10, 2),
    (1_000_000, 200, 20, 1),
    (10_000_000, 200, 10, 1),
];

pub fn reference_table() -> Vec<SpeedupRow> {
    REFERENCE_ROWS
        .iter()
        .map(|&(n, b, l, k)| theoretical_speedup(n, b, l, k).expect("reference rows are valid"))
        .collect()
}

pub fn format_table(rows: &[SpeedupRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let speedup = match r.exact_speedup() {
            Some(s) => s.to_string(),
            None => format!("{}", r.speedup),
        };
        let _ = writeln!(
            out,
            "speedup n={} B={} L={} K={} bound={} speedup={}",
            r.n, r.b, r.l, r.k, r.bound, speedup
        );
    }
    out
}

/// Largest affected ratio at which incremental work still beats a full
/// recompute.
pub fn optimality_threshold(m: &CostModel) -> Result<f64> {
    m.validate()?;
    let c_detect = m.detection_cost()? as f64;
    let work = m.n as f64 * m.mean_degree * m.k as f64 * (m.d * m.d) as f64;
    Ok(1.0 / m.r_overhead - c_detect / (work * m.r_overhead))
}

/// `|E_aff|·K·d`.
pub fn lower_bound_ops(affected_edges: u64, k: u32, d: u64) -> u128 {
    affected_edges as u128 * k as u128 * d as u128
}

/// `n / recomputed`, the ratio of full to incremental pipeline counts.
pub fn counter_speedup(n: usize, recomputed: usize) -> f64 {
    n as f64 / recomputed as f64
}
