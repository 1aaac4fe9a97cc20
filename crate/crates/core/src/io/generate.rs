use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attachment {
    #[default]
    Uniform,
    /// Endpoints drawn with probability proportional to degree + 1.
    Preferential,
}

impl fmt::Display for Attachment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attachment::Uniform => "uniform",
            Attachment::Preferential => "preferential",
        })
    }
}

impl FromStr for Attachment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Attachment::Uniform),
            "preferential" => Ok(Attachment::Preferential),
            _ => Err(Error::Config(format!("unknown attachment `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub d_e: usize,
    pub attachment: Attachment,
    /// Edge-rate ratio between high and low epochs; 1 disables bursts.
    pub burstiness: f64,
    pub epochs: usize,
    pub epoch_length: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 1000,
            m: 10_000,
            d_e: 4,
            attachment: Attachment::Uniform,
            burstiness: 1.0,
            epochs: 10,
            epoch_length: 1000.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        if !(self.burstiness >= 1.0) || !self.burstiness.is_finite() {
            return Err(Error::Config(format!(
                "burstiness must be >= 1, got {}",
                self.burstiness
            )));
        }
        if self.epochs == 0 || !(self.epoch_length > 0.0) {
            return Err(Error::Config("epochs and epoch length must be positive".into()));
        }
        Ok(())
    }

    /// Edges per epoch. Even epochs run at the low rate, odd ones at
    /// `burstiness` times it; counts are rounded so they sum to `m`.
    pub fn epoch_sizes(&self) -> Vec<usize> {
        let weights: Vec<f64> = (0..self.epochs)
            .map(|i| if i % 2 == 1 { self.burstiness } else { 1.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut sizes = Vec::with_capacity(self.epochs);
        let mut acc = 0.0;
        let mut placed = 0usize;
        for w in weights {
            acc += w;
            let upto = ((acc / total) * self.m as f64).round() as usize;
            sizes.push(upto.min(self.m) - placed);
            placed = upto.min(self.m);
        }
        if let Some(last) = sizes.last_mut() {
            *last += self.m - placed;
        }
        sizes
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

struct Endpoints {
    attachment: Attachment,
    n: usize,
    pool: Vec<NodeId>,
}

impl Endpoints {
    fn new(attachment: Attachment, n: usize) -> Self {
        let pool = match attachment {
            Attachment::Uniform => Vec::new(),
            Attachment::Preferential => (0..n).collect(),
        };
        Self { attachment, n, pool }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> NodeId {
        match self.attachment {
            Attachment::Uniform => rng.gen_range(0..self.n),
            Attachment::Preferential => self.pool[rng.gen_range(0..self.pool.len())],
        }
    }

    fn record(&mut self, a: NodeId, b: NodeId) {
        if self.attachment == Attachment::Preferential {
            self.pool.push(a);
            self.pool.push(b);
        }
    }
}

/// Deterministic synthetic stream: `m` edges without self-loops, timestamps
/// non-decreasing (six decimals, floored), features in [-1, 1] with six decimals.
pub fn generate_stream(cfg: &GenConfig) -> Result<Vec<TemporalEdge>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut endpoints = Endpoints::new(cfg.attachment, cfg.n);
    let mut edges = Vec::with_capacity(cfg.m);
    for (epoch, count) in cfg.epoch_sizes().into_iter().enumerate() {
        let start = epoch as f64 * cfg.epoch_length;
        let mut times: Vec<f64> = (0..count)
            .map(|_| ((start + rng.gen::<f64>() * cfg.epoch_length) * 1e6).floor() / 1e6)
            .collect();
        times.sort_by(f64::total_cmp);
        for t in times {
            let src = endpoints.draw(&mut rng);
            let mut dst = endpoints.draw(&mut rng);
            while dst == src {
                dst = endpoints.draw(&mut rng);
            }
            endpoints.record(src, dst);
            let feat = (0..cfg.d_e).map(|_| round6(rng.gen_range(-1.0..=1.0))).collect();
            edges.push(TemporalEdge::new(src, dst, t, feat));
        }
    }
    Ok(edges)
}

/// Number of edges whose timestamp falls in each epoch.
pub fn epoch_counts(edges: &[TemporalEdge], epoch_length: f64, epochs: usize) -> Vec<usize> {
    let mut counts = vec![0; epochs];
    for e in edges {
        let i = ((e.t / epoch_length) as usize).min(epochs.saturating_sub(1));
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{format_edges, parse_edges};

    #[test]
    fn deterministic_and_round_trips() {
        let cfg = GenConfig {
            seed: 5,
            n: 50,
            m: 500,
            attachment: Attachment::Preferential,
            ..GenConfig::default()
        };
        let a = format_edges(&generate_stream(&cfg).unwrap(), cfg.d_e);
        let b = format_edges(&generate_stream(&cfg).unwrap(), cfg.d_e);
        assert_eq!(a, b);
        let (d_e, parsed) = parse_edges(&a, false).unwrap();
        assert_eq!(format_edges(&parsed, d_e), a);
    }

    #[test]
    fn two_nodes_forces_endpoints() {
        let cfg = GenConfig {
            n: 2,
            m: 5,
            ..GenConfig::default()
        };
        for e in generate_stream(&cfg).unwrap() {
            assert!((e.src, e.dst) == (0, 1) || (e.src, e.dst) == (1, 0));
        }
    }

    #[test]
    fn bursty_epochs_have_rate_ratio() {
        let cfg = GenConfig {
            m: 4000,
            burstiness: 3.0,
            ..GenConfig::default()
        };
        let edges = generate_stream(&cfg).unwrap();
        assert!(edges.windows(2).all(|w| w[0].t <= w[1].t));
        let counts = epoch_counts(&edges, cfg.epoch_length, cfg.epochs);
        assert_eq!(counts, cfg.epoch_sizes());
        assert_eq!(counts.iter().sum::<usize>(), 4000);
        let uneven = GenConfig { m: 1001, ..cfg };
        for (i, &c) in uneven.epoch_sizes().iter().enumerate() {
            let target = 1001.0 * if i % 2 == 1 { 3.0 } else { 1.0 } / 20.0;
            assert!((c as f64 - target).abs() <= 1.0, "epoch {i}: {c}");
        }
        assert_eq!(counts[..2], [200, 600]);
    }

    #[test]
    fn features_and_loops() {
        let edges = generate_stream(&GenConfig::default()).unwrap();
        assert!(edges.iter().all(|e| !e.is_self_loop()));
        assert!(edges
            .iter()
            .flat_map(|e| &e.feat)
            .all(|&x| (-1.0..=1.0).contains(&x) && round6(x) == x));
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            GenConfig {
                n: 1,
                ..GenConfig::default()
            },
            GenConfig {
                m: 0,
                ..GenConfig::default()
            },
            GenConfig {
                burstiness: 0.5,
                ..GenConfig::default()
            },
        ] {
            assert!(generate_stream(&cfg).is_err());
        }
    }
}
