use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every width of the model.
///
/// Attention layer 0 reads node memory concatenated with static node
/// features (`d_s + d_x`); deeper layers read the previous layer's embedding
/// (`d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_s: usize,
    pub d_e: usize,
    pub d_t: usize,
    pub d_x: usize,
    pub d_m: usize,
    pub d_k: usize,
    pub heads: usize,
    pub d: usize,
    pub layers: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            d_s: 8,
            d_e: 4,
            d_t: 4,
            d_x: 0,
            d_m: 8,
            d_k: 4,
            heads: 2,
            d: 8,
            layers: 1,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_s", self.d_s),
            ("d_t", self.d_t),
            ("d_m", self.d_m),
            ("d_k", self.d_k),
            ("heads", self.heads),
            ("d", self.d),
            ("layers", self.layers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.d_t % 2 != 0 {
            return Err(Error::Config(format!("d_t must be even, got {}", self.d_t)));
        }
        Ok(())
    }

    /// Width of `[s_self ‖ s_other ‖ e ‖ φ(Δt)]`.
    pub fn message_input(&self) -> usize {
        2 * self.d_s + self.d_e + self.d_t
    }

    /// Width of the node representation consumed by attention layer `layer`.
    pub fn repr_width(&self, layer: usize) -> usize {
        if layer == 0 {
            self.d_s + self.d_x
        } else {
            self.d
        }
    }

    pub fn query_width(&self, layer: usize) -> usize {
        self.repr_width(layer) + self.d_t
    }

    pub fn kv_width(&self, layer: usize) -> usize {
        self.repr_width(layer) + self.d_e + self.d_t
    }

    pub fn frequencies(&self) -> usize {
        self.d_t / 2
    }
}
