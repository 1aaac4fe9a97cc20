use crate::graph::NodeId;

/// Per-node memory state and last-interaction time. Rows for ids never
/// touched read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMemoryTable {
    d_s: usize,
    states: Vec<f64>,
    last: Vec<f64>,
    zero: Vec<f64>,
}

impl NodeMemoryTable {
    pub fn new(d_s: usize) -> Self {
        Self {
            d_s,
            states: Vec::new(),
            last: Vec::new(),
            zero: vec![0.0; d_s],
        }
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn num_nodes(&self) -> usize {
        self.last.len()
    }

    pub fn ensure_nodes(&mut self, n: usize) {
        if self.last.len() < n {
            self.last.resize(n, 0.0);
            self.states.resize(n * self.d_s, 0.0);
        }
    }

    pub fn state(&self, v: NodeId) -> &[f64] {
        if v < self.last.len() {
            &self.states[v * self.d_s..(v + 1) * self.d_s]
        } else {
            &self.zero
        }
    }

    /// Row-major states, `num_nodes() × d_s`.
    pub fn as_slice(&self) -> &[f64] {
        &self.states
    }

    pub fn last_interaction(&self, v: NodeId) -> f64 {
        self.last.get(v).copied().unwrap_or(0.0)
    }

    pub fn set_state(&mut self, v: NodeId, s: &[f64]) {
        self.ensure_nodes(v + 1);
        self.states[v * self.d_s..(v + 1) * self.d_s].copy_from_slice(s);
    }

    pub fn set_last_interaction(&mut self, v: NodeId, t: f64) {
        self.ensure_nodes(v + 1);
        self.last[v] = t;
    }

    /// Rows whose state or last-interaction differ from `other`.
    pub fn changed_rows(&self, other: &NodeMemoryTable) -> Vec<NodeId> {
        let n = self.num_nodes().max(other.num_nodes());
        (0..n)
            .filter(|&v| self.state(v) != other.state(v) || self.last_interaction(v) != other.last_interaction(v))
            .collect()
    }
}
