use std::collections::BTreeMap;

use crate::error::Result;
use crate::graph::{EdgeId, NodeId, TemporalAdjacency, TemporalEdge};
use crate::model::kernels::{aggregate_messages, compute_message, gru_update, Aggregator, Side};
use crate::model::{ModelParameters, NodeMemoryTable};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommitOutcome {
    /// Endpoints of the batch, ascending.
    pub direct: Vec<NodeId>,
    pub edge_ids: Vec<EdgeId>,
    pub gru_steps: usize,
    pub messages: usize,
}

/// Applies a batch to memory and adjacency as one atomic transition.
///
/// Every message is computed from pre-batch memory and last-interaction
/// times, each node's messages are aggregated and applied with a single GRU
/// step, and only then are the edges appended to the store. Nothing is
/// mutated if any edge is rejected.
pub fn commit_batch(
    edges: &[TemporalEdge],
    store: &mut TemporalAdjacency,
    memory: &mut NodeMemoryTable,
    params: &ModelParameters,
    aggregator: Aggregator,
) -> Result<CommitOutcome> {
    store.check_batch(edges)?;
    let mut inbox: BTreeMap<NodeId, Vec<(Vec<f64>, f64)>> = BTreeMap::new();
    for e in edges {
        let (s_src, s_dst) = (memory.state(e.src), memory.state(e.dst));
        let to_src = compute_message(
            s_src,
            s_dst,
            &e.feat,
            e.t - memory.last_interaction(e.src),
            Side::Source,
            params,
        )?;
        let to_dst = compute_message(
            s_dst,
            s_src,
            &e.feat,
            e.t - memory.last_interaction(e.dst),
            Side::Destination,
            params,
        )?;
        inbox.entry(e.src).or_default().push((to_src, e.t));
        inbox.entry(e.dst).or_default().push((to_dst, e.t));
    }
    let mut messages = 0;
    let mut updates = Vec::with_capacity(inbox.len());
    for (&v, msgs) in &inbox {
        messages += msgs.len();
        let m = aggregate_messages(msgs, aggregator)?;
        updates.push((v, gru_update(&m, memory.state(v), params)?));
    }
    let gru_steps = updates.len();
    for (v, s) in updates {
        memory.set_state(v, &s);
    }
    let mut edge_ids = Vec::with_capacity(edges.len());
    for e in edges {
        memory.set_last_interaction(e.src, e.t);
        memory.set_last_interaction(e.dst, e.t);
        edge_ids.push(store.insert_edge(e.clone())?);
    }
    memory.ensure_nodes(store.num_nodes());
    Ok(CommitOutcome {
        direct: inbox.into_keys().collect(),
        edge_ids,
        gru_steps,
        messages,
    })
}
