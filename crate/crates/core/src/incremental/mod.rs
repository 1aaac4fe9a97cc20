//! Incremental embedding maintenance: affected-set detection, caches,
//! delta attention updates and the batch engine.

mod affected;
mod caches;
pub mod delta;
mod engine;
mod gather;

pub use affected::{detect_affected, direct_nodes, forward_closure, reverse_closure, AffectedSet, ChangeRecord};
pub use caches::{AttentionCache, EmbeddingCache, NeighborCache, ReverseIndex};
pub use delta::{delta_embed, delta_error_bound, DeltaChange, NeighborInput, NodeAttention};
pub use engine::{BatchCounters, EngineConfig, EngineTotals, IncrementalEngine, Mode, DELTA_BOUND_SLACK};
pub use gather::{gather_sorted, Gathered};
