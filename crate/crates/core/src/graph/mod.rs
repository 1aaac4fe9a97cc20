//! Edge stream staging and the persistent temporal adjacency list.

mod adjacency;
mod edge;
mod queue;

pub use adjacency::{NeighborEntry, TemporalAdjacency};
pub use edge::{EdgeId, NodeId, TemporalEdge};
pub use queue::EdgeQueue;
