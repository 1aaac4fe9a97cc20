//! Edge-stream files and synthetic stream generation.

mod edges;
mod generate;

pub use edges::{format_edges, parse_edges, EDGES_HEADER};
pub use generate::{epoch_counts, generate_stream, Attachment, GenConfig};
