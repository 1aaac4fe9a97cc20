//! Model tensors, the numeric kernels and the embedding recursion built on them.

mod commit;
mod dims;
pub mod embedding;
pub mod kernels;
pub mod linalg;
mod memory;
mod params;

pub use commit::{commit_batch, CommitOutcome};
pub use dims::ModelDims;
pub use embedding::{LayerTable, RecursiveEmbedder, Sampling};
pub use kernels::{Aggregator, AttentionOutput, HeadRecord, Side};
pub use linalg::Matrix;
pub use memory::NodeMemoryTable;
pub use params::{default_frequencies, AttentionParams, GruParams, ModelParameters, PARAMS_HEADER};
