pub mod batcher;
pub mod config;
pub mod drift;
pub mod error;
pub mod graph;
pub mod incremental;
pub mod io;
pub mod model;
pub mod oracle;
pub mod run;
pub mod speedup;

pub use error::{Error, Result};
