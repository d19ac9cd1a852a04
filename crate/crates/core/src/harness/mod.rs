//! Replicated experiments: configuration, execution and output files.

mod config;
mod experiment;
mod output;

pub use config::*;
pub use experiment::*;
pub use output::*;
