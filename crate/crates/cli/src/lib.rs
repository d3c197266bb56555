//! Experiment runner behind the `convrate` binary: configuration parsing,
//! solver orchestration, trace files and JSON summaries.

pub mod commands;
pub mod config;
pub mod error;
pub mod runner;
pub mod spec;
pub mod summary;
pub mod trace_io;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
