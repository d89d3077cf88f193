//! Command-line front end: configuration, dataset files, artifact output and
//! the `simulate`, `estimate`, `infer` and `experiment` subcommands.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod output;

pub use config::{Overrides, RunConfig};
pub use dataset::{parse_dataset, write_dataset, DatasetError, LabelledDataset};
pub use error::CliError;
pub use exec::RayonExecutor;
