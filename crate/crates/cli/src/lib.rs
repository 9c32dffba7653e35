//! Dataset files, checkpoints, configuration and the training harness built on
//! `elasticzo-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod idx;
pub mod metrics;
pub mod model;
pub mod shapefile;
pub mod train;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use model::Model;
