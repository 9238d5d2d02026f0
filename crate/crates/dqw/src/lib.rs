//! Experiment runner for driven bosonic quantum walks: configuration files,
//! graph files, CSV/JSON export and the `dqw` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod graph_io;
pub mod runner;

pub use config::{Experiment, ExperimentConfig};
pub use error::{AppError, AppResult};
pub use runner::{run_experiment, RunOptions};
