//! Experiment harness for the spatial SIR model: configuration, output
//! formats, run manifests, the bounded-Lipschitz distance and one pipeline per
//! command-line mode.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod fortet;
pub mod manifest;
pub mod netflow;
pub mod pipelines;

pub use config::{ExperimentConfig, Mode};
pub use error::{HarnessError, Result};
