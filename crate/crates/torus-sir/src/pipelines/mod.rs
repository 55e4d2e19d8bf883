//! One pipeline per mode. Each reads a validated [`ExperimentConfig`], writes
//! its files into an [`OutputDir`] and returns a JSON summary.
//!
//! Replicates run sequentially in index order; replicate `r` of population
//! size `N` draws from its own seeded stream, so results do not depend on
//! scheduling.

pub mod clt;
pub mod diag;
pub mod lln;
pub mod pde;
pub mod qv;
pub mod simulate;

use serde::{Deserialize, Serialize};
use torus_sir_core::math::replicate_seed;

use crate::config::{ExperimentConfig, Mode};
use crate::error::Result;
use crate::formats::OutputDir;

/// Command-line options that change outputs; recorded in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Overrides `replicates` from the config.
    #[serde(default)]
    pub replicates: Option<usize>,
    /// Omit positions from snapshot files.
    #[serde(default)]
    pub no_positions: bool,
    /// Also export PDE fields as CSV.
    #[serde(default)]
    pub field_csv: bool,
    /// Sobolev indices for the basis-sum diagnostic.
    #[serde(default)]
    pub s_values: Vec<f64>,
    #[serde(default)]
    pub cutoffs: Vec<u32>,
}

impl RunOptions {
    pub fn replicates(&self, config: &ExperimentConfig) -> usize {
        self.replicates.unwrap_or(config.replicates)
    }
}

/// Seed of replicate `r` at population size `n`.
pub fn run_seed(base: u64, n: usize, r: usize) -> u64 {
    replicate_seed(replicate_seed(base, n as u64), r as u64)
}

pub fn execute(mode: Mode, config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    config.validate(mode)?;
    if options.replicates == Some(0) {
        return Err(crate::error::HarnessError::Config("`--replicates` must be at least 1".into()));
    }
    match mode {
        Mode::Simulate => simulate::run(config, options, out),
        Mode::Pde => pde::run(config, options, out),
        Mode::LlnCompare => lln::run(config, options, out),
        Mode::CltInitial => clt::run_initial(config, options, out),
        Mode::CltDynamic => clt::run_dynamic(config, options, out),
        Mode::QvCheck => qv::run(config, options, out),
        Mode::SpectralDiag => diag::run(config, options, out),
    }
}

/// The limit system, with the frozen-agent solver when `gamma = 0`.
pub fn solve_limit(config: &torus_sir_core::limit_pde::PdeConfig) -> Result<torus_sir_core::limit_pde::PdeSolution> {
    use torus_sir_core::limit_pde::{solve, solve_gamma_zero};
    Ok(if config.gamma == 0.0 { solve_gamma_zero(config)? } else { solve(config)? })
}
