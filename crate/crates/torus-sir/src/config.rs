//! Experiment configuration: one JSON document, unknown keys rejected.
//!
//! ```json
//! {
//!   "mode": "lln-compare",
//!   "model": {
//!     "beta": 1.0, "alpha": 0.5, "gamma": 0.05,
//!     "kernel": { "radius": 0.2, "exponent": 4 },
//!     "initial": { "region": { "shape": "rect", "x1": [0.0, 0.5], "x2": [0.0, 1.0] },
//!                  "p": 0.5, "density": { "kind": "uniform" } }
//!   },
//!   "simulation": { "n_agents": 1000, "horizon": 1.0, "snapshot_times": [0.5, 1.0] },
//!   "pde": { "n_grid": 128, "dt": 0.005 },
//!   "sweep": [200, 800, 3200],
//!   "replicates": 20,
//!   "seed": 20261018
//! }
//! ```
//!
//! Every physical quantity is in the units of the unit torus and unit time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use torus_sir_core::fluctuations::{Component, TestFunctions};
use torus_sir_core::limit_pde::PdeConfig;
use torus_sir_core::simulator::{Density, InitialCondition, SimConfig};
use torus_sir_core::spectral::TrigPolynomial;
use torus_sir_core::{BasisIndex, GridField, KernelSpec, Region};

use crate::error::{config_err, HarnessError, Result};
use crate::fortet::DEFAULT_RESOLUTION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Pde,
    LlnCompare,
    CltInitial,
    CltDynamic,
    QvCheck,
    SpectralDiag,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Pde => "pde",
            Mode::LlnCompare => "lln-compare",
            Mode::CltInitial => "clt-initial",
            Mode::CltDynamic => "clt-dynamic",
            Mode::QvCheck => "qv-check",
            Mode::SpectralDiag => "spectral-diag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform,
    Cosine { amplitude: f64, axis: usize },
    /// Node values of a grid density, first-coordinate major.
    Grid { n: usize, values: Vec<f64>, delta1: f64, delta2: f64 },
}

impl DensitySpec {
    fn build(&self) -> Result<Density> {
        Ok(match self {
            DensitySpec::Uniform => Density::Uniform,
            DensitySpec::Cosine { amplitude, axis } => Density::Cosine { amplitude: *amplitude, axis: *axis },
            DensitySpec::Grid { n, values, delta1, delta2 } => Density::Grid {
                field: GridField::new(*n, values.clone()).map_err(config_err)?,
                delta1: *delta1,
                delta2: *delta2,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub region: Region,
    pub p: f64,
    #[serde(default = "uniform")]
    pub density: DensitySpec,
}

fn uniform() -> DensitySpec {
    DensitySpec::Uniform
}

/// Parameters shared by the particle system and its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub initial: InitialSpec,
}

impl ModelSpec {
    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let initial =
            InitialCondition { region: self.initial.region, p: self.initial.p, density: self.initial.density.build()? };
        initial.validate().map_err(config_err)?;
        Ok(initial)
    }
}

/// One basis term `coeff * f^family_{n1,n2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub family: u8,
    pub n1: u32,
    pub n2: u32,
    #[serde(default = "unit")]
    pub coeff: f64,
}

fn unit() -> f64 {
    1.0
}

pub fn test_function(terms: &[Term]) -> Result<TrigPolynomial> {
    if terms.is_empty() {
        return Err(HarnessError::Config("a test function needs at least one term".into()));
    }
    let terms = terms
        .iter()
        .map(|t| {
            if !t.coeff.is_finite() {
                return Err(HarnessError::Config("test function coefficients must be finite".into()));
            }
            Ok((BasisIndex::new(t.family, t.n1, t.n2).map_err(config_err)?, t.coeff))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrigPolynomial { terms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub phi: Vec<Term>,
    #[serde(default = "default_sub_step")]
    pub sub_step: f64,
}

fn default_sub_step() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub n_agents: Option<usize>,
    pub horizon: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Test functions paired with every snapshot in the summary.
    #[serde(default)]
    pub pairings: Vec<Vec<Term>>,
    #[serde(default)]
    pub track: Option<TrackSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Defaults to the simulation horizon.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Defaults to the snapshot times.
    #[serde(default)]
    pub output_times: Option<Vec<f64>>,
}

fn default_n_grid() -> usize {
    128
}

fn default_dt() -> f64 {
    0.005
}

impl Default for PdeSpec {
    fn default() -> Self {
        Self { n_grid: default_n_grid(), dt: default_dt(), horizon: None, output_times: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub phi: Vec<Term>,
    pub psi: Vec<Term>,
    pub phi2: Vec<Term>,
}

impl TestFunctionSpec {
    pub fn build(&self) -> Result<TestFunctions> {
        Ok(TestFunctions { phi: test_function(&self.phi)?, psi: test_function(&self.psi)?, phi2: test_function(&self.phi2)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationSpec {
    /// Sobolev index of the negative norms.
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: u32,
    /// Grid of the linearized system; defaults to the PDE grid.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Test function of the dynamic comparison.
    #[serde(default)]
    pub psi: Option<Vec<Term>>,
    #[serde(default = "default_components")]
    pub components: Vec<Component>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Optional Monte Carlo paths of the Galerkin system.
    #[serde(default)]
    pub galerkin_paths: usize,
    /// Quadrature grid of the initial covariance functionals.
    #[serde(default = "default_quadrature")]
    pub quadrature_grid: usize,
}

fn default_s() -> f64 {
    1.5
}

fn default_cutoff() -> u32 {
    32
}

fn default_components() -> Vec<Component> {
    vec![Component::V]
}

fn default_bootstrap() -> usize {
    200
}

fn default_quadrature() -> usize {
    256
}

impl Default for FluctuationSpec {
    fn default() -> Self {
        Self {
            s: default_s(),
            cutoff: default_cutoff(),
            grid: None,
            psi: None,
            components: default_components(),
            bootstrap: default_bootstrap(),
            galerkin_paths: 0,
            quadrature_grid: default_quadrature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticSpec {
    #[serde(default = "default_s_values")]
    pub s_values: Vec<f64>,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<u32>,
    #[serde(default = "unit")]
    pub gamma: f64,
    #[serde(default)]
    pub point: [f64; 2],
}

fn default_s_values() -> Vec<f64> {
    vec![0.5, 0.9, 1.2, 1.5, 2.0, 2.5]
}

fn default_cutoffs() -> Vec<u32> {
    vec![64, 128, 256, 512, 1024]
}

impl Default for DiagnosticSpec {
    fn default() -> Self {
        Self { s_values: default_s_values(), cutoffs: default_cutoffs(), gamma: 1.0, point: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FortetSpec {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}

impl Default for FortetSpec {
    fn default() -> Self {
        Self { resolution: DEFAULT_RESOLUTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must agree with the subcommand when present.
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub pde: Option<PdeSpec>,
    /// Population sizes, strictly increasing.
    #[serde(default)]
    pub sweep: Vec<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Named tolerance overrides, reported alongside the pass flags.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub tests: Option<TestFunctionSpec>,
    #[serde(default)]
    pub fluctuation: Option<FluctuationSpec>,
    #[serde(default)]
    pub diagnostic: Option<DiagnosticSpec>,
    #[serde(default)]
    pub fortet: Option<FortetSpec>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model.as_ref().ok_or_else(|| HarnessError::Config("missing `model` section".into()))
    }

    pub fn simulation(&self) -> Result<&SimulationSpec> {
        self.simulation.as_ref().ok_or_else(|| HarnessError::Config("missing `simulation` section".into()))
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Checks the parts every mode relies on.
    pub fn validate(&self, mode: Mode) -> Result<()> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(HarnessError::Config(format!("config is for `{}`, not `{}`", m.name(), mode.name())));
            }
        }
        if self.replicates == 0 {
            return Err(HarnessError::Config("`replicates` must be at least 1".into()));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) || self.sweep.contains(&0) {
            return Err(HarnessError::Config("`sweep` must be strictly increasing and positive".into()));
        }
        if self.tolerances.values().any(|v| !v.is_finite()) {
            return Err(HarnessError::Config("tolerances must be finite".into()));
        }
        let needs_model = !matches!(mode, Mode::SpectralDiag);
        if needs_model {
            self.model()?;
        }
        match mode {
            Mode::Simulate | Mode::QvCheck => {
                self.sim_config(self.population()?, self.seed)?;
            }
            Mode::Pde => {
                self.pde_config()?;
            }
            Mode::LlnCompare | Mode::CltDynamic => {
                if self.sweep.is_empty() {
                    return Err(HarnessError::Config("`sweep` must list at least one population size".into()));
                }
                for &n in &self.sweep {
                    self.sim_config(n, self.seed)?;
                }
                self.pde_config()?;
            }
            Mode::CltInitial => {
                self.population()?;
                self.model()?.initial_condition()?;
                self.tests.as_ref().ok_or_else(|| HarnessError::Config("missing `tests` section".into()))?.build()?;
            }
            Mode::SpectralDiag => {}
        }
        if mode == Mode::QvCheck && self.simulation()?.track.is_none() {
            return Err(HarnessError::Config("qv-check needs `simulation.track`".into()));
        }
        if mode == Mode::CltDynamic {
            let f = self.fluctuation.clone().unwrap_or_default();
            test_function(f.psi.as_deref().ok_or_else(|| HarnessError::Config("clt-dynamic needs `fluctuation.psi`".into()))?)?;
            if f.components.is_empty() {
                return Err(HarnessError::Config("`fluctuation.components` must not be empty".into()));
            }
        }
        Ok(())
    }

    /// `simulation.n_agents`.
    pub fn population(&self) -> Result<usize> {
        self.simulation()?.n_agents.ok_or_else(|| HarnessError::Config("missing `simulation.n_agents`".into()))
    }

    pub fn sim_config(&self, n_agents: usize, seed: u64) -> Result<SimConfig> {
        let model = self.model()?;
        let sim = self.simulation()?;
        let config = SimConfig {
            n_agents,
            beta: model.beta,
            alpha: model.alpha,
            gamma: model.gamma,
            kernel: model.kernel,
            initial: model.initial_condition()?,
            horizon: sim.horizon,
            snapshot_times: sim.snapshot_times.clone(),
            seed,
        };
        config.validate().map_err(config_err)?;
        if let Some(track) = &sim.track {
            test_function(&track.phi)?;
            if !(track.sub_step > 0.0 && track.sub_step.is_finite()) {
                return Err(HarnessError::Config("`track.sub_step` must be positive".into()));
            }
        }
        for terms in &sim.pairings {
            test_function(terms)?;
        }
        Ok(config)
    }

    pub fn pde_config(&self) -> Result<PdeConfig> {
        let model = self.model()?;
        let spec = self.pde.clone().unwrap_or_default();
        let sim = self.simulation.as_ref();
        let horizon = spec
            .horizon
            .or(sim.map(|s| s.horizon))
            .ok_or_else(|| HarnessError::Config("`pde.horizon` is required without a simulation section".into()))?;
        let output_times = spec.output_times.clone().unwrap_or_else(|| match sim {
            Some(s) if !s.snapshot_times.is_empty() => s.snapshot_times.clone(),
            _ => vec![horizon],
        });
        let config = PdeConfig {
            n_grid: spec.n_grid,
            dt: spec.dt,
            horizon,
            beta: model.beta,
            alpha: model.alpha,
            gamma: model.gamma,
            kernel: model.kernel,
            initial: model.initial_condition()?,
            output_times,
        };
        config.validate().map_err(config_err)?;
        Ok(config)
    }

    pub fn fortet_resolution(&self) -> usize {
        self.fortet.as_ref().map_or(DEFAULT_RESOLUTION, |f| f.resolution)
    }
}
