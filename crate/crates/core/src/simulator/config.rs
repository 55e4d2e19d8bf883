//! Run parameters and the law of the initial configuration.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::grid::GridField;
use crate::math::PI;
use crate::region::Region;
use crate::torus::{KernelSpec, TorusPoint};

/// Density `g` of the initial positions, bounded as `delta1 <= g <= delta2`.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uniform,
    /// `1 + amplitude * cos(2 pi x_axis)`, `axis` 0 or 1.
    Cosine { amplitude: f64, axis: usize },
    /// Piecewise constant on the grid cells.
    Grid { field: GridField, delta1: f64, delta2: f64 },
}

impl Density {
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Density::Uniform => (1.0, 1.0),
            Density::Cosine { amplitude, .. } => (1.0 - libm::fabs(*amplitude), 1.0 + libm::fabs(*amplitude)),
            Density::Grid { delta1, delta2, .. } => (*delta1, *delta2),
        }
    }

    pub fn value(&self, p: TorusPoint) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Cosine { amplitude, axis } => {
                let x = if *axis == 0 { p.x1() } else { p.x2() };
                1.0 + amplitude * libm::cos(2.0 * PI * x)
            }
            Density::Grid { field, .. } => field.cell_value(p),
        }
    }

    /// Samples of `g` at the nodes of an `n x n` grid.
    pub fn grid(&self, n: usize) -> GridField {
        match self {
            Density::Grid { field, .. } if field.n() == n => field.clone(),
            _ => GridField::from_fn(n, |p| self.value(p)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Density::Uniform => Ok(()),
            Density::Cosine { amplitude, axis } => {
                if !(libm::fabs(*amplitude) < 1.0) || *axis > 1 {
                    return Err(invalid("density", "cosine density needs |amplitude| < 1 and axis 0 or 1"));
                }
                Ok(())
            }
            Density::Grid { field, delta1, delta2 } => {
                if !(*delta1 > 0.0 && delta1 <= delta2) {
                    return Err(invalid("density", "bounds need 0 < delta1 <= delta2"));
                }
                if field.min() < *delta1 || field.max() > *delta2 {
                    return Err(invalid("density", "grid values leave [delta1, delta2]"));
                }
                if libm::fabs(field.mass() - 1.0) > 1e-9 {
                    return Err(invalid("density", "mass differs from 1 by more than 1e-9"));
                }
                Ok(())
            }
        }
    }
}

/// Positions i.i.d. from `g`; agents in `A` are infected with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub region: Region,
    pub p: f64,
    pub density: Density,
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", "must lie in [0, 1]"));
        }
        self.density.validate()
    }

    /// `(f_S(0), f_I(0), g)` on an `n x n` grid, with `1_A` sampled at the nodes.
    pub fn fields(&self, n: usize) -> (GridField, GridField, GridField) {
        let g = self.density.grid(n);
        let a = self.region.indicator(n);
        let p = self.p;
        let f_s = GridField::from_raw(
            n,
            g.values().iter().zip(a.values()).map(|(&g, &a)| ((1.0 - p) * a + (1.0 - a)) * g).collect(),
        );
        let f_i = GridField::from_raw(n, g.values().iter().zip(a.values()).map(|(&g, &a)| p * a * g).collect());
        (f_s, f_i, g)
    }
}

/// Parameters of one particle run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_agents: usize,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub initial: InitialCondition,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
}

pub(crate) fn check_rates(beta: f64, alpha: f64, gamma: f64) -> Result<()> {
    for (name, v) in [("beta", beta), ("alpha", alpha), ("gamma", gamma)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, "must be finite and non-negative"));
        }
    }
    Ok(())
}

pub(crate) fn check_times(times: &[f64], horizon: f64, name: &'static str) -> Result<()> {
    if times.iter().any(|t| !(0.0..=horizon).contains(t)) {
        return Err(invalid(name, "every time must lie in [0, horizon]"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(invalid("n_agents", "must be at least 1"));
        }
        if self.n_agents > u32::MAX as usize {
            return Err(invalid("n_agents", "exceeds the 32-bit agent id space"));
        }
        check_rates(self.beta, self.alpha, self.gamma)?;
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid("horizon", "must be finite and non-negative"));
        }
        check_times(&self.snapshot_times, self.horizon, "snapshot_times")?;
        self.kernel.validate()?;
        self.initial.validate()
    }
}
