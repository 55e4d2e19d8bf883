//! Gaussian fluctuations: the initial covariance functionals and the
//! variance of the fluctuation field along the dynamics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use torus_sir_core::fluctuations::{initial_covariances_of, mc_initial_clt, Component, CovarianceReport, LinearizedSystem, McCltReport};
use torus_sir_core::math::replicate_seed;
use torus_sir_core::simulator::{pair, run};
use torus_sir_core::stats::{bootstrap_se, estimate, variance, ReportRow};
use torus_sir_core::GridField;

use super::{run_seed, solve_limit, RunOptions};
use crate::config::{test_function, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::formats::{num, OutputDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCltReport {
    pub n_agents: usize,
    pub replicates: usize,
    pub limit: CovarianceReport,
    pub monte_carlo: McCltReport,
    /// Means of the three pairings and the six covariance entries.
    pub rows: Vec<ReportRow>,
    pub min_eigenvalue: f64,
    pub z_tolerance: f64,
    pub within: bool,
}

pub fn initial(config: &ExperimentConfig, options: &RunOptions) -> Result<InitialCltReport> {
    let tests = config.tests.as_ref().ok_or_else(|| HarnessError::Config("missing `tests` section".into()))?.build()?;
    let init = config.model()?.initial_condition()?;
    let fl = config.fluctuation.clone().unwrap_or_default();
    let n = config.population()?;
    let m = options.replicates(config);
    let limit = initial_covariances_of(&tests, &init, fl.quadrature_grid)?;
    let mc = mc_initial_clt(n, &init, &tests, limit.means, m, fl.bootstrap, config.seed)?;
    let predicted = limit.matrix();
    let names = ["(U0, phi)", "(V0, psi)", "(Z0, phi2)"];
    let mut rows = Vec::new();
    for k in 0..3 {
        let se = (mc.covariance[k][k] / m as f64).sqrt();
        rows.push(ReportRow::new(format!("mean {}", names[k]), torus_sir_core::stats::Estimate { mean: mc.mean[k], se }, 0.0));
    }
    for (label, i, j) in [("alpha_p", 0, 0), ("beta_p", 1, 1), ("sigma_sq", 2, 2), ("gamma_p", 0, 1), ("eta_p", 0, 2), ("lambda_p", 1, 2)] {
        rows.push(ReportRow::new(
            format!("{label} = cov({}, {})", names[i], names[j]),
            torus_sir_core::stats::Estimate { mean: mc.covariance[i][j], se: mc.se[i][j] },
            predicted[i][j],
        ));
    }
    let z_tolerance = config.tolerance("clt_initial_z", 3.0);
    let within = rows.iter().all(|r| r.z_score.abs() <= z_tolerance);
    Ok(InitialCltReport {
        n_agents: n,
        replicates: m,
        min_eigenvalue: limit.min_eigenvalue(),
        limit,
        monte_carlo: mc,
        rows,
        z_tolerance,
        within,
    })
}

pub(super) fn run_initial(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let report = initial(config, options)?;
    write_rows(out, "clt_initial.csv", &report.rows)?;
    out.json("clt_initial.json", &report)?;
    Ok(serde_json::json!({ "mode": "clt-initial", "within": report.within, "min_eigenvalue": report.min_eigenvalue }))
}

pub(crate) fn write_rows(out: &mut OutputDir, name: &str, rows: &[ReportRow]) -> Result<()> {
    let mut csv = out.csv(name, "report", &["quantity", "estimate", "se", "predicted", "z_score"])?;
    for r in rows {
        csv.row([r.quantity.clone(), num(r.estimate), num(r.se), num(r.predicted), num(r.z_score)])?;
    }
    csv.finish()
}

/// Sample variance of one pairing of the particle fluctuation field against
/// the exact variance of the linearized system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicRow {
    pub n_agents: usize,
    pub time: f64,
    pub component: Component,
    pub particle_variance: f64,
    /// Bootstrap standard error of `particle_variance`.
    pub se: f64,
    pub predicted: f64,
    /// `particle_variance / predicted - 1`.
    pub relative_error: f64,
    /// Mean pairing; tends to 0 as `N` grows.
    pub mean: f64,
    pub mean_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicCltReport {
    pub replicates: usize,
    pub grid: usize,
    pub cutoff: u32,
    pub rows: Vec<DynamicRow>,
    /// Monte Carlo variance of Galerkin paths against the same prediction.
    pub galerkin: Vec<ReportRow>,
    pub relative_tolerance: f64,
    pub within: bool,
}

fn component_atoms(c: Component, m: &torus_sir_core::simulator::EmpiricalMeasures) -> &[(torus_sir_core::TorusPoint, f64)] {
    match c {
        Component::U => &m.susceptible,
        Component::V => &m.infected,
        Component::Z => &m.total,
    }
}

fn inner(a: &GridField, b: &GridField) -> f64 {
    let n = a.n();
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() / (n * n) as f64
}

pub fn dynamic(config: &ExperimentConfig, options: &RunOptions) -> Result<DynamicCltReport> {
    let sim = config.simulation()?;
    let fl = config.fluctuation.clone().unwrap_or_default();
    let psi = test_function(fl.psi.as_deref().ok_or_else(|| HarnessError::Config("clt-dynamic needs `fluctuation.psi`".into()))?)?;
    let times: Vec<f64> = sim.snapshot_times.clone();
    if times.is_empty() || times.iter().any(|&t| t <= 0.0) {
        return Err(HarnessError::Config("clt-dynamic needs positive `simulation.snapshot_times`".into()));
    }
    let m = options.replicates(config);
    if m < 2 {
        return Err(HarnessError::Config("clt-dynamic needs at least two replicates".into()));
    }
    let base = config.pde_config()?;
    let grid = fl.grid.unwrap_or(base.n_grid);
    let psi_grid = psi.to_grid(grid);

    let mut limit = base.clone();
    limit.output_times = times.clone();
    let sol = solve_limit(&limit)?;
    let psi_fine = psi.to_grid(base.n_grid);
    let limit_pairing = |t: f64, c: Component| -> Result<f64> {
        let fr = sol.frame_at(t).ok_or_else(|| HarnessError::Runtime(format!("limit solution has no frame at t = {t}")))?;
        let field = match c {
            Component::U => &fr.f_s,
            Component::V => &fr.f_i,
            Component::Z => &fr.f,
        };
        Ok(inner(field, &psi_fine))
    };

    let mut systems = Vec::with_capacity(times.len());
    let mut predicted = Vec::with_capacity(times.len());
    for &t in &times {
        let mut pc = base.clone();
        pc.horizon = t;
        pc.output_times = vec![t];
        let system = LinearizedSystem::new(&pc, grid, fl.cutoff)?;
        predicted.push(fl.components.iter().map(|&c| system.adjoint_variance(&psi_grid, c)).collect::<torus_sir_core::Result<Vec<_>>>()?);
        systems.push(system);
    }

    let mut rows = Vec::new();
    for &n in &config.sweep {
        // samples[k][c][r]
        let mut samples = vec![vec![Vec::with_capacity(m); fl.components.len()]; times.len()];
        for r in 0..m {
            let output = run(&config.sim_config(n, run_seed(config.seed, n, r))?)?;
            for (k, snap) in output.snapshots.iter().enumerate() {
                let measures = snap.empirical_measures();
                for (ci, &c) in fl.components.iter().enumerate() {
                    let value = pair(component_atoms(c, &measures), |x| psi.value(x));
                    samples[k][ci].push((n as f64).sqrt() * (value - limit_pairing(times[k], c)?));
                }
            }
        }
        for (k, &t) in times.iter().enumerate() {
            for (ci, &c) in fl.components.iter().enumerate() {
                let xs = &samples[k][ci];
                let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(run_seed(config.seed, n, usize::MAX), (k * 3 + ci) as u64));
                let se = bootstrap_se(xs, fl.bootstrap, &mut rng, |s| variance(&s.iter().map(|x| **x).collect::<Vec<_>>()))?;
                let var = variance(xs);
                let pred = predicted[k][ci];
                let est = estimate(xs)?;
                rows.push(DynamicRow {
                    n_agents: n,
                    time: t,
                    component: c,
                    particle_variance: var,
                    se,
                    predicted: pred,
                    relative_error: var / pred - 1.0,
                    mean: est.mean,
                    mean_se: est.se,
                });
            }
        }
    }

    let mut galerkin = Vec::new();
    if fl.galerkin_paths >= 2 {
        for (k, system) in systems.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(config.seed ^ 0x9a1e_4b1d, k as u64));
            let mut values = vec![Vec::with_capacity(fl.galerkin_paths); fl.components.len()];
            for _ in 0..fl.galerkin_paths {
                let start = system.sample_initial(&mut rng);
                let path = system.galerkin_solve_uv(start, system.steps().max(1), &mut rng)?;
                let last = path.states.last().ok_or_else(|| HarnessError::Runtime("empty Galerkin path".into()))?;
                for (ci, &c) in fl.components.iter().enumerate() {
                    values[ci].push(system.pair(last.component(c), &psi_grid)?);
                }
            }
            for (ci, &c) in fl.components.iter().enumerate() {
                let xs = &values[ci];
                let se = bootstrap_se(xs, fl.bootstrap, &mut rng, |s| variance(&s.iter().map(|x| **x).collect::<Vec<_>>()))?;
                let est = torus_sir_core::stats::Estimate { mean: variance(xs), se };
                let label = format!("Galerkin variance of ({c:?}, psi) at t={}", times[k]);
                galerkin.push(ReportRow::new(label, est, predicted[k][ci]));
            }
        }
    }

    let relative_tolerance = config.tolerance("clt_dynamic_rel", 0.25);
    let within = rows.iter().all(|r| r.relative_error.abs() <= relative_tolerance);
    Ok(DynamicCltReport { replicates: m, grid, cutoff: fl.cutoff, rows, galerkin, relative_tolerance, within })
}

pub(super) fn run_dynamic(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let report = dynamic(config, options)?;
    let mut csv = out.csv(
        "clt_dynamic.csv",
        "clt-dynamic",
        &["n_agents", "time", "component", "particle_variance", "se", "predicted", "relative_error", "mean", "mean_se"],
    )?;
    for r in &report.rows {
        csv.row([
            r.n_agents.to_string(),
            num(r.time),
            format!("{:?}", r.component),
            num(r.particle_variance),
            num(r.se),
            num(r.predicted),
            num(r.relative_error),
            num(r.mean),
            num(r.mean_se),
        ])?;
    }
    csv.finish()?;
    if !report.galerkin.is_empty() {
        write_rows(out, "clt_galerkin.csv", &report.galerkin)?;
    }
    out.json("clt_dynamic.json", &report)?;
    Ok(serde_json::json!({ "mode": "clt-dynamic", "within": report.within, "rows": report.rows }))
}
