use serde::{Deserialize, Serialize};
use torus_sir_core::fluctuations::qv_check;
use torus_sir_core::simulator::{run_tracked, MartingaleTrack};
use torus_sir_core::stats::ReportRow;

use super::{run_seed, RunOptions};
use crate::config::{test_function, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::formats::{num, OutputDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QvReport {
    pub n_agents: usize,
    pub replicates: usize,
    /// Every prediction is 0: the martingale square minus its compensator.
    pub rows: Vec<ReportRow>,
    pub z_tolerance: f64,
    pub within: bool,
}

pub fn tracks(config: &ExperimentConfig, options: &RunOptions) -> Result<Vec<MartingaleTrack>> {
    let sim = config.simulation()?;
    let track = sim.track.as_ref().ok_or_else(|| HarnessError::Config("qv-check needs `simulation.track`".into()))?;
    let phi = test_function(&track.phi)?;
    let n = config.population()?;
    (0..options.replicates(config))
        .map(|r| {
            let output = run_tracked(&config.sim_config(n, run_seed(config.seed, n, r))?, std::slice::from_ref(&phi), track.sub_step)?;
            output.tracks.into_iter().next().ok_or_else(|| HarnessError::Runtime("run produced no track".into()))
        })
        .collect()
}

pub fn check(config: &ExperimentConfig, tracks: &[MartingaleTrack]) -> Result<QvReport> {
    let refs: Vec<&MartingaleTrack> = tracks.iter().collect();
    let rows = qv_check(&refs)?;
    let z_tolerance = config.tolerance("qv_z", 3.0);
    let within = rows.iter().all(|r| r.z_score.abs() <= z_tolerance);
    Ok(QvReport { n_agents: config.population()?, replicates: tracks.len(), rows, z_tolerance, within })
}

pub(super) fn run(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let tracks = tracks(config, options)?;
    let mut csv = out.csv("tracks.csv", "martingale-tracks", &["replicate", "time", "m", "l", "h", "qv_m", "qv_l", "qv_h", "qv_ml"])?;
    for (r, t) in tracks.iter().enumerate() {
        for rec in &t.records {
            let mut row = vec![r.to_string()];
            row.extend([rec.time, rec.m, rec.l, rec.h, rec.qv_m, rec.qv_l, rec.qv_h, rec.qv_ml].map(num));
            csv.row(row)?;
        }
    }
    csv.finish()?;
    let report = check(config, &tracks)?;
    super::clt::write_rows(out, "qv_check.csv", &report.rows)?;
    out.json("qv_check.json", &report)?;
    Ok(serde_json::json!({ "mode": "qv-check", "within": report.within, "rows": report.rows }))
}
