//! Partial sums of the basis series behind the choice of Sobolev index.

use serde::{Deserialize, Serialize};
use torus_sir_core::spectral::{appendix_sum_diagnostic, classify_doubling_sums, DiagnosticRow, SeriesBehaviour};
use torus_sir_core::TorusPoint;

use super::RunOptions;
use crate::config::ExperimentConfig;
use crate::error::{config_err, HarnessError, Result};
use crate::formats::{write_diagnostic, OutputDir};

/// Classification from three consecutive doubled cutoffs ending at `cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowClass {
    pub cutoff: u32,
    pub rho: SeriesBehaviour,
    pub grad: SeriesBehaviour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub s: f64,
    pub rows: Vec<DiagnosticRow>,
    pub windows: Vec<WindowClass>,
    /// Classification of the last window.
    pub rho: SeriesBehaviour,
    pub grad: SeriesBehaviour,
    /// Every window agrees with the last one.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub gamma: f64,
    pub point: [f64; 2],
    pub cutoffs: Vec<u32>,
    pub series: Vec<SeriesReport>,
}

pub fn diagnose(config: &ExperimentConfig, options: &RunOptions) -> Result<DiagnosticReport> {
    let spec = config.diagnostic.clone().unwrap_or_default();
    let s_values = if options.s_values.is_empty() { spec.s_values } else { options.s_values.clone() };
    let cutoffs = if options.cutoffs.is_empty() { spec.cutoffs } else { options.cutoffs.clone() };
    if s_values.is_empty() {
        return Err(HarnessError::Config("no Sobolev indices given".into()));
    }
    if cutoffs.len() < 3 || cutoffs.windows(2).any(|w| w[1] != 2 * w[0]) || cutoffs[0] % 2 != 0 {
        return Err(HarnessError::Config("cutoffs must be at least three even values, each double the previous".into()));
    }
    let x = TorusPoint::wrap(spec.point[0], spec.point[1]).map_err(config_err)?;
    let series = s_values
        .iter()
        .map(|&s| {
            let rows = appendix_sum_diagnostic(s, spec.gamma, x, &cutoffs).map_err(config_err)?;
            let windows = (2..rows.len())
                .map(|end| {
                    let w = &rows[end - 2..=end];
                    Ok(WindowClass {
                        cutoff: rows[end].cutoff,
                        rho: classify_doubling_sums(&w.iter().map(|r| r.rho_sq).collect::<Vec<_>>())?,
                        grad: classify_doubling_sums(&w.iter().map(|r| r.grad_sq).collect::<Vec<_>>())?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let last = windows.last().expect("at least one window").clone();
            let stable = windows.iter().all(|w| w.rho == last.rho && w.grad == last.grad);
            Ok(SeriesReport { s, rows, windows, rho: last.rho, grad: last.grad, stable })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticReport { gamma: spec.gamma, point: spec.point, cutoffs, series })
}

/// CSV of the table, as written to `diagnostic.csv`.
pub fn table(report: &DiagnosticReport) -> String {
    let mut text = String::from("s,cutoff,rho_sq,grad_sq\n");
    for sr in &report.series {
        for r in &sr.rows {
            text.push_str(&format!("{:?},{},{:?},{:?}\n", sr.s, r.cutoff, r.rho_sq, r.grad_sq));
        }
    }
    text
}

pub(super) fn run(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let report = diagnose(config, options)?;
    let rows: Vec<(f64, DiagnosticRow)> = report.series.iter().flat_map(|sr| sr.rows.iter().map(move |r| (sr.s, *r))).collect();
    write_diagnostic(out, "diagnostic.csv", &rows)?;
    out.json("diagnostic.json", &report)?;
    Ok(serde_json::json!({
        "mode": "spectral-diag",
        "series": report.series.iter().map(|s| serde_json::json!({"s": s.s, "rho": s.rho, "grad": s.grad, "stable": s.stable})).collect::<Vec<_>>(),
    }))
}
