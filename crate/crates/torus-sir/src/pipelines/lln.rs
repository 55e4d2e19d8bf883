//! Particle system against its deterministic limit across population sizes.

use serde::{Deserialize, Serialize};
use torus_sir_core::fluctuations::empirical_fluctuation;
use torus_sir_core::simulator;
use torus_sir_core::stats::median;
use torus_sir_core::GridField;

use super::{run_seed, solve_limit, RunOptions};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::formats::{num, OutputDir};
use crate::fortet::{fortet_snapped, Measure, SnappedMeasure};

pub const CLASSES: [&str; 3] = ["S", "I", "total"];

/// One replicate, one time, one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub n_agents: usize,
    pub replicate: usize,
    pub time: f64,
    pub class: String,
    pub fortet_lp: f64,
    pub fortet_lower_bound: f64,
    /// `|N_c / N - mass of f_c|`.
    pub mass_error: f64,
    /// Truncated `H^{-s}` norm of `sqrt(N) (mu^c - f_c)`.
    pub h_neg_norm: f64,
}

/// Medians over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub n_agents: usize,
    pub time: f64,
    pub class: String,
    pub median_fortet: f64,
    pub median_lower_bound: f64,
    pub median_h_neg_norm: f64,
}

/// Root mean square of the S and I mass errors over replicates and times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassErrorRow {
    pub n_agents: usize,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub class: String,
    /// Absent for ratios pooled over times.
    pub time: Option<f64>,
    pub n_from: usize,
    pub n_to: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sweep: Vec<usize>,
    pub replicates: usize,
    pub times: Vec<f64>,
    pub resolution: usize,
    pub s: f64,
    pub norm_gamma: f64,
    pub cutoff: u32,
    pub records: Vec<DistanceRow>,
    pub trend: Vec<TrendRow>,
    pub mass_error: Vec<MassErrorRow>,
    /// Successive `rms(N_k) / rms(N_{k+1})`.
    pub mass_error_ratios: Vec<RatioRow>,
    /// Successive ratios of median LP distances.
    pub fortet_ratios: Vec<RatioRow>,
    /// Median LP distance strictly decreasing in `N` for every class and time
    /// whose distances are not all zero.
    pub fortet_decreasing: bool,
}

impl ComparisonReport {
    pub fn trend_row(&self, n: usize, time: f64, class: &str) -> Option<&TrendRow> {
        self.trend.iter().find(|r| r.n_agents == n && (r.time - time).abs() < 1e-9 && r.class == class)
    }
}

struct Reference {
    time: f64,
    fields: [GridField; 3],
    snapped: [SnappedMeasure; 3],
}

pub fn compare(config: &ExperimentConfig, options: &RunOptions) -> Result<ComparisonReport> {
    let sim = config.simulation()?;
    let times = sim.snapshot_times.clone();
    if times.is_empty() {
        return Err(HarnessError::Config("lln-compare needs `simulation.snapshot_times`".into()));
    }
    let replicates = options.replicates(config);
    let res = config.fortet_resolution();
    let fl = config.fluctuation.clone().unwrap_or_default();
    let gamma = config.model()?.gamma;
    let norm_gamma = if gamma > 0.0 { gamma } else { 1.0 };

    let mut pc = config.pde_config()?;
    pc.output_times = times.clone();
    let sol = solve_limit(&pc)?;
    let references = times
        .iter()
        .map(|&t| {
            let fr = sol
                .frame_at(t)
                .ok_or_else(|| HarnessError::Runtime(format!("limit solution has no frame at t = {t}")))?;
            let fields = [fr.f_s.clone(), fr.f_i.clone(), fr.f.clone()];
            let snapped = [
                SnappedMeasure::from_density(&fields[0], res)?,
                SnappedMeasure::from_density(&fields[1], res)?,
                SnappedMeasure::from_density(&fields[2], res)?,
            ];
            Ok(Reference { time: t, fields, snapped })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for &n in &config.sweep {
        for r in 0..replicates {
            let output = simulator::run(&config.sim_config(n, run_seed(config.seed, n, r))?)?;
            for (snap, reference) in output.snapshots.iter().zip(&references) {
                let m = snap.empirical_measures();
                for (c, atoms) in [&m.susceptible, &m.infected, &m.total].into_iter().enumerate() {
                    let est = fortet_snapped(&Measure::Atoms(atoms).snap(res)?, &reference.snapped[c])?;
                    let field = &reference.fields[c];
                    let h_neg_norm = empirical_fluctuation(atoms, field, n)?.h_neg_s_norm(fl.s, norm_gamma, fl.cutoff)?;
                    records.push(DistanceRow {
                        n_agents: n,
                        replicate: r,
                        time: reference.time,
                        class: CLASSES[c].into(),
                        fortet_lp: est.lp,
                        fortet_lower_bound: est.lower_bound,
                        mass_error: (atoms.len() as f64 / n as f64 - field.mass()).abs(),
                        h_neg_norm,
                    });
                }
            }
        }
    }

    let select = |n: usize, t: f64, class: &str| -> Vec<&DistanceRow> {
        records.iter().filter(|d| d.n_agents == n && d.time == t && d.class == class).collect()
    };
    let mut trend = Vec::new();
    for &n in &config.sweep {
        for &t in &times {
            for class in CLASSES {
                let rows = select(n, t, class);
                let med = |f: fn(&DistanceRow) -> f64| median(&rows.iter().map(|d| f(d)).collect::<Vec<_>>());
                trend.push(TrendRow {
                    n_agents: n,
                    time: t,
                    class: class.into(),
                    median_fortet: med(|d| d.fortet_lp)?,
                    median_lower_bound: med(|d| d.fortet_lower_bound)?,
                    median_h_neg_norm: med(|d| d.h_neg_norm)?,
                });
            }
        }
    }
    let mass_error: Vec<MassErrorRow> = config
        .sweep
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = records
                .iter()
                .filter(|d| d.n_agents == n && d.class != "total")
                .map(|d| d.mass_error * d.mass_error)
                .collect();
            MassErrorRow { n_agents: n, rms: (errs.iter().sum::<f64>() / errs.len() as f64).sqrt() }
        })
        .collect();
    let mass_error_ratios = mass_error
        .windows(2)
        .map(|w| RatioRow { class: "S+I".into(), time: None, n_from: w[0].n_agents, n_to: w[1].n_agents, ratio: w[0].rms / w[1].rms })
        .collect();

    let mut fortet_ratios = Vec::new();
    let mut fortet_decreasing = true;
    for &t in &times {
        for class in CLASSES {
            let meds: Vec<(usize, f64)> = config
                .sweep
                .iter()
                .map(|&n| (n, trend.iter().find(|r| r.n_agents == n && r.time == t && r.class == class).expect("trend row").median_fortet))
                .collect();
            let all_zero = meds.iter().all(|&(_, m)| m == 0.0);
            for w in meds.windows(2) {
                if !all_zero && w[1].1 >= w[0].1 {
                    fortet_decreasing = false;
                }
                fortet_ratios.push(RatioRow { class: class.into(), time: Some(t), n_from: w[0].0, n_to: w[1].0, ratio: w[0].1 / w[1].1 });
            }
        }
    }

    Ok(ComparisonReport {
        sweep: config.sweep.clone(),
        replicates,
        times,
        resolution: res,
        s: fl.s,
        norm_gamma,
        cutoff: fl.cutoff,
        records,
        trend,
        mass_error,
        mass_error_ratios,
        fortet_ratios,
        fortet_decreasing,
    })
}

pub(super) fn run(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let report = compare(config, options)?;
    let mut csv = out.csv(
        "lln.csv",
        "lln-distances",
        &["n_agents", "replicate", "time", "class", "fortet_lp", "fortet_lower_bound", "mass_error", "h_neg_norm"],
    )?;
    for d in &report.records {
        csv.row([
            d.n_agents.to_string(),
            d.replicate.to_string(),
            num(d.time),
            d.class.clone(),
            num(d.fortet_lp),
            num(d.fortet_lower_bound),
            num(d.mass_error),
            num(d.h_neg_norm),
        ])?;
    }
    csv.finish()?;
    out.json("lln_report.json", &report)?;
    Ok(serde_json::json!({
        "mode": "lln-compare",
        "trend": report.trend,
        "mass_error": report.mass_error,
        "mass_error_ratios": report.mass_error_ratios,
        "fortet_decreasing": report.fortet_decreasing,
    }))
}
