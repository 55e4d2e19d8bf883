use serde_json::json;

use super::{solve_limit, RunOptions};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::formats::{num, write_field_csv, OutputDir};

pub(super) fn run(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let pc = config.pde_config()?;
    let sol = solve_limit(&pc)?;
    for (k, frame) in sol.frames.iter().enumerate() {
        for (q, field) in [("f_s", &frame.f_s), ("f_i", &frame.f_i), ("f", &frame.f)] {
            let stem = format!("{q}_t{k:03}");
            out.field(&stem, q, frame.time, field)?;
            if options.field_csv {
                write_field_csv(out, &format!("{stem}.csv"), field)?;
            }
        }
    }
    let d = &sol.diagnostics;
    let mut csv = out.csv(
        "diagnostics.csv",
        "pde-diagnostics",
        &["time", "mass_s", "mass_i", "recovered", "min_s", "min_i", "order_excess", "f_min", "f_max"],
    )?;
    for k in 0..d.times.len() {
        csv.row(
            [d.times[k], d.mass_s[k], d.mass_i[k], d.recovered[k], d.min_s[k], d.min_i[k], d.order_excess[k], d.f_min[k], d.f_max[k]]
                .map(num),
        )?;
    }
    csv.finish()?;
    let (lo, hi) = pc.initial.density.bounds();
    let min_of = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_of = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "mode": "pde",
        "n_grid": pc.n_grid,
        "dt": pc.dt,
        "horizon": pc.horizon,
        "frames": sol.frames.iter().map(|f| f.time).collect::<Vec<_>>(),
        "mass_balance_defect": d.mass_balance_defect(),
        "trapezoid_mass_balance_defect": d.trapezoid_mass_balance_defect(pc.alpha),
        "min_s": min_of(&d.min_s),
        "min_i": min_of(&d.min_i),
        "max_order_excess": max_of(&d.order_excess),
        "f_min": min_of(&d.f_min),
        "f_max": max_of(&d.f_max),
        "density_bounds": [lo, hi],
    });
    out.json("pde_summary.json", &summary)?;
    Ok(summary)
}
