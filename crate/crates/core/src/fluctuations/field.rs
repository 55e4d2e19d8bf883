//! Empirical fluctuation fields `sqrt(N) (mu^N - mu)` and the quadratic
//! variation check of tracked martingales.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::grid::GridField;
use crate::math::CompensatedSum;
use crate::simulator::engine::MartingaleTrack;
use crate::spectral::{project_grid, project_measure, SpectralField};
use crate::stats::ReportRow;
use crate::torus::TorusPoint;

/// Signed measure `scale * (sum_j w_j delta_{X_j} - ref(x) dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationField {
    atoms: Vec<(TorusPoint, f64)>,
    reference: GridField,
    scale: f64,
}

impl FluctuationField {
    pub fn new(atoms: Vec<(TorusPoint, f64)>, reference: GridField, scale: f64) -> Result<Self> {
        if !scale.is_finite() || atoms.iter().any(|&(_, w)| !w.is_finite()) {
            return Err(invalid("fluctuation", "weights and scale must be finite"));
        }
        Ok(Self { atoms, reference, scale })
    }

    pub fn atoms(&self) -> &[(TorusPoint, f64)] {
        &self.atoms
    }

    pub fn reference(&self) -> &GridField {
        &self.reference
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `scale * (sum_j w_j phi(X_j) - h^2 sum_x phi(x) ref(x))`.
    pub fn pair(&self, mut phi: impl FnMut(TorusPoint) -> f64) -> f64 {
        let n = self.reference.n();
        let h2 = 1.0 / (n * n) as f64;
        let mut acc = CompensatedSum::new();
        for &(p, w) in &self.atoms {
            acc.add(w * phi(p));
        }
        for i1 in 0..n {
            for i2 in 0..n {
                acc.add(-h2 * phi(self.reference.node(i1, i2)) * self.reference.at(i1, i2));
            }
        }
        self.scale * acc.value()
    }

    /// Pairings with every basis function up to `cutoff`.
    pub fn project(&self, gamma: f64, cutoff: u32) -> Result<SpectralField> {
        let empirical = project_measure(&self.atoms, gamma, cutoff)?;
        let reference = project_grid(&self.reference, gamma, cutoff)?;
        Ok(empirical.axpy(-1.0, &reference)?.map_indexed(|_, c| self.scale * c))
    }

    /// Truncated `H^{-s}` norm.
    pub fn h_neg_s_norm(&self, s: f64, gamma: f64, cutoff: u32) -> Result<f64> {
        Ok(self.project(gamma, cutoff)?.h_neg_s_norm(s))
    }
}

/// `sqrt(N) (mu^N - ref)` for an empirical measure with atoms of weight `1/N`.
pub fn empirical_fluctuation(atoms: &[(TorusPoint, f64)], reference: &GridField, n_agents: usize) -> Result<FluctuationField> {
    if n_agents == 0 {
        return Err(invalid("n_agents", "must be positive"));
    }
    FluctuationField::new(atoms.to_vec(), reference.clone(), libm::sqrt(n_agents as f64))
}

/// Realized square minus predicted quadratic variation, averaged over
/// replicates, for every snapshot time of the tracks. Rows are emitted for
/// `M`, `L`, `H` and the cross term `M L`; every prediction is 0.
pub fn qv_check(tracks: &[&MartingaleTrack]) -> Result<Vec<ReportRow>> {
    let Some(first) = tracks.first() else {
        return Err(invalid("tracks", "need at least one replicate"));
    };
    let times: Vec<f64> = first.records.iter().map(|r| r.time).collect();
    if tracks.iter().any(|t| t.records.len() != times.len() || t.phi != first.phi) {
        return Err(invalid("tracks", "replicates must share test function and snapshot times"));
    }
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let column = |f: &dyn Fn(&crate::simulator::engine::TrackRecord) -> f64| -> Vec<f64> {
            tracks.iter().map(|tr| f(&tr.records[k])).collect()
        };
        let series: [(&str, Vec<f64>); 4] = [
            ("M", column(&|r| r.m * r.m - r.qv_m)),
            ("L", column(&|r| r.l * r.l - r.qv_l)),
            ("H", column(&|r| r.h * r.h - r.qv_h)),
            ("ML", column(&|r| r.m * r.l - r.qv_ml)),
        ];
        for (name, xs) in series {
            rows.push(ReportRow::from_samples(format!("{name} square minus qv at t={t}"), &xs, 0.0)?);
        }
    }
    Ok(rows)
}
