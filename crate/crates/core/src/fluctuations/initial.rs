//! Gaussian limit of the initial fluctuations `(U_0, V_0, Z_0)`.
//!
//! With `s = 1_A (1 - xi) + 1_{A^c}` and `i = 1_A xi` the per-agent class
//! indicators, the three pairings are centred sums of i.i.d. copies of
//! `(s phi(X), i psi(X), phi2(X))`, so the limit covariance is the covariance
//! of that triple. Writing `f_S0 = E[s | X] g` and `f_I0 = E[i | X] g`:
//!
//! ```text
//! alpha_p = (phi^2, f_S0) - (phi, f_S0)^2      gamma_p  = -(phi, f_S0) (psi, f_I0)
//! beta_p  = (psi^2, f_I0) - (psi, f_I0)^2      eta_p    = (phi phi2, f_S0) - (phi, f_S0) (phi2, g)
//! sigma^2 = (phi2^2, g) - (phi2, g)^2          lambda_p = (psi phi2, f_I0) - (psi, f_I0) (phi2, g)
//! ```
//!
//! `gamma_p` has no product term because `s i = 0`.

use alloc::vec::Vec;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::GridField;
use crate::math::{replicate_seed, CompensatedSum};
use crate::simulator::config::InitialCondition;
use crate::simulator::population::{sample_initial, Health};
use crate::spectral::TrigPolynomial;
use crate::stats::{covariance, mean};

/// Smallest quadrature grid accepted for the covariance functionals.
pub const MIN_QUADRATURE_GRID: usize = 128;

/// Test functions for `(U_0, phi)`, `(V_0, psi)` and `(Z_0, phi2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctions {
    pub phi: TrigPolynomial,
    pub psi: TrigPolynomial,
    pub phi2: TrigPolynomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovarianceReport {
    pub alpha_p: f64,
    pub beta_p: f64,
    pub sigma_sq: f64,
    pub gamma_p: f64,
    pub eta_p: f64,
    pub lambda_p: f64,
    /// Limit means `(phi, f_S0)`, `(psi, f_I0)`, `(phi2, g)` used to centre the pairings.
    pub means: [f64; 3],
}

impl CovarianceReport {
    /// Covariance of `((U_0, phi), (V_0, psi), (Z_0, phi2))`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.alpha_p, self.gamma_p, self.eta_p],
            [self.gamma_p, self.beta_p, self.lambda_p],
            [self.eta_p, self.lambda_p, self.sigma_sq],
        ]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = Matrix3::from_fn(|i, j| self.matrix()[i][j]);
        SymmetricEigen::new(m).eigenvalues.min()
    }

    /// Variance of `(U_0, phi) + (V_0, psi) + (Z_0, phi2)`.
    pub fn total_variance(&self) -> f64 {
        self.alpha_p + self.beta_p + self.sigma_sq + 2.0 * (self.gamma_p + self.eta_p + self.lambda_p)
    }
}

/// The six covariance functionals by rectangle-rule quadrature on the grid of the test functions.
pub fn initial_covariances(
    phi: &GridField,
    psi: &GridField,
    phi2: &GridField,
    initial: &InitialCondition,
) -> Result<CovarianceReport> {
    let n = phi.n();
    if n < MIN_QUADRATURE_GRID {
        return Err(invalid("grid", "covariance quadrature needs at least 128 points per side"));
    }
    phi.check_same(psi)?;
    phi.check_same(phi2)?;
    initial.validate()?;
    let (f_s, f_i, g) = initial.fields(n);
    let h2 = 1.0 / (n * n) as f64;
    let integral = |f: &dyn Fn(usize) -> f64| (0..n * n).map(f).collect::<CompensatedSum>().value() * h2;
    let (p, q, r) = (phi.values(), psi.values(), phi2.values());
    let (fs, fi, gv) = (f_s.values(), f_i.values(), g.values());
    let phi_s = integral(&|k| p[k] * fs[k]);
    let psi_i = integral(&|k| q[k] * fi[k]);
    let phi2_g = integral(&|k| r[k] * gv[k]);
    Ok(CovarianceReport {
        alpha_p: integral(&|k| p[k] * p[k] * fs[k]) - phi_s * phi_s,
        beta_p: integral(&|k| q[k] * q[k] * fi[k]) - psi_i * psi_i,
        sigma_sq: integral(&|k| r[k] * r[k] * gv[k]) - phi2_g * phi2_g,
        gamma_p: -phi_s * psi_i,
        eta_p: integral(&|k| p[k] * r[k] * fs[k]) - phi_s * phi2_g,
        lambda_p: integral(&|k| q[k] * r[k] * fi[k]) - psi_i * phi2_g,
        means: [phi_s, psi_i, phi2_g],
    })
}

/// [`initial_covariances`] with the test functions sampled on an `n x n` grid.
pub fn initial_covariances_of(tests: &TestFunctions, initial: &InitialCondition, n: usize) -> Result<CovarianceReport> {
    initial_covariances(&tests.phi.to_grid(n), &tests.psi.to_grid(n), &tests.phi2.to_grid(n), initial)
}

/// Monte Carlo covariance of the initial fluctuation pairings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McCltReport {
    pub n_agents: usize,
    pub replicates: usize,
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    /// Bootstrap standard errors of the covariance entries.
    pub se: [[f64; 3]; 3],
}

/// Per-replicate pairings `sqrt(N) ((mu^S, phi) - m_U)`, `sqrt(N) ((mu^I, psi) - m_V)`,
/// `sqrt(N) ((mu, phi2) - m_Z)` with the limit means `m`.
pub fn initial_pairings(
    n_agents: usize,
    initial: &InitialCondition,
    tests: &TestFunctions,
    means: [f64; 3],
    replicates: usize,
    base_seed: u64,
) -> Result<Vec<[f64; 3]>> {
    let root_n = libm::sqrt(n_agents as f64);
    let w = 1.0 / n_agents as f64;
    (0..replicates as u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(base_seed, r));
            let pop = sample_initial(n_agents, initial, &mut rng)?;
            let mut sums = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
            for (&x, &h) in pop.positions().iter().zip(pop.states()) {
                match h {
                    Health::Susceptible => sums[0].add(w * tests.phi.value(x)),
                    Health::Infected => sums[1].add(w * tests.psi.value(x)),
                    Health::Recovered => {}
                }
                sums[2].add(w * tests.phi2.value(x));
            }
            Ok([0, 1, 2].map(|k| root_n * (sums[k].value() - means[k])))
        })
        .collect()
}

fn sample_covariance(rows: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let cols: [Vec<f64>; 3] = [0, 1, 2].map(|k| rows.iter().map(|r| r[k]).collect());
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            out[i][j] = covariance(&cols[i], &cols[j]);
            out[j][i] = out[i][j];
        }
    }
    out
}

/// Draws `replicates` initial populations and returns the sample covariance of
/// the three pairings with bootstrap standard errors.
pub fn mc_initial_clt(
    n_agents: usize,
    initial: &InitialCondition,
    tests: &TestFunctions,
    means: [f64; 3],
    replicates: usize,
    bootstrap: usize,
    base_seed: u64,
) -> Result<McCltReport> {
    if replicates < 2 || bootstrap < 2 {
        return Err(invalid("replicates", "need at least two replicates and two bootstrap resamples"));
    }
    let rows = initial_pairings(n_agents, initial, tests, means, replicates, base_seed)?;
    let covariance = sample_covariance(&rows);
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(base_seed, u64::MAX));
    let mut draws: Vec<[[f64; 3]; 3]> = Vec::with_capacity(bootstrap);
    let mut sample = Vec::with_capacity(rows.len());
    for _ in 0..bootstrap {
        sample.clear();
        sample.extend((0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]));
        draws.push(sample_covariance(&sample));
    }
    let mut se = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let xs: Vec<f64> = draws.iter().map(|d| d[i][j]).collect();
            se[i][j] = libm::sqrt(crate::stats::variance(&xs));
        }
    }
    let mean = [0, 1, 2].map(|k| mean(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()));
    Ok(McCltReport { n_agents, replicates, mean, covariance, se })
}
