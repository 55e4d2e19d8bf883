//! Galerkin solutions of the linear fluctuation system: Monte Carlo paths and
//! the exact variance of a single pairing through the backward dual system.
//!
//! Noise is spatial white noise on the grid cells, projected to the band:
//!
//! ```text
//! dW1 = -sqrt(J) xi_J - div(sqrt(2 gamma f_S) xi_S)
//! dW2 = +sqrt(J) xi_J - div(sqrt(2 gamma f_I) xi_I) - sqrt(alpha f_I) xi_rec
//! dH  = -div(sqrt(2 gamma f_S) xi_S + sqrt(2 gamma f_I) xi_I + sqrt(2 gamma f_R) xi_R)
//! ```
//!
//! with `J` the infection intensity. Pairing with band-limited test functions
//! reproduces the quadratic variations and covariations of the limit noises.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::fluctuations::linear::{LinearFrame, LinearizedSystem};
use crate::grid::GridField;
use crate::math::CompensatedSum;
use crate::spectral::SpectralField;

/// Which component a pairing or terminal condition refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Component {
    U,
    V,
    Z,
}

/// Band-limited grid values of `(U, V, Z)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub time: f64,
    pub u: GridField,
    pub v: GridField,
    pub z: GridField,
}

impl GalerkinState {
    pub fn component(&self, c: Component) -> &GridField {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
            Component::Z => &self.z,
        }
    }
}

/// Recorded states of one Monte Carlo path.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinPath {
    pub states: Vec<GalerkinState>,
}

impl GalerkinPath {
    /// Basis coefficients of one component at every recorded time.
    pub fn coefficients(&self, system: &LinearizedSystem, c: Component) -> Result<Vec<SpectralField>> {
        self.states.iter().map(|s| system.coefficients(s.component(c))).collect()
    }
}

fn gaussian_field<R: Rng + ?Sized>(n: usize, sd: f64, amplitude: &GridField, rng: &mut R) -> GridField {
    let values = amplitude
        .values()
        .iter()
        .map(|&a| {
            let z: f64 = StandardNormal.sample(rng);
            sd * libm::sqrt(a.max(0.0)) * z
        })
        .collect();
    GridField::new(n, values).expect("finite noise")
}

fn axpy(u: &GridField, c: f64, d: &GridField) -> GridField {
    u.zip_with(d, |a, b| a + c * b).expect("fields share one grid")
}

/// Composite Simpson rule on equally spaced samples; the trapezoid rule
/// closes an odd number of intervals.
fn simpson(values: &[f64], h: f64) -> f64 {
    let intervals = values.len().saturating_sub(1);
    let paired = intervals - intervals % 2;
    let mut acc = CompensatedSum::new();
    for j in (0..paired).step_by(2) {
        acc.add(h / 3.0 * (values[j] + 4.0 * values[j + 1] + values[j + 2]));
    }
    if paired < intervals {
        acc.add(0.5 * h * (values[intervals - 1] + values[intervals]));
    }
    acc.value()
}

impl LinearizedSystem {
    /// Draws `(U_0, V_0, Z_0)` from the Gaussian limit of the initial fluctuations:
    /// `Z_0 = sqrt(g) zeta1 - g (sqrt(g) zeta1, 1)`,
    /// `U_0 = (f_S0 / g) Z_0 - sqrt((1 - p) f_I0) zeta2`,
    /// `V_0 = (f_I0 / g) Z_0 + sqrt((1 - p) f_I0) zeta2`.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> GalerkinState {
        let n = self.n();
        let frame = self.frame(0);
        let sd = n as f64;
        let bridge = gaussian_field(n, sd, &frame.f, rng);
        let mass = bridge.mass();
        let z = bridge.zip_with(&frame.f, |x, g| x - g * mass).expect("same grid");
        let share = frame.f_i.map(|x| (1.0 - self.p) * x);
        let zeta = gaussian_field(n, sd, &share, rng);
        let u = GridField::new(
            n,
            (0..n * n)
                .map(|k| frame.f_s.values()[k] / frame.f.values()[k] * z.values()[k] - zeta.values()[k])
                .collect(),
        )
        .expect("finite");
        let v = GridField::new(
            n,
            (0..n * n)
                .map(|k| frame.f_i.values()[k] / frame.f.values()[k] * z.values()[k] + zeta.values()[k])
                .collect(),
        )
        .expect("finite");
        let (u, v) = self.heat_project_pair(&u, &v, 0.0);
        GalerkinState { time: 0.0, u, v, z: self.project(&z) }
    }

    /// `beta (G_I* u + G_S* v - source)` at one frame.
    fn infection_flux(&self, frame: &LinearFrame, u: &GridField, v: &GridField, source: &GridField) -> Result<GridField> {
        let gs = self.apply_g_s_adjoint(frame, v)?;
        let beta = self.beta;
        Ok(GridField::new(
            u.n(),
            (0..u.n() * u.n())
                .map(|k| beta * (frame.a.values()[k] * u.values()[k] + gs.values()[k] - source.values()[k]))
                .collect(),
        )?)
    }

    fn reaction_rhs(
        &self,
        frame: &LinearFrame,
        u: &GridField,
        v: &GridField,
        source: &GridField,
    ) -> Result<(GridField, GridField)> {
        let flux = self.infection_flux(frame, u, v, source)?;
        let alpha = self.alpha;
        Ok((flux.map(|x| -x), flux.zip_with(v, |f, x| f - alpha * x)?))
    }

    /// Noise spectra `(dW1, dW2, dH)` over a step of length `dt`, amplitudes at `frame`.
    fn noise_spectra<R: Rng + ?Sized>(
        &self,
        frame: &LinearFrame,
        dt: f64,
        rng: &mut R,
    ) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let n = self.n();
        // Cell white noise has variance dt / h^2.
        let sd = libm::sqrt(dt) * n as f64;
        let two_gamma = 2.0 * self.gamma;
        let rec_amp = frame.f_i.map(|x| self.alpha * x);
        let jump = gaussian_field(n, sd, &frame.jump, rng);
        let rec = gaussian_field(n, sd, &rec_amp, rng);
        let (jump_hat, rec_hat) = self.split_pair(&self.forward_pair(&jump, &rec));
        let size = n * n;
        let mut w1: Vec<Complex64> = jump_hat.iter().map(|&c| -c).collect();
        let mut w2: Vec<Complex64> = jump_hat.iter().zip(&rec_hat).map(|(&j, &r)| j - r).collect();
        let mut hz = vec![Complex64::new(0.0, 0.0); size];
        if self.gamma > 0.0 {
            let wave = self.wave();
            let i = Complex64::new(0.0, 1.0);
            for (class, density) in [(0, &frame.f_s), (1, &frame.f_i), (2, &frame.f_r)] {
                let amp = density.map(|x| two_gamma * x);
                let e1 = gaussian_field(n, sd, &amp, rng);
                let e2 = gaussian_field(n, sd, &amp, rng);
                let (h1, h2) = self.split_pair(&self.forward_pair(&e1, &e2));
                for k in 0..size {
                    let div = i * (h1[k] * wave[k][0] + h2[k] * wave[k][1]);
                    hz[k] -= div;
                    match class {
                        0 => w1[k] -= div,
                        1 => w2[k] -= div,
                        _ => {}
                    }
                }
            }
        }
        (w1, w2, hz)
    }

    /// One step of the Galerkin system: half heat flow, RK4 on the coupling
    /// terms with `Z` held at its post-flow value, noise, half heat flow.
    fn advance<R: Rng + ?Sized>(&self, state: &GalerkinState, k: usize, with_uv: bool, rng: &mut R) -> Result<GalerkinState> {
        let dt = self.dt;
        let (start, mid, end) = (self.half_frame(2 * k), self.half_frame(2 * k + 1), self.half_frame(2 * k + 2));
        let frozen = self.gamma == 0.0;
        let z_half = if frozen { state.z.clone() } else { self.project_heat(&state.z, 0.5 * dt) };
        let (mut u, mut v) = (state.u.clone(), state.v.clone());
        if with_uv {
            let (u0, v0) = self.heat_project_pair(&state.u, &state.v, 0.5 * dt);
            let source = self.apply_g_si_adjoint(mid, &z_half)?;
            let (ku1, kv1) = self.reaction_rhs(start, &u0, &v0, &source)?;
            let (ku2, kv2) = self.reaction_rhs(mid, &axpy(&u0, 0.5 * dt, &ku1), &axpy(&v0, 0.5 * dt, &kv1), &source)?;
            let (ku3, kv3) = self.reaction_rhs(mid, &axpy(&u0, 0.5 * dt, &ku2), &axpy(&v0, 0.5 * dt, &kv2), &source)?;
            let (ku4, kv4) = self.reaction_rhs(end, &axpy(&u0, dt, &ku3), &axpy(&v0, dt, &kv3), &source)?;
            let combine = |x: &GridField, k1: &GridField, k2: &GridField, k3: &GridField, k4: &GridField| {
                GridField::new(
                    x.n(),
                    (0..x.n() * x.n())
                        .map(|j| {
                            x.values()[j]
                                + dt / 6.0
                                    * (k1.values()[j] + 2.0 * k2.values()[j] + 2.0 * k3.values()[j] + k4.values()[j])
                        })
                        .collect(),
                )
            };
            u = combine(&u0, &ku1, &ku2, &ku3, &ku4)?;
            v = combine(&v0, &kv1, &kv2, &kv3, &kv4)?;
        }
        let (w1, w2, hz) = self.noise_spectra(mid, dt, rng);
        let symbol = self.band_heat_symbol(0.5 * dt);
        let z = if frozen {
            state.z.clone()
        } else {
            let mut zs = self.forward_pair(&z_half, &z_half);
            for j in 0..zs.len() {
                zs[j] = (zs[j] + hz[j]) * symbol[j];
            }
            let zero = vec![Complex64::new(0.0, 0.0); zs.len()];
            self.backward_pair(&zs, &zero).0
        };
        if with_uv {
            let (uh, vh) = self.split_pair(&self.forward_pair(&u, &v));
            let mut us = uh;
            let mut vs = vh;
            for j in 0..us.len() {
                us[j] = (us[j] + w1[j]) * symbol[j];
                vs[j] = (vs[j] + w2[j]) * symbol[j];
            }
            let (a, b) = self.backward_pair(&us, &vs);
            u = a;
            v = b;
        }
        Ok(GalerkinState { time: (k + 1) as f64 * dt, u, v, z })
    }

    fn project_heat(&self, u: &GridField, t: f64) -> GridField {
        self.heat_project_pair(u, u, t).0
    }

    fn run_path<R: Rng + ?Sized>(&self, initial: GalerkinState, record_every: usize, with_uv: bool, rng: &mut R) -> Result<GalerkinPath> {
        if record_every == 0 {
            return Err(invalid("record_every", "must be positive"));
        }
        let mut states = vec![initial.clone()];
        let mut state = initial;
        for k in 0..self.steps() {
            state = self.advance(&state, k, with_uv, rng)?;
            if (k + 1) % record_every == 0 || k + 1 == self.steps() {
                states.push(state.clone());
            }
        }
        Ok(GalerkinPath { states })
    }

    /// Path of `Z` alone from `z0`, recorded every `record_every` steps and at the horizon.
    pub fn galerkin_solve_z<R: Rng + ?Sized>(&self, z0: &GridField, record_every: usize, rng: &mut R) -> Result<GalerkinPath> {
        let zero = GridField::zeros(self.n());
        let initial = GalerkinState { time: 0.0, u: zero.clone(), v: zero, z: self.project(z0) };
        self.run_path(initial, record_every, false, rng)
    }

    /// Joint path of `(U, V, Z)` from `initial`.
    pub fn galerkin_solve_uv<R: Rng + ?Sized>(&self, initial: GalerkinState, record_every: usize, rng: &mut R) -> Result<GalerkinPath> {
        self.run_path(initial, record_every, true, rng)
    }

    /// Variance of `(U_0, a) + (V_0, b) + (Z_0, c)` under the initial Gaussian limit.
    pub fn initial_variance(&self, a: &GridField, b: &GridField, c: &GridField) -> Result<f64> {
        let frame = self.frame(0);
        let n = self.n();
        let h2 = 1.0 / (n * n) as f64;
        let mut second = CompensatedSum::new();
        let mut first = CompensatedSum::new();
        let mut bernoulli = CompensatedSum::new();
        for k in 0..n * n {
            let w = a.values()[k] * frame.f_s.values()[k] + b.values()[k] * frame.f_i.values()[k] + c.values()[k] * frame.f.values()[k];
            first.add(h2 * w);
            second.add(h2 * w * w / frame.f.values()[k]);
            let d = b.values()[k] - a.values()[k];
            bernoulli.add(h2 * (1.0 - self.p) * frame.f_i.values()[k] * d * d);
        }
        Ok(second.value() - first.value() * first.value() + bernoulli.value())
    }

    /// Rate of the noise variance accumulated by `(a, dW1) + (b, dW2) + (c, dH)` at `frame`.
    fn noise_rate(&self, frame: &LinearFrame, a: &GridField, b: &GridField, c: &GridField) -> Result<f64> {
        let n = self.n();
        let h2 = 1.0 / (n * n) as f64;
        let mut acc = CompensatedSum::new();
        for k in 0..n * n {
            let (av, bv) = (a.values()[k], b.values()[k]);
            let d = bv - av;
            acc.add(h2 * (frame.jump.values()[k] * d * d + self.alpha * frame.f_i.values()[k] * bv * bv));
        }
        if self.gamma > 0.0 {
            let ac = a.zip_with(c, |x, y| x + y)?;
            let bc = b.zip_with(c, |x, y| x + y)?;
            let grads = [self.gradient(&ac), self.gradient(&bc), self.gradient(c)];
            let densities = [&frame.f_s, &frame.f_i, &frame.f_r];
            for (g, rho) in grads.iter().zip(densities) {
                for k in 0..n * n {
                    let sq = g.0.values()[k] * g.0.values()[k] + g.1.values()[k] * g.1.values()[k];
                    acc.add(h2 * 2.0 * self.gamma * rho.values()[k] * sq);
                }
            }
        }
        Ok(acc.value())
    }

    /// Spectral gradient of a band-limited field.
    fn gradient(&self, u: &GridField) -> (GridField, GridField) {
        let (hat, _) = self.split_pair(&self.forward_pair(u, u));
        let i = Complex64::new(0.0, 1.0);
        let wave = self.wave();
        let d1: Vec<Complex64> = hat.iter().zip(wave).map(|(&c, w)| i * w[0] * c).collect();
        let d2: Vec<Complex64> = hat.iter().zip(wave).map(|(&c, w)| i * w[1] * c).collect();
        self.backward_pair(&d1, &d2)
    }

    /// Right side of the backward dual system at `frame`:
    /// `a' = -gamma Lap a + beta G_I (a - b)`, `b' = -gamma Lap b + beta G_S (a - b) + alpha b`,
    /// `c' = -gamma Lap c - beta G_SI (a - b)`; the Laplacian parts are handled by the flow.
    fn dual_rhs(&self, frame: &LinearFrame, a: &GridField, b: &GridField) -> Result<(GridField, GridField, GridField)> {
        let d = a.zip_with(b, |x, y| x - y)?;
        let beta = self.beta;
        let da = self.apply_g_i(frame, &d).map(|x| beta * x);
        let smoothed = self.ops().convolve(&d.zip_with(&frame.f_s, |x, y| x * y)?)?;
        let gs = smoothed.zip_with(&frame.inv_kf, |x, y| x * y)?;
        let alpha = self.alpha;
        let db = gs.zip_with(b, |g, x| beta * g + alpha * x)?;
        let weight = frame.f_i.zip_with(&frame.inv_kf, |x, y| x * y * y)?;
        let dc = self.ops().convolve(&weight.zip_with(&smoothed, |x, y| x * y)?)?.map(|x| -beta * x);
        Ok((da, db, dc))
    }

    /// Exact variance of the Galerkin pairing `(X_T, psi)` for the component `X`:
    /// the dual test functions `(a, b, c)` are carried backward from the horizon,
    /// and the variance is the initial part plus the time integral of the noise
    /// rate (composite Simpson rule on the step grid).
    pub fn adjoint_variance(&self, psi: &GridField, component: Component) -> Result<f64> {
        psi.check_same(&GridField::zeros(self.n()))?;
        let zero = GridField::zeros(self.n());
        let target = self.project(psi);
        let (mut a, mut b, mut c) = match component {
            Component::U => (target, zero.clone(), zero),
            Component::V => (zero.clone(), target, zero),
            Component::Z => (zero.clone(), zero, target),
        };
        let dt = self.dt;
        // rates[k] is the noise rate at t = k dt.
        let mut rates = vec![0.0; self.steps() + 1];
        rates[self.steps()] = self.noise_rate(self.frame(self.steps()), &a, &b, &c)?;
        for k in (0..self.steps()).rev() {
            let (start, mid, end) = (self.half_frame(2 * k + 2), self.half_frame(2 * k + 1), self.half_frame(2 * k));
            let (a0, b0) = self.heat_project_pair(&a, &b, 0.5 * dt);
            let c0 = self.project_heat(&c, 0.5 * dt);
            // Backward in time: y(t - s) solves dy/ds = -F(y).
            let step = |x: &GridField, s: f64, d: &GridField| axpy(x, -s, d);
            let (ka1, kb1, kc1) = self.dual_rhs(start, &a0, &b0)?;
            let (ka2, kb2, kc2) = self.dual_rhs(mid, &step(&a0, 0.5 * dt, &ka1), &step(&b0, 0.5 * dt, &kb1))?;
            let (ka3, kb3, kc3) = self.dual_rhs(mid, &step(&a0, 0.5 * dt, &ka2), &step(&b0, 0.5 * dt, &kb2))?;
            let (ka4, kb4, kc4) = self.dual_rhs(end, &step(&a0, dt, &ka3), &step(&b0, dt, &kb3))?;
            let combine = |x: &GridField, k1: &GridField, k2: &GridField, k3: &GridField, k4: &GridField| {
                GridField::new(
                    x.n(),
                    (0..x.n() * x.n())
                        .map(|j| {
                            x.values()[j]
                                - dt / 6.0
                                    * (k1.values()[j] + 2.0 * k2.values()[j] + 2.0 * k3.values()[j] + k4.values()[j])
                        })
                        .collect(),
                )
            };
            let a1 = combine(&a0, &ka1, &ka2, &ka3, &ka4)?;
            let b1 = combine(&b0, &kb1, &kb2, &kb3, &kb4)?;
            let c1 = combine(&c0, &kc1, &kc2, &kc3, &kc4)?;
            let (a2, b2) = self.heat_project_pair(&a1, &b1, 0.5 * dt);
            a = a2;
            b = b2;
            c = self.project_heat(&c1, 0.5 * dt);
            rates[k] = self.noise_rate(end, &a, &b, &c)?;
        }
        Ok(self.initial_variance(&a, &b, &c)? + simpson(&rates, dt))
    }
}
