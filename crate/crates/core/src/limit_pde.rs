//! Deterministic limit: heat flow of the total density and the coupled
//! reaction-diffusion system for the susceptible and infected densities,
//!
//! ```text
//! d f_S = gamma Lap f_S - G,   d f_I = gamma Lap f_I + G - alpha f_I,
//! G = beta f_S K*(f_I / K*f),  f(t) = heat(t) g.
//! ```

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::Fft2;
use crate::grid::GridField;
use crate::math::{CompensatedSum, PI};
use crate::simulator::config::{check_rates, check_times, InitialCondition};
use crate::torus::{KernelSpec, TorusPoint};

/// Floor below which `K*f` is reported as degenerate.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Floor below which a density counts as negative.
pub const NEGATIVITY_FLOOR: f64 = -1e-8;

fn check_resolution(n: usize, kernel: &KernelSpec) -> Result<()> {
    if let Some(radius) = kernel.support_radius() {
        let spacing = 1.0 / n as f64;
        if spacing > radius / 4.0 {
            return Err(Error::KernelResolution { spacing, radius });
        }
    }
    Ok(())
}

/// Kernel convolution and heat multipliers on one periodic grid.
#[derive(Debug, Clone)]
pub struct GridOperators {
    n: usize,
    fft: Fft2,
    /// Transform of `h^2 K(., 0)` divided by `n^2`; real because the kernel is even.
    kernel_symbol: Vec<f64>,
    /// `4 pi^2 |k|^2` per wrapped frequency.
    laplace_symbol: Vec<f64>,
}

impl GridOperators {
    pub fn new(n: usize, kernel: &KernelSpec) -> Result<Self> {
        kernel.validate()?;
        check_resolution(n, kernel)?;
        let fft = Fft2::new(n)?;
        let h = 1.0 / n as f64;
        let origin = TorusPoint::ORIGIN;
        let profile = GridField::from_fn(n, |p| kernel.eval(p, origin));
        let mut spec: Vec<Complex64> = profile.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut spec);
        let scale = h * h / (n * n) as f64;
        let kernel_symbol = spec.iter().map(|c| c.re * scale).collect();
        let freq = |i: usize| -> f64 {
            let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            k * k
        };
        let mut laplace_symbol = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                laplace_symbol.push(4.0 * PI * PI * (freq(i1) + freq(i2)));
            }
        }
        Ok(Self { n, fft, kernel_symbol, laplace_symbol })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn kernel_symbol(&self) -> &[f64] {
        &self.kernel_symbol
    }

    pub fn laplace_symbol(&self) -> &[f64] {
        &self.laplace_symbol
    }

    fn check(&self, field: &GridField) -> Result<()> {
        if field.n() != self.n {
            return Err(Error::GridMismatch { expected: self.n, found: field.n() });
        }
        Ok(())
    }

    fn pack(a: &GridField, b: &GridField) -> Vec<Complex64> {
        a.values().iter().zip(b.values()).map(|(&x, &y)| Complex64::new(x, y)).collect()
    }

    fn unpack(&self, data: &[Complex64]) -> (GridField, GridField) {
        (
            GridField::from_raw(self.n, data.iter().map(|c| c.re).collect()),
            GridField::from_raw(self.n, data.iter().map(|c| c.im).collect()),
        )
    }

    /// Applies a real even multiplier to two real fields at once.
    fn filter_pair(&self, a: &GridField, b: &GridField, symbol: impl Fn(usize) -> f64) -> Result<(GridField, GridField)> {
        self.check(a)?;
        self.check(b)?;
        let mut data = Self::pack(a, b);
        self.fft.forward(&mut data);
        let inv = 1.0 / (self.n * self.n) as f64;
        for (i, c) in data.iter_mut().enumerate() {
            *c *= symbol(i) * inv;
        }
        self.fft.backward(&mut data);
        Ok(self.unpack(&data))
    }

    /// `(K*u)(x) = h^2 sum_y K(x, y) u(y)`.
    pub fn convolve(&self, u: &GridField) -> Result<GridField> {
        Ok(self.convolve_pair(u, u)?.0)
    }

    pub fn convolve_pair(&self, a: &GridField, b: &GridField) -> Result<(GridField, GridField)> {
        let n2 = (self.n * self.n) as f64;
        self.filter_pair(a, b, |i| self.kernel_symbol[i] * n2)
    }

    /// Exact heat semigroup on the grid modes for time `t`.
    pub fn heat_pair(&self, a: &GridField, b: &GridField, gamma: f64, t: f64) -> Result<(GridField, GridField)> {
        if gamma == 0.0 || t == 0.0 {
            self.check(a)?;
            self.check(b)?;
            return Ok((a.clone(), b.clone()));
        }
        self.filter_pair(a, b, |i| libm::exp(-gamma * t * self.laplace_symbol[i]))
    }

    pub fn heat(&self, u: &GridField, gamma: f64, t: f64) -> Result<GridField> {
        Ok(self.heat_pair(u, u, gamma, t)?.0)
    }

    /// Spectrum `FFT(u) / n^2` of a real field.
    pub fn spectrum(&self, u: &GridField) -> Result<Vec<Complex64>> {
        self.check(u)?;
        let mut data: Vec<Complex64> = u.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        let inv = 1.0 / (self.n * self.n) as f64;
        for c in &mut data {
            *c *= inv;
        }
        Ok(data)
    }

    /// `(heat(t) g, K * heat(t) g)` from the spectrum of `g`.
    pub fn heat_and_smooth(&self, g_spectrum: &[Complex64], gamma: f64, t: f64) -> (GridField, GridField) {
        let n2 = (self.n * self.n) as f64;
        // Both targets have Hermitian spectra, so one backward transform yields both.
        let mut data: Vec<Complex64> = g_spectrum
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let d = c * libm::exp(-gamma * t * self.laplace_symbol[i]);
                d + Complex64::new(0.0, 1.0) * d * (self.kernel_symbol[i] * n2)
            })
            .collect();
        self.fft.backward(&mut data);
        self.unpack(&data)
    }
}

/// `K*u` through fast transforms.
pub fn kernel_convolve(field: &GridField, kernel: &KernelSpec) -> Result<GridField> {
    GridOperators::new(field.n(), kernel)?.convolve(field)
}

/// `K*u` by the direct double sum.
pub fn kernel_convolve_direct(field: &GridField, kernel: &KernelSpec) -> Result<GridField> {
    kernel.validate()?;
    let n = field.n();
    check_resolution(n, kernel)?;
    let h2 = field.spacing() * field.spacing();
    let weights = GridField::from_fn(n, |p| kernel.eval(p, TorusPoint::ORIGIN));
    let mut out = vec![0.0; n * n];
    for i1 in 0..n {
        for i2 in 0..n {
            let mut acc = CompensatedSum::new();
            for j1 in 0..n {
                for j2 in 0..n {
                    let w = weights.at((i1 + n - j1) % n, (i2 + n - j2) % n);
                    if w != 0.0 {
                        acc.add(w * field.at(j1, j2));
                    }
                }
            }
            out[i1 * n + i2] = acc.value() * h2;
        }
    }
    GridField::new(n, out)
}

/// Heat semigroup over `dt` on the grid; the identity when `gamma = 0`.
pub fn heat_step(field: &GridField, dt: f64, gamma: f64) -> Result<GridField> {
    if !(dt >= 0.0 && gamma >= 0.0) {
        return Err(invalid("dt", "time step and gamma must be non-negative"));
    }
    if gamma == 0.0 || dt == 0.0 {
        return Ok(field.clone());
    }
    let fft = Fft2::new(field.n())?;
    let n = field.n();
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut data);
    let inv = 1.0 / (n * n) as f64;
    let freq = |i: usize| -> f64 {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        k * k
    };
    for i1 in 0..n {
        for i2 in 0..n {
            data[i1 * n + i2] *= libm::exp(-gamma * dt * 4.0 * PI * PI * (freq(i1) + freq(i2))) * inv;
        }
    }
    fft.backward(&mut data);
    Ok(GridField::from_raw(n, data.iter().map(|c| c.re).collect()))
}

fn check_denominator(smoothed: &GridField) -> Result<()> {
    let m = smoothed.min();
    if !(m >= DENOMINATOR_FLOOR) {
        return Err(Error::DegenerateDenominator { value: m });
    }
    Ok(())
}

/// `beta f_S K*(f_I / K*f)` given the already smoothed `K*f`.
pub fn infection_term_with(ops: &GridOperators, f_s: &GridField, f_i: &GridField, smoothed_f: &GridField, beta: f64) -> Result<GridField> {
    check_denominator(smoothed_f)?;
    let ratio = f_i.zip_with(smoothed_f, |a, b| a / b)?;
    let conv = ops.convolve(&ratio)?;
    conv.zip_with(f_s, |c, s| beta * s * c)
}

/// `beta f_S K*(f_I / K*f)` pointwise on the grid.
pub fn infection_term(f_s: &GridField, f_i: &GridField, f: &GridField, kernel: &KernelSpec, beta: f64) -> Result<GridField> {
    let ops = GridOperators::new(f.n(), kernel)?;
    let smoothed = ops.convolve(f)?;
    infection_term_with(&ops, f_s, f_i, &smoothed, beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub n_grid: usize,
    pub dt: f64,
    pub horizon: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub initial: InitialCondition,
    /// Times at which frames are stored; the solver lands on each exactly.
    pub output_times: Vec<f64>,
}

impl PdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_grid >= 64 && self.n_grid.is_power_of_two()) {
            return Err(invalid("n_grid", "must be a power of two >= 64"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(invalid("dt", "must lie in (0, 0.01]"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid("horizon", "must be finite and non-negative"));
        }
        check_rates(self.beta, self.alpha, self.gamma)?;
        check_times(&self.output_times, self.horizon, "output_times")?;
        self.kernel.validate()?;
        check_resolution(self.n_grid, &self.kernel)?;
        self.initial.validate()
    }

    /// Output times at every multiple of `every` up to the horizon.
    pub fn uniform_outputs(horizon: f64, every: f64) -> Vec<f64> {
        let steps = libm::round(horizon / every) as usize;
        (0..=steps).map(|k| (k as f64 * every).min(horizon)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeFrame {
    pub time: f64,
    pub f_s: GridField,
    pub f_i: GridField,
    pub f: GridField,
}

/// Per-step records, starting at `t = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PdeDiagnostics {
    pub times: Vec<f64>,
    pub mass_s: Vec<f64>,
    pub mass_i: Vec<f64>,
    /// `alpha * integral of M_I` accumulated with the integrator's stage weights.
    pub recovered: Vec<f64>,
    pub min_s: Vec<f64>,
    pub min_i: Vec<f64>,
    /// `max(f_S + f_I - f)` over the grid.
    pub order_excess: Vec<f64>,
    pub f_min: Vec<f64>,
    pub f_max: Vec<f64>,
}

impl PdeDiagnostics {
    fn record(&mut self, t: f64, f_s: &GridField, f_i: &GridField, f: &GridField, recovered: f64) {
        self.times.push(t);
        self.mass_s.push(f_s.mass());
        self.mass_i.push(f_i.mass());
        self.recovered.push(recovered);
        self.min_s.push(f_s.min());
        self.min_i.push(f_i.min());
        let excess = f_s
            .values()
            .iter()
            .zip(f_i.values())
            .zip(f.values())
            .map(|((s, i), g)| s + i - g)
            .fold(f64::NEG_INFINITY, f64::max);
        self.order_excess.push(excess);
        self.f_min.push(f.min());
        self.f_max.push(f.max());
    }

    /// `|dM_S + dM_I + alpha int M_I| / T` over the whole run.
    pub fn mass_balance_defect(&self) -> f64 {
        let k = self.times.len() - 1;
        let span = self.times[k] - self.times[0];
        if span == 0.0 {
            return 0.0;
        }
        let d = (self.mass_s[k] - self.mass_s[0]) + (self.mass_i[k] - self.mass_i[0]) + self.recovered[k];
        libm::fabs(d) / span
    }

    /// Same defect with `int M_I` from the trapezoid rule on the step records.
    pub fn trapezoid_mass_balance_defect(&self, alpha: f64) -> f64 {
        let k = self.times.len() - 1;
        let span = self.times[k] - self.times[0];
        if span == 0.0 {
            return 0.0;
        }
        let mut integral = CompensatedSum::new();
        for j in 0..k {
            integral.add(0.5 * (self.times[j + 1] - self.times[j]) * (self.mass_i[j] + self.mass_i[j + 1]));
        }
        let d = (self.mass_s[k] - self.mass_s[0]) + (self.mass_i[k] - self.mass_i[0]) + alpha * integral.value();
        libm::fabs(d) / span
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub frames: Vec<PdeFrame>,
    pub diagnostics: PdeDiagnostics,
}

impl PdeSolution {
    /// Frame stored at `t` (within `1e-9`).
    pub fn frame_at(&self, t: f64) -> Option<&PdeFrame> {
        self.frames.iter().find(|f| libm::fabs(f.time - t) <= 1e-9)
    }
}

struct Reaction<'a> {
    ops: &'a GridOperators,
    beta: f64,
    alpha: f64,
}

impl Reaction<'_> {
    /// Right-hand side `(-G, G - alpha f_I)` and the mass of `f_I`.
    fn rhs(&self, f_s: &GridField, f_i: &GridField, smoothed_f: &GridField) -> Result<(GridField, GridField, f64)> {
        let g = infection_term_with(self.ops, f_s, f_i, smoothed_f, self.beta)?;
        let ds = g.map(|v| -v);
        let alpha = self.alpha;
        let di = g.zip_with(f_i, |gv, iv| gv - alpha * iv)?;
        Ok((ds, di, f_i.mass()))
    }

    /// Classical RK4 over one step; `smoothed` holds `K*f` at the start, middle and end.
    fn rk4(&self, f_s: &GridField, f_i: &GridField, smoothed: [&GridField; 3], h: f64) -> Result<(GridField, GridField, f64)> {
        let axpy = |u: &GridField, c: f64, d: &GridField| u.zip_with(d, |a, b| a + c * b);
        let (ks1, ki1, m1) = self.rhs(f_s, f_i, smoothed[0])?;
        let (s2, i2) = (axpy(f_s, 0.5 * h, &ks1)?, axpy(f_i, 0.5 * h, &ki1)?);
        let (ks2, ki2, m2) = self.rhs(&s2, &i2, smoothed[1])?;
        let (s3, i3) = (axpy(f_s, 0.5 * h, &ks2)?, axpy(f_i, 0.5 * h, &ki2)?);
        let (ks3, ki3, m3) = self.rhs(&s3, &i3, smoothed[1])?;
        let (s4, i4) = (axpy(f_s, h, &ks3)?, axpy(f_i, h, &ki3)?);
        let (ks4, ki4, m4) = self.rhs(&s4, &i4, smoothed[2])?;
        let combine = |u: &GridField, k1: &GridField, k2: &GridField, k3: &GridField, k4: &GridField| {
            let n = u.n();
            let v = u
                .values()
                .iter()
                .enumerate()
                .map(|(j, &x)| x + h / 6.0 * (k1.values()[j] + 2.0 * k2.values()[j] + 2.0 * k3.values()[j] + k4.values()[j]))
                .collect();
            GridField::from_raw(n, v)
        };
        let recovered = self.alpha * h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        Ok((combine(f_s, &ks1, &ks2, &ks3, &ks4), combine(f_i, &ki1, &ki2, &ki3, &ki4), recovered))
    }
}

fn check_sign(f_s: &GridField, f_i: &GridField, t: f64) -> Result<()> {
    let m = f_s.min().min(f_i.min());
    if !(m >= NEGATIVITY_FLOOR) {
        return Err(Error::Negativity { value: m, time: t });
    }
    Ok(())
}

/// Step schedule: uniform steps of `dt`, shortened to land on every output time.
fn schedule(config: &PdeConfig) -> Vec<f64> {
    let mut stops = Vec::new();
    let mut t = 0.0;
    let mut targets: Vec<f64> = config.output_times.clone();
    targets.push(config.horizon);
    for target in targets {
        while target - t > 1e-12 {
            let h = config.dt.min(target - t);
            t = if target - (t + h) <= 1e-12 { target } else { t + h };
            stops.push(t);
        }
    }
    stops
}

/// Strang splitting: half heat step, RK4 reaction, half heat step.
pub fn solve(config: &PdeConfig) -> Result<PdeSolution> {
    config.validate()?;
    let ops = GridOperators::new(config.n_grid, &config.kernel)?;
    let (mut f_s, mut f_i, g) = config.initial.fields(config.n_grid);
    let g_spec = ops.spectrum(&g)?;
    let reaction = Reaction { ops: &ops, beta: config.beta, alpha: config.alpha };
    let gamma = config.gamma;
    let mut out = Outputs::new(config);
    let (mut f_now, mut smooth_now) = ops.heat_and_smooth(&g_spec, gamma, 0.0);
    check_denominator(&smooth_now)?;
    let mut recovered = 0.0;
    out.push(0.0, &f_s, &f_i, &f_now, recovered);
    let mut t = 0.0;
    for stop in schedule(config) {
        let h = stop - t;
        let (_, smooth_mid) = ops.heat_and_smooth(&g_spec, gamma, t + 0.5 * h);
        let (f_end, smooth_end) = ops.heat_and_smooth(&g_spec, gamma, stop);
        let (a, b) = ops.heat_pair(&f_s, &f_i, gamma, 0.5 * h)?;
        let (a, b, rec) = reaction.rk4(&a, &b, [&smooth_now, &smooth_mid, &smooth_end], h)?;
        let (a, b) = ops.heat_pair(&a, &b, gamma, 0.5 * h)?;
        f_s = a;
        f_i = b;
        recovered += rec;
        check_sign(&f_s, &f_i, stop)?;
        f_now = f_end;
        smooth_now = smooth_end;
        t = stop;
        out.push(t, &f_s, &f_i, &f_now, recovered);
    }
    Ok(out.finish())
}

/// Frozen-agent limit: `f = g` for all time, RK4 with `K*g` computed once.
pub fn solve_gamma_zero(config: &PdeConfig) -> Result<PdeSolution> {
    config.validate()?;
    if config.gamma != 0.0 {
        return Err(invalid("gamma", "solve_gamma_zero requires gamma = 0"));
    }
    let ops = GridOperators::new(config.n_grid, &config.kernel)?;
    let (mut f_s, mut f_i, g) = config.initial.fields(config.n_grid);
    let smoothed = ops.convolve(&g)?;
    check_denominator(&smoothed)?;
    let reaction = Reaction { ops: &ops, beta: config.beta, alpha: config.alpha };
    let mut out = Outputs::new(config);
    let mut recovered = 0.0;
    out.push(0.0, &f_s, &f_i, &g, recovered);
    let mut t = 0.0;
    for stop in schedule(config) {
        let (a, b, rec) = reaction.rk4(&f_s, &f_i, [&smoothed, &smoothed, &smoothed], stop - t)?;
        f_s = a;
        f_i = b;
        recovered += rec;
        check_sign(&f_s, &f_i, stop)?;
        t = stop;
        out.push(t, &f_s, &f_i, &g, recovered);
    }
    Ok(out.finish())
}

struct Outputs<'a> {
    config: &'a PdeConfig,
    next: usize,
    solution: PdeSolution,
}

impl<'a> Outputs<'a> {
    fn new(config: &'a PdeConfig) -> Self {
        Self { config, next: 0, solution: PdeSolution { frames: Vec::new(), diagnostics: PdeDiagnostics::default() } }
    }

    fn push(&mut self, t: f64, f_s: &GridField, f_i: &GridField, f: &GridField, recovered: f64) {
        self.solution.diagnostics.record(t, f_s, f_i, f, recovered);
        while self.next < self.config.output_times.len() && libm::fabs(self.config.output_times[self.next] - t) <= 1e-12 {
            self.solution.frames.push(PdeFrame { time: self.config.output_times[self.next], f_s: f_s.clone(), f_i: f_i.clone(), f: f.clone() });
            self.next += 1;
        }
    }

    fn finish(self) -> PdeSolution {
        self.solution
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::Region;
    use crate::simulator::config::Density;
    use crate::spectral::{project_grid, BasisIndex, TrigPolynomial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump() -> KernelSpec {
        KernelSpec::bump(0.2, 4).unwrap()
    }

    fn config(beta: f64, alpha: f64, gamma: f64) -> PdeConfig {
        PdeConfig {
            n_grid: 64,
            dt: 0.01,
            horizon: 1.0,
            beta,
            alpha,
            gamma,
            kernel: bump(),
            initial: InitialCondition { region: Region::left_half(), p: 0.5, density: Density::Cosine { amplitude: 0.3, axis: 1 } },
            output_times: vec![0.0, 0.5, 1.0],
        }
    }

    #[test]
    fn convolution_paths_agree_on_random_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 64;
        let u = GridField::new(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let fast = kernel_convolve(&u, &bump()).unwrap();
        let slow = kernel_convolve_direct(&u, &bump()).unwrap();
        assert!(fast.sup_distance(&slow).unwrap() < 1e-10);
    }

    #[test]
    fn convolution_of_constant_is_constant_times_discrete_mass() {
        let k = bump();
        let out = kernel_convolve(&GridField::constant(64, 2.0), &k).unwrap();
        let discrete_mass = GridField::from_fn(64, |p| k.eval(p, TorusPoint::ORIGIN)).mass();
        assert!((out.max() - 2.0 * discrete_mass).abs() < 1e-12 && (out.min() - 2.0 * discrete_mass).abs() < 1e-12);
        assert!((discrete_mass - k.total_mass()).abs() < 1e-4);
    }

    #[test]
    fn convolution_of_spike_copies_the_kernel() {
        let n = 64;
        let mut values = vec![0.0; n * n];
        values[10 * n + 50] = (n * n) as f64;
        let out = kernel_convolve(&GridField::new(n, values).unwrap(), &bump()).unwrap();
        let expect = GridField::from_fn(n, |p| bump().eval(p, TorusPoint::wrap(10.0 / 64.0, 50.0 / 64.0).unwrap()));
        assert!(out.sup_distance(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn resolution_guard() {
        assert!(kernel_convolve(&GridField::constant(16, 1.0), &bump()).is_err());
        assert!(kernel_convolve(&GridField::constant(16, 1.0), &KernelSpec::constant(1.0).unwrap()).is_ok());
    }

    #[test]
    fn heat_step_examples() {
        let mode = TrigPolynomial::basis(BasisIndex::new(3, 2, 2).unwrap()).to_grid(64);
        assert_eq!(heat_step(&mode, 0.0, 1.0).unwrap(), mode);
        let c = GridField::constant(64, 0.3);
        assert!(heat_step(&c, 0.7, 1.0).unwrap().sup_distance(&c).unwrap() < 1e-15);
        let decayed = heat_step(&mode, 0.1, 1.0).unwrap();
        let factor = libm::exp(-0.8 * PI * PI);
        assert!(decayed.sup_distance(&mode.scale(factor)).unwrap() < 1e-13);
        assert_eq!(heat_step(&mode, 0.3, 0.0).unwrap(), mode);
    }

    #[test]
    fn heat_preserves_mass_and_positivity() {
        let ind = Region::Disc { center: [0.3, 0.6], radius: 0.1 }.indicator(64);
        let out = heat_step(&ind, 0.01, 0.05).unwrap();
        assert!((out.mass() - ind.mass()).abs() < 1e-14);
        assert!(out.min() >= -1e-10);
    }

    #[test]
    fn infection_term_examples() {
        let f = GridField::constant(64, 1.0);
        let f_s = GridField::from_fn(64, |p| 0.5 + 0.2 * libm::sin(2.0 * PI * p.x1()));
        let zero = infection_term(&f_s, &GridField::zeros(64), &f, &bump(), 1.0).unwrap();
        assert_eq!(zero.max(), 0.0);
        let f_i = GridField::from_fn(64, |p| 0.3 + 0.1 * libm::cos(2.0 * PI * p.x2()));
        assert_eq!(infection_term(&f_s, &f_i, &f, &bump(), 0.0).unwrap().max(), 0.0);
        let constant = KernelSpec::constant(1.0).unwrap();
        let term = infection_term(&f_s, &f_i, &f, &constant, 2.0).unwrap();
        let expect = f_s.scale(2.0 * f_i.mass());
        assert!(term.sup_distance(&expect).unwrap() < 1e-12);
        assert!(infection_term(&f_s, &f_i, &GridField::zeros(64), &bump(), 1.0).is_err());
    }

    #[test]
    fn beta_zero_closed_forms() {
        let cfg = config(0.0, 0.7, 0.05);
        let sol = solve(&cfg).unwrap();
        let (s0, i0, _) = cfg.initial.fields(64);
        for frame in &sol.frames {
            let exact_s = heat_step(&s0, frame.time, 0.05).unwrap();
            let a = project_grid(&frame.f_s, 0.05, 32).unwrap();
            let b = project_grid(&exact_s, 0.05, 32).unwrap();
            for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-8);
            }
            assert!((frame.f_i.mass() - libm::exp(-0.7 * frame.time) * i0.mass()).abs() < 1e-8);
        }
        let mut frozen = config(0.0, 0.7, 0.0);
        frozen.output_times = vec![1.0];
        let sol = solve_gamma_zero(&frozen).unwrap();
        let expect = i0.scale(libm::exp(-0.7));
        assert!(sol.frames[0].f_i.sup_distance(&expect).unwrap() < 1e-10);
    }

    #[test]
    fn stationary_cases() {
        let mut cfg = config(1.0, 0.0, 0.0);
        cfg.initial.p = 0.0;
        let sol = solve(&cfg).unwrap();
        let (s0, _, _) = cfg.initial.fields(64);
        assert_eq!(sol.frames[2].f_s, s0);
        let mut moving = cfg.clone();
        moving.gamma = 0.05;
        let sol = solve(&moving).unwrap();
        let exact = heat_step(&s0, 1.0, 0.05).unwrap();
        assert!(sol.frames[2].f_s.sup_distance(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn gamma_zero_paths_agree() {
        let cfg = config(1.0, 0.5, 0.0);
        let a = solve(&cfg).unwrap();
        let b = solve_gamma_zero(&cfg).unwrap();
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert!(x.f_s.sup_distance(&y.f_s).unwrap() < 1e-9);
            assert!(x.f_i.sup_distance(&y.f_i).unwrap() < 1e-9);
        }
    }

    #[test]
    fn invariants_hold_along_a_run() {
        let sol = solve(&config(2.0, 0.5, 0.05)).unwrap();
        let d = &sol.diagnostics;
        assert!(d.min_s.iter().chain(&d.min_i).all(|&m| m >= -1e-8));
        assert!(d.order_excess.iter().all(|&e| e <= 1e-6));
        assert!(d.f_min.iter().all(|&m| m >= 0.7 - 1e-10));
        assert!(d.f_max.iter().all(|&m| m <= 1.3 + 1e-10));
        assert!(d.mass_balance_defect() <= 1e-6);
        assert!(d.trapezoid_mass_balance_defect(0.5) <= 1e-4);
    }

    #[test]
    fn output_times_are_hit_exactly() {
        let mut cfg = config(1.0, 0.5, 0.05);
        cfg.output_times = vec![0.0, 0.123, 0.5, 0.777];
        let sol = solve(&cfg).unwrap();
        let times: Vec<f64> = sol.frames.iter().map(|f| f.time).collect();
        assert_eq!(times, cfg.output_times);
        assert!((sol.diagnostics.times.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(1.0, 0.5, 0.05);
        cfg.n_grid = 32;
        assert!(solve(&cfg).is_err());
        let mut cfg = config(1.0, 0.5, 0.05);
        cfg.dt = 0.02;
        assert!(solve(&cfg).is_err());
        let mut cfg = config(1.0, 0.5, 0.05);
        cfg.output_times = vec![0.5, 0.2];
        assert!(solve(&cfg).is_err());
        assert!(solve_gamma_zero(&config(1.0, 0.5, 0.05)).is_err());
    }
}
