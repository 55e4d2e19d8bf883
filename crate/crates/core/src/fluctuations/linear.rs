//! The linear fluctuation system around the limit densities.
//!
//! Perturbing the limit equations in `(f_S, f_I, f)` by `(u, v, z)` gives
//!
//! ```text
//! du = gamma Lap u - beta (G_I* u + G_S* v - G_SI* z) dt + dW1
//! dv = gamma Lap v + beta (G_I* u + G_S* v - G_SI* z) dt - alpha v dt + dW2
//! dz = gamma Lap z dt + dH
//! ```
//!
//! with `Kf = K*f`, `a = K*(f_I / Kf)` and the adjoint actions
//! `G_I* u = a u`, `G_S* v = f_S K*(v / Kf)`, `G_SI* z = f_S K*(f_I K*z / Kf^2)`.
//! Everything lives on a periodic grid; the Galerkin truncation is the square
//! band `|k1|, |k2| <= cutoff / 2` of the grid spectrum, which is exactly the
//! span of the basis functions with `n1, n2 <= cutoff`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::GridField;
use crate::limit_pde::{solve, solve_gamma_zero, GridOperators, PdeConfig, DENOMINATOR_FLOOR};
use crate::math::PI;
use crate::spectral::{basis_gradient, indices, project_grid, BasisIndex, SpectralField, TrigPolynomial};

/// Limit densities and derived coefficient fields at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFrame {
    pub time: f64,
    pub f_s: GridField,
    pub f_i: GridField,
    pub f: GridField,
    /// `f - f_S - f_I`, clipped at 0.
    pub f_r: GridField,
    /// `1 / K*f`.
    pub inv_kf: GridField,
    /// `K*(f_I / K*f)`.
    pub a: GridField,
    /// Infection intensity `beta f_S a`.
    pub jump: GridField,
}

/// Matrices `(f_j, G f_k)` of the three coupling operators on the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operators {
    pub g_si: DMatrix<f64>,
    pub g_i: DMatrix<f64>,
    pub g_s: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub(crate) ops: GridOperators,
    pub(crate) cutoff: u32,
    pub(crate) beta: f64,
    pub(crate) alpha: f64,
    pub(crate) gamma: f64,
    pub(crate) p: f64,
    pub(crate) dt: f64,
    pub(crate) steps: usize,
    /// Frames at every half step: index `2k` is `t = k dt`, `2k + 1` the midpoint.
    pub(crate) frames: Vec<LinearFrame>,
    band: Vec<bool>,
    /// `2 pi k1`, `2 pi k2` per wrapped frequency.
    wave: Vec<[f64; 2]>,
    neg: Vec<usize>,
}

fn mul(a: &GridField, b: &GridField) -> GridField {
    a.zip_with(b, |x, y| x * y).expect("fields share one grid")
}

fn downsample(field: &GridField, n: usize) -> GridField {
    let stride = field.n() / n;
    let mut values = Vec::with_capacity(n * n);
    for i1 in 0..n {
        for i2 in 0..n {
            values.push(field.at(i1 * stride, i2 * stride));
        }
    }
    GridField::new(n, values).expect("finite samples")
}

impl LinearizedSystem {
    /// Solves the limit system with half steps of `pde.dt / 2` and samples it on
    /// an `n x n` grid; the linear system then advances in steps of `pde.dt`.
    pub fn new(pde: &PdeConfig, n: usize, cutoff: u32) -> Result<Self> {
        pde.validate()?;
        if !(n.is_power_of_two() && n <= pde.n_grid) {
            return Err(invalid("grid", "must be a power of two no finer than the limit-system grid"));
        }
        if cutoff % 2 != 0 || n % 4 != 0 || n <= cutoff as usize {
            return Err(Error::Aliasing { n, cutoff });
        }
        let steps = libm::round(pde.horizon / pde.dt) as usize;
        if libm::fabs(steps as f64 * pde.dt - pde.horizon) > 1e-9 {
            return Err(invalid("horizon", "must be a whole number of steps"));
        }
        let mut fine = pde.clone();
        fine.dt = 0.5 * pde.dt;
        fine.output_times = (0..=2 * steps).map(|k| (k as f64 * fine.dt).min(pde.horizon)).collect();
        let solution = if pde.gamma == 0.0 { solve_gamma_zero(&fine)? } else { solve(&fine)? };
        if solution.frames.len() != 2 * steps + 1 {
            return Err(Error::Invariant(alloc::format!("expected {} frames, got {}", 2 * steps + 1, solution.frames.len())));
        }
        let ops = GridOperators::new(n, &pde.kernel)?;
        let mut frames = Vec::with_capacity(solution.frames.len());
        for fr in &solution.frames {
            let (f_s, f_i, f) = (downsample(&fr.f_s, n), downsample(&fr.f_i, n), downsample(&fr.f, n));
            let kf = ops.convolve(&f)?;
            if !(kf.min() > DENOMINATOR_FLOOR) {
                return Err(Error::DegenerateDenominator { value: kf.min() });
            }
            let inv_kf = kf.map(|x| 1.0 / x);
            let a = ops.convolve(&mul(&f_i, &inv_kf))?;
            let beta = pde.beta;
            let jump = mul(&f_s, &a).map(|x| beta * x);
            let f_r = f.zip_with(&f_s, |x, y| x - y)?.zip_with(&f_i, |x, y| (x - y).max(0.0))?;
            frames.push(LinearFrame { time: fr.time, f_s, f_i, f, f_r, inv_kf, a, jump });
        }
        let half = (cutoff / 2) as isize;
        let wrap = |i: usize| if i <= n / 2 { i as isize } else { i as isize - n as isize };
        let mut band = Vec::with_capacity(n * n);
        let mut wave = Vec::with_capacity(n * n);
        let mut neg = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                let (k1, k2) = (wrap(i1), wrap(i2));
                band.push(k1.abs() <= half && k2.abs() <= half);
                wave.push([2.0 * PI * k1 as f64, 2.0 * PI * k2 as f64]);
                neg.push(((n - i1) % n) * n + (n - i2) % n);
            }
        }
        Ok(Self {
            ops,
            cutoff,
            beta: pde.beta,
            alpha: pde.alpha,
            gamma: pde.gamma,
            p: pde.initial.p,
            dt: pde.dt,
            steps,
            frames,
            band,
            wave,
            neg,
        })
    }

    pub fn n(&self) -> usize {
        self.ops.n()
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Frame at step `k` (time `k dt`).
    pub fn frame(&self, k: usize) -> &LinearFrame {
        &self.frames[2 * k]
    }

    pub(crate) fn half_frame(&self, j: usize) -> &LinearFrame {
        &self.frames[j]
    }

    pub(crate) fn wave(&self) -> &[[f64; 2]] {
        &self.wave
    }

    pub(crate) fn ops(&self) -> &GridOperators {
        &self.ops
    }

    /// Heat multiplier `exp(-gamma t 4 pi^2 |k|^2)` restricted to the band.
    pub(crate) fn band_heat_symbol(&self, t: f64) -> Vec<f64> {
        let lap = self.ops.laplace_symbol();
        self.band
            .iter()
            .enumerate()
            .map(|(i, &inside)| if inside { libm::exp(-self.gamma * t * lap[i]) } else { 0.0 })
            .collect()
    }

    /// Forward transform of two real fields, scaled so the backward transform inverts it.
    pub(crate) fn forward_pair(&self, a: &GridField, b: &GridField) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.ops.fft().forward(&mut data);
        let inv = 1.0 / (self.n() * self.n()) as f64;
        for c in &mut data {
            *c *= inv;
        }
        data
    }

    /// Separates the spectra of the two real fields packed by [`Self::forward_pair`].
    pub(crate) fn split_pair(&self, packed: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let half = Complex64::new(0.5, 0.0);
        let minus_half_i = Complex64::new(0.0, -0.5);
        let mut a = Vec::with_capacity(packed.len());
        let mut b = Vec::with_capacity(packed.len());
        for (i, &x) in packed.iter().enumerate() {
            let y = packed[self.neg[i]].conj();
            a.push((x + y) * half);
            b.push((x - y) * minus_half_i);
        }
        (a, b)
    }

    /// Real fields of two Hermitian spectra.
    pub(crate) fn backward_pair(&self, a: &[Complex64], b: &[Complex64]) -> (GridField, GridField) {
        let i = Complex64::new(0.0, 1.0);
        let mut data: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| x + i * y).collect();
        self.ops.fft().backward(&mut data);
        let n = self.n();
        (
            GridField::new(n, data.iter().map(|c| c.re).collect()).expect("finite"),
            GridField::new(n, data.iter().map(|c| c.im).collect()).expect("finite"),
        )
    }

    /// Heat flow for time `t` followed by the band projection, on two fields.
    pub fn heat_project_pair(&self, a: &GridField, b: &GridField, t: f64) -> (GridField, GridField) {
        let symbol = self.band_heat_symbol(t);
        let mut data = self.forward_pair(a, b);
        for (c, s) in data.iter_mut().zip(&symbol) {
            *c *= *s;
        }
        self.ops.fft().backward(&mut data);
        let n = self.n();
        (
            GridField::new(n, data.iter().map(|c| c.re).collect()).expect("finite"),
            GridField::new(n, data.iter().map(|c| c.im).collect()).expect("finite"),
        )
    }

    /// Band projection of one field.
    pub fn project(&self, u: &GridField) -> GridField {
        self.heat_project_pair(u, u, 0.0).0
    }

    /// `G_I w = a w` (self-adjoint).
    pub fn apply_g_i(&self, frame: &LinearFrame, w: &GridField) -> GridField {
        mul(&frame.a, w)
    }

    /// `G_S w = K*(f_S w) / Kf`.
    pub fn apply_g_s(&self, frame: &LinearFrame, w: &GridField) -> Result<GridField> {
        Ok(mul(&self.ops.convolve(&mul(&frame.f_s, w))?, &frame.inv_kf))
    }

    /// `G_SI w = K*(f_I K*(f_S w) / Kf^2)`.
    pub fn apply_g_si(&self, frame: &LinearFrame, w: &GridField) -> Result<GridField> {
        let inner = self.ops.convolve(&mul(&frame.f_s, w))?;
        let weight = frame.f_i.zip_with(&frame.inv_kf, |x, y| x * y * y)?;
        self.ops.convolve(&mul(&weight, &inner))
    }

    /// `G_S* v = f_S K*(v / Kf)`.
    pub fn apply_g_s_adjoint(&self, frame: &LinearFrame, v: &GridField) -> Result<GridField> {
        Ok(mul(&frame.f_s, &self.ops.convolve(&mul(v, &frame.inv_kf))?))
    }

    /// `G_SI* z = f_S K*(f_I K*z / Kf^2)`.
    pub fn apply_g_si_adjoint(&self, frame: &LinearFrame, z: &GridField) -> Result<GridField> {
        let weight = frame.f_i.zip_with(&frame.inv_kf, |x, y| x * y * y)?;
        let inner = mul(&weight, &self.ops.convolve(z)?);
        Ok(mul(&frame.f_s, &self.ops.convolve(&inner)?))
    }

    /// Matrices of `G_SI`, `G_I`, `G_S` at step `k` on the truncated basis, in
    /// the order of [`indices`]; the adjoints act by transposition.
    pub fn assemble_operators(&self, k: usize) -> Result<Operators> {
        let frame = self.frame(k);
        let basis: Vec<BasisIndex> = indices(self.cutoff).collect();
        let m = basis.len();
        let mut out = Operators { g_si: DMatrix::zeros(m, m), g_i: DMatrix::zeros(m, m), g_s: DMatrix::zeros(m, m) };
        for (col, &idx) in basis.iter().enumerate() {
            let e = TrigPolynomial::basis(idx).to_grid(self.n());
            let images = [self.apply_g_si(frame, &e)?, self.apply_g_i(frame, &e), self.apply_g_s(frame, &e)?];
            for (target, image) in [&mut out.g_si, &mut out.g_i, &mut out.g_s].into_iter().zip(&images) {
                let coeffs = project_grid(image, 0.0, self.cutoff)?.to_vec();
                for (row, c) in coeffs.into_iter().enumerate() {
                    target[(row, col)] = c;
                }
            }
        }
        Ok(out)
    }

    /// Covariance rate `2 gamma (grad f_j . grad f_k, f)` of the `Z` noise at step `k`.
    pub fn noise_covariance_z(&self, k: usize) -> DMatrix<f64> {
        let frame = self.frame(k);
        let n = self.n();
        let basis: Vec<BasisIndex> = indices(self.cutoff).collect();
        let grads: Vec<Vec<[f64; 2]>> = basis
            .iter()
            .map(|&idx| (0..n * n).map(|c| basis_gradient(idx, frame.f.node(c / n, c % n))).collect())
            .collect();
        let h2 = 1.0 / (n * n) as f64;
        let m = basis.len();
        let mut q = DMatrix::zeros(m, m);
        for j in 0..m {
            for l in j..m {
                let mut acc = 0.0;
                for c in 0..n * n {
                    let (x, y) = (grads[j][c], grads[l][c]);
                    acc += (x[0] * y[0] + x[1] * y[1]) * frame.f.values()[c];
                }
                q[(j, l)] = 2.0 * self.gamma * h2 * acc;
                q[(l, j)] = q[(j, l)];
            }
        }
        q
    }

    /// Pairing `(u, psi)` of a grid field with a test function by the rectangle rule.
    pub fn pair(&self, u: &GridField, psi: &GridField) -> Result<f64> {
        u.inner(psi)
    }

    /// Coefficients of a grid field in the truncated basis.
    pub fn coefficients(&self, u: &GridField) -> Result<SpectralField> {
        project_grid(u, self.gamma, self.cutoff)
    }
}
