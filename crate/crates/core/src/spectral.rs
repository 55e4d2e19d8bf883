//! Laplacian eigenbasis of the torus with even wave numbers, Sobolev norms
//! and the heat semigroup.
//!
//! With `a = pi n1 x1`, `b = pi n2 x2` and `n1, n2` even:
//!
//! | family | function            | indices          |
//! |--------|---------------------|------------------|
//! | 0      | `1`                 | `n1 = n2 = 0`    |
//! | 1      | `2 sin a cos b`     | `n1, n2 > 0`     |
//! | 2      | `2 sin a sin b`     | `n1, n2 > 0`     |
//! | 3      | `2 cos a cos b`     | `n1, n2 > 0`     |
//! | 4      | `2 cos a sin b`     | `n1, n2 > 0`     |
//! | 5      | `sqrt2 cos a`       | `n1 > 0, n2 = 0` |
//! | 6      | `sqrt2 sin a`       | `n1 > 0, n2 = 0` |
//! | 7      | `sqrt2 cos b`       | `n1 = 0, n2 > 0` |
//! | 8      | `sqrt2 sin b`       | `n1 = 0, n2 > 0` |
//!
//! Each basis function is an eigenfunction of `gamma * Laplacian` with
//! eigenvalue `-lambda`, `lambda = gamma pi^2 (n1^2 + n2^2)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::Fft2;
use crate::grid::GridField;
use crate::math::{CompensatedSum, PI, SQRT_2};
use crate::torus::TorusPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawIndex"))]
pub struct BasisIndex {
    family: u8,
    n1: u32,
    n2: u32,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawIndex {
    family: u8,
    n1: u32,
    n2: u32,
}

#[cfg(feature = "serde")]
impl TryFrom<RawIndex> for BasisIndex {
    type Error = Error;

    fn try_from(raw: RawIndex) -> Result<Self> {
        Self::new(raw.family, raw.n1, raw.n2)
    }
}

impl BasisIndex {
    pub const CONSTANT: Self = Self { family: 0, n1: 0, n2: 0 };

    pub fn new(family: u8, n1: u32, n2: u32) -> Result<Self> {
        let ok = n1 % 2 == 0
            && n2 % 2 == 0
            && match family {
                0 => n1 == 0 && n2 == 0,
                1..=4 => n1 > 0 && n2 > 0,
                5 | 6 => n1 > 0 && n2 == 0,
                7 | 8 => n1 == 0 && n2 > 0,
                _ => false,
            };
        if ok {
            Ok(Self { family, n1, n2 })
        } else {
            Err(Error::InvalidBasisIndex { family, n1, n2 })
        }
    }

    pub fn family(&self) -> u8 {
        self.family
    }

    pub fn n1(&self) -> u32 {
        self.n1
    }

    pub fn n2(&self) -> u32 {
        self.n2
    }

    /// `n1^2 + n2^2`.
    pub fn wave_number_sq(&self) -> f64 {
        let (a, b) = (self.n1 as f64, self.n2 as f64);
        a * a + b * b
    }

    /// Largest index component; a field with cutoff `c` holds every index with `order <= c`.
    pub fn order(&self) -> u32 {
        self.n1.max(self.n2)
    }

    /// Index of the same wave numbers whose family is the image under `d/dx_axis`,
    /// with the sign and wave-number factor: `d/dx_axis f_self = factor * f_image`.
    fn derivative_image(&self, axis: usize) -> Option<(BasisIndex, f64)> {
        let (n1, n2) = (self.n1, self.n2);
        let k1 = PI * n1 as f64;
        let k2 = PI * n2 as f64;
        let to = |family: u8| BasisIndex { family, n1, n2 };
        match (axis, self.family) {
            (0, 1) => Some((to(3), k1)),
            (0, 2) => Some((to(4), k1)),
            (0, 3) => Some((to(1), -k1)),
            (0, 4) => Some((to(2), -k1)),
            (0, 5) => Some((to(6), -k1)),
            (0, 6) => Some((to(5), k1)),
            (1, 1) => Some((to(2), -k2)),
            (1, 2) => Some((to(1), k2)),
            (1, 3) => Some((to(4), -k2)),
            (1, 4) => Some((to(3), k2)),
            (1, 7) => Some((to(8), -k2)),
            (1, 8) => Some((to(7), k2)),
            _ => None,
        }
    }
}

/// `gamma pi^2 (n1^2 + n2^2)`.
pub fn eigenvalue(idx: BasisIndex, gamma: f64) -> f64 {
    gamma * PI * PI * idx.wave_number_sq()
}

#[inline]
fn trig(idx: BasisIndex, p: TorusPoint) -> (f64, f64, f64, f64) {
    let a = PI * idx.n1 as f64 * p.x1();
    let b = PI * idx.n2 as f64 * p.x2();
    (libm::sin(a), libm::cos(a), libm::sin(b), libm::cos(b))
}

pub fn basis_eval(idx: BasisIndex, p: TorusPoint) -> f64 {
    let (s1, c1, s2, c2) = trig(idx, p);
    match idx.family {
        0 => 1.0,
        1 => 2.0 * s1 * c2,
        2 => 2.0 * s1 * s2,
        3 => 2.0 * c1 * c2,
        4 => 2.0 * c1 * s2,
        5 => SQRT_2 * c1,
        6 => SQRT_2 * s1,
        7 => SQRT_2 * c2,
        _ => SQRT_2 * s2,
    }
}

pub fn basis_gradient(idx: BasisIndex, p: TorusPoint) -> [f64; 2] {
    let (s1, c1, s2, c2) = trig(idx, p);
    let k1 = PI * idx.n1 as f64;
    let k2 = PI * idx.n2 as f64;
    match idx.family {
        0 => [0.0, 0.0],
        1 => [2.0 * k1 * c1 * c2, -2.0 * k2 * s1 * s2],
        2 => [2.0 * k1 * c1 * s2, 2.0 * k2 * s1 * c2],
        3 => [-2.0 * k1 * s1 * c2, -2.0 * k2 * c1 * s2],
        4 => [-2.0 * k1 * s1 * s2, 2.0 * k2 * c1 * c2],
        5 => [-SQRT_2 * k1 * s1, 0.0],
        6 => [SQRT_2 * k1 * c1, 0.0],
        7 => [0.0, -SQRT_2 * k2 * s2],
        _ => [0.0, SQRT_2 * k2 * c2],
    }
}

pub fn basis_laplacian(idx: BasisIndex, p: TorusPoint) -> f64 {
    -PI * PI * idx.wave_number_sq() * basis_eval(idx, p)
}

/// Every valid index with `order <= cutoff`, family-major.
pub fn indices(cutoff: u32) -> impl Iterator<Item = BasisIndex> {
    let k = cutoff / 2;
    let mixed = (1..=4u8).flat_map(move |f| {
        (1..=k).flat_map(move |a| (1..=k).map(move |b| BasisIndex { family: f, n1: 2 * a, n2: 2 * b }))
    });
    let axis1 = (5..=6u8).flat_map(move |f| (1..=k).map(move |a| BasisIndex { family: f, n1: 2 * a, n2: 0 }));
    let axis2 = (7..=8u8).flat_map(move |f| (1..=k).map(move |b| BasisIndex { family: f, n1: 0, n2: 2 * b }));
    core::iter::once(BasisIndex::CONSTANT).chain(mixed).chain(axis1).chain(axis2)
}

/// Number of valid indices with `order <= cutoff`.
pub fn mode_count(cutoff: u32) -> usize {
    let k = (cutoff / 2) as usize;
    1 + 4 * k * k + 4 * k
}

/// A finite linear combination of basis functions; a closed-form `C^infinity` test function.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigPolynomial {
    pub terms: Vec<(BasisIndex, f64)>,
}

impl TrigPolynomial {
    pub fn basis(idx: BasisIndex) -> Self {
        Self { terms: vec![(idx, 1.0)] }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![(BasisIndex::CONSTANT, c)] }
    }

    pub fn value(&self, p: TorusPoint) -> f64 {
        self.terms.iter().map(|&(idx, w)| w * basis_eval(idx, p)).sum()
    }

    pub fn gradient(&self, p: TorusPoint) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(idx, w) in &self.terms {
            let d = basis_gradient(idx, p);
            g[0] += w * d[0];
            g[1] += w * d[1];
        }
        g
    }

    pub fn laplacian(&self, p: TorusPoint) -> f64 {
        self.terms.iter().map(|&(idx, w)| w * basis_laplacian(idx, p)).sum()
    }

    /// Largest index order appearing in the combination.
    pub fn order(&self) -> u32 {
        self.terms.iter().map(|(idx, _)| idx.order()).max().unwrap_or(0)
    }

    pub fn to_grid(&self, n: usize) -> GridField {
        GridField::from_fn(n, |p| self.value(p))
    }
}

/// Coefficients in the basis for every index of order at most `cutoff`.
///
/// `gamma` fixes the eigenvalues used by norms and the heat semigroup.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    gamma: f64,
    cutoff: u32,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(gamma: f64, cutoff: u32) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid("gamma", "must be finite and non-negative"));
        }
        if cutoff % 2 != 0 {
            return Err(invalid("cutoff", "must be even"));
        }
        let side = (cutoff / 2 + 1) as usize;
        Ok(Self { gamma, cutoff, coeffs: vec![0.0; 9 * side * side] })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    fn side(&self) -> usize {
        (self.cutoff / 2 + 1) as usize
    }

    #[inline]
    fn slot(&self, idx: BasisIndex) -> usize {
        let side = self.side();
        (idx.family as usize * side + (idx.n1 / 2) as usize) * side + (idx.n2 / 2) as usize
    }

    /// Zero for indices beyond the cutoff.
    pub fn get(&self, idx: BasisIndex) -> f64 {
        if idx.order() > self.cutoff {
            0.0
        } else {
            self.coeffs[self.slot(idx)]
        }
    }

    pub fn set(&mut self, idx: BasisIndex, value: f64) -> Result<()> {
        if idx.order() > self.cutoff {
            return Err(invalid("index", "beyond the field cutoff"));
        }
        let s = self.slot(idx);
        self.coeffs[s] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisIndex, f64)> + '_ {
        indices(self.cutoff).map(move |idx| (idx, self.coeffs[self.slot(idx)]))
    }

    /// Coefficients in `indices` order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().map(|(_, c)| c).collect()
    }

    pub fn from_vec(gamma: f64, cutoff: u32, values: &[f64]) -> Result<Self> {
        let mut field = Self::zeros(gamma, cutoff)?;
        if values.len() != mode_count(cutoff) {
            return Err(Error::GridMismatch { expected: mode_count(cutoff), found: values.len() });
        }
        for (idx, &v) in indices(cutoff).zip(values) {
            field.set(idx, v)?;
        }
        Ok(field)
    }

    pub fn map_indexed(&self, mut f: impl FnMut(BasisIndex, f64) -> f64) -> Self {
        let mut out = self.clone();
        for idx in indices(self.cutoff) {
            let s = self.slot(idx);
            out.coeffs[s] = f(idx, self.coeffs[s]);
        }
        out
    }

    /// `self + c * other`; both fields must share gamma and cutoff.
    pub fn axpy(&self, c: f64, other: &SpectralField) -> Result<Self> {
        if self.cutoff != other.cutoff || self.gamma != other.gamma {
            return Err(invalid("field", "gamma and cutoff must match"));
        }
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(out)
    }

    /// Sobolev weight `(1 + lambda)^s`.
    pub fn weight(&self, idx: BasisIndex, s: f64) -> f64 {
        libm::pow(1.0 + eigenvalue(idx, self.gamma), s)
    }

    /// Truncated `H^{-s}` norm.
    pub fn h_neg_s_norm(&self, s: f64) -> f64 {
        self.weighted_norm(-s)
    }

    /// Truncated `H^s` norm.
    pub fn hs_norm(&self, s: f64) -> f64 {
        self.weighted_norm(s)
    }

    fn weighted_norm(&self, s: f64) -> f64 {
        let acc: CompensatedSum = self.iter().map(|(idx, c)| c * c * self.weight(idx, s)).collect();
        libm::sqrt(acc.value())
    }

    /// Heat semigroup: multiplies each coefficient by `exp(-lambda t)`.
    pub fn heat_apply(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("t", "must be finite and non-negative"));
        }
        Ok(self.map_indexed(|idx, c| c * libm::exp(-eigenvalue(idx, self.gamma) * t)))
    }

    /// Pairings with the first-order derivatives: the field `(w, d/dx_axis f_k)`
    /// given `self = (w, f_k)` for every index.
    pub fn derivative_pairing(&self, axis: usize) -> Self {
        let mut out = self.map_indexed(|_, _| 0.0);
        for idx in indices(self.cutoff) {
            if let Some((image, factor)) = idx.derivative_image(axis) {
                let s = out.slot(idx);
                out.coeffs[s] = factor * self.coeffs[self.slot(image)];
            }
        }
        out
    }

    /// Fourier coefficients `c(k) = integral u exp(-2 pi i k.x)` on an `n x n`
    /// frequency array, wrapped as `k mod n`; `n` must exceed the cutoff.
    pub fn to_spectrum(&self, n: usize) -> Result<Vec<Complex64>> {
        check_alias(n, self.cutoff)?;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        let k = (self.cutoff / 2) as usize;
        let at = |k1: isize, k2: isize| -> usize {
            let w = |x: isize| x.rem_euclid(n as isize) as usize;
            w(k1) * n + w(k2)
        };
        let c = |f: u8, a: usize, b: usize| self.coeffs[self.slot(BasisIndex { family: f, n1: 2 * a as u32, n2: 2 * b as u32 })];
        out[0] = Complex64::new(c(0, 0, 0), 0.0);
        for a in 1..=k {
            for b in 1..=k {
                let (a1, a2, a3, a4) = (c(1, a, b), c(2, a, b), c(3, a, b), c(4, a, b));
                let p = Complex64::new(0.5 * (a3 - a2), -0.5 * (a1 + a4));
                let q = Complex64::new(0.5 * (a3 + a2), 0.5 * (a4 - a1));
                let (ai, bi) = (a as isize, b as isize);
                out[at(ai, bi)] = p;
                out[at(-ai, -bi)] = p.conj();
                out[at(ai, -bi)] = q;
                out[at(-ai, bi)] = q.conj();
            }
        }
        for a in 1..=k {
            let ai = a as isize;
            let x = Complex64::new(c(5, a, 0), -c(6, a, 0)) / SQRT_2;
            out[at(ai, 0)] = x;
            out[at(-ai, 0)] = x.conj();
            let y = Complex64::new(c(7, 0, a), -c(8, 0, a)) / SQRT_2;
            out[at(0, ai)] = y;
            out[at(0, -ai)] = y.conj();
        }
        Ok(out)
    }

    /// Inverse of [`SpectralField::to_spectrum`] restricted to the band; reads
    /// only frequencies with `|k1|, |k2| <= cutoff/2`.
    pub fn from_spectrum(spectrum: &[Complex64], n: usize, gamma: f64, cutoff: u32) -> Result<Self> {
        check_alias(n, cutoff)?;
        if spectrum.len() != n * n {
            return Err(Error::GridMismatch { expected: n * n, found: spectrum.len() });
        }
        let mut field = Self::zeros(gamma, cutoff)?;
        let k = (cutoff / 2) as usize;
        let at = |k1: isize, k2: isize| -> Complex64 {
            let w = |x: isize| x.rem_euclid(n as isize) as usize;
            spectrum[w(k1) * n + w(k2)]
        };
        let mut put = |f: u8, a: usize, b: usize, v: f64| {
            let s = field.slot(BasisIndex { family: f, n1: 2 * a as u32, n2: 2 * b as u32 });
            field.coeffs[s] = v;
        };
        put(0, 0, 0, at(0, 0).re);
        for a in 1..=k {
            for b in 1..=k {
                let (ai, bi) = (a as isize, b as isize);
                let p = at(ai, bi);
                let q = at(ai, -bi);
                put(1, a, b, -p.im - q.im);
                put(2, a, b, q.re - p.re);
                put(3, a, b, p.re + q.re);
                put(4, a, b, -p.im + q.im);
            }
            let ai = a as isize;
            let x = at(ai, 0);
            put(5, a, 0, SQRT_2 * x.re);
            put(6, a, 0, -SQRT_2 * x.im);
            let y = at(0, ai);
            put(7, 0, a, SQRT_2 * y.re);
            put(8, 0, a, -SQRT_2 * y.im);
        }
        Ok(field)
    }

    /// Point values of the truncated expansion on an `n x n` grid.
    pub fn synthesize(&self, n: usize) -> Result<GridField> {
        let fft = Fft2::new(n)?;
        let mut spectrum = self.to_spectrum(n)?;
        fft.backward(&mut spectrum);
        Ok(GridField::from_raw(n, spectrum.iter().map(|c| c.re).collect()))
    }

    pub fn eval(&self, p: TorusPoint) -> f64 {
        self.iter().map(|(idx, c)| if c == 0.0 { 0.0 } else { c * basis_eval(idx, p) }).sum()
    }
}

fn check_alias(n: usize, cutoff: u32) -> Result<()> {
    if n % 4 != 0 || n <= cutoff as usize {
        return Err(Error::Aliasing { n, cutoff });
    }
    Ok(())
}

/// Spectrum `c(k) = h^2 sum u exp(-2 pi i k.x)` of a grid field.
pub fn grid_spectrum(field: &GridField, fft: &Fft2) -> Vec<Complex64> {
    let n = field.n();
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut data);
    let scale = 1.0 / (n * n) as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Rectangle-rule pairings `(u, f_k)` for every index up to `cutoff`.
///
/// Exact for trigonometric polynomials whose frequencies stay below the grid Nyquist limit.
pub fn project_grid(field: &GridField, gamma: f64, cutoff: u32) -> Result<SpectralField> {
    check_alias(field.n(), cutoff)?;
    let fft = Fft2::new(field.n())?;
    SpectralField::from_spectrum(&grid_spectrum(field, &fft), field.n(), gamma, cutoff)
}

/// Pairings `sum_j w_j f_k(X_j)` of a weighted atomic measure.
pub fn project_measure(atoms: &[(TorusPoint, f64)], gamma: f64, cutoff: u32) -> Result<SpectralField> {
    let mut field = SpectralField::zeros(gamma, cutoff)?;
    let k = (cutoff / 2) as usize;
    let side = k + 1;
    let mut c1 = vec![0.0; side];
    let mut s1 = vec![0.0; side];
    let mut c2 = vec![0.0; side];
    let mut s2 = vec![0.0; side];
    let block = side * side;
    for &(p, w) in atoms {
        if !w.is_finite() {
            return Err(Error::NonFinite);
        }
        for j in 0..side {
            let a = 2.0 * PI * j as f64 * p.x1();
            let b = 2.0 * PI * j as f64 * p.x2();
            c1[j] = libm::cos(a);
            s1[j] = libm::sin(a);
            c2[j] = libm::cos(b);
            s2[j] = libm::sin(b);
        }
        field.coeffs[0] += w;
        let w2 = 2.0 * w;
        for a in 1..side {
            let (sa, ca) = (w2 * s1[a], w2 * c1[a]);
            let row = a * side;
            for b in 1..side {
                field.coeffs[block + row + b] += sa * c2[b];
                field.coeffs[2 * block + row + b] += sa * s2[b];
                field.coeffs[3 * block + row + b] += ca * c2[b];
                field.coeffs[4 * block + row + b] += ca * s2[b];
            }
            let ws = SQRT_2 * w;
            field.coeffs[5 * block + row] += ws * c1[a];
            field.coeffs[6 * block + row] += ws * s1[a];
            field.coeffs[7 * block + a] += ws * c2[a];
            field.coeffs[8 * block + a] += ws * s2[a];
        }
    }
    Ok(field)
}

/// One row of the basis-sum diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticRow {
    pub cutoff: u32,
    /// Partial sum of `rho_k(x)^2 = f_k(x)^2 / (1 + lambda_k)^s`.
    pub rho_sq: f64,
    /// Partial sum of `|grad rho_k(x)|^2`.
    pub grad_sq: f64,
}

/// Partial sums of `sum_k rho_k(x)^2` and `sum_k |grad rho_k(x)|^2` at each cutoff.
pub fn appendix_sum_diagnostic(s: f64, gamma: f64, x: TorusPoint, cutoffs: &[u32]) -> Result<Vec<DiagnosticRow>> {
    if !(s > 0.0) {
        return Err(invalid("s", "must be positive"));
    }
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "must be positive"));
    }
    if cutoffs.iter().any(|c| c % 2 != 0) {
        return Err(invalid("cutoffs", "must be even"));
    }
    let top = cutoffs.iter().copied().max().unwrap_or(0) / 2;
    // Shell m collects every index with max(n1, n2) = 2m.
    let mut rho_shell: Vec<CompensatedSum> = vec![CompensatedSum::new(); top as usize + 1];
    let mut grad_shell: Vec<CompensatedSum> = vec![CompensatedSum::new(); top as usize + 1];
    for idx in indices(2 * top) {
        let w = libm::pow(1.0 + eigenvalue(idx, gamma), -s);
        let f = basis_eval(idx, x);
        let g = basis_gradient(idx, x);
        let m = (idx.order() / 2) as usize;
        rho_shell[m].add(f * f * w);
        grad_shell[m].add((g[0] * g[0] + g[1] * g[1]) * w);
    }
    let mut rho_prefix = Vec::with_capacity(rho_shell.len());
    let mut grad_prefix = Vec::with_capacity(grad_shell.len());
    let (mut r, mut g) = (CompensatedSum::new(), CompensatedSum::new());
    for (a, b) in rho_shell.iter().zip(&grad_shell) {
        r.add(a.value());
        g.add(b.value());
        rho_prefix.push(r.value());
        grad_prefix.push(g.value());
    }
    Ok(cutoffs
        .iter()
        .map(|&c| {
            let m = (c / 2) as usize;
            DiagnosticRow { cutoff: c, rho_sq: rho_prefix[m], grad_sq: grad_prefix[m] }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SeriesBehaviour {
    Convergent,
    Marginal,
    Divergent,
}

/// Increment ratio at or below which a series is called convergent.
pub const CONVERGENT_RATIO: f64 = 0.9;
/// Increment ratio at or above which a series is called divergent.
pub const DIVERGENT_RATIO: f64 = 1.08;

/// Classifies a series from partial sums at successively doubled cutoffs.
///
/// With tail increments `d_j = S_{j+1} - S_j`, the last ratio `d_last / d_prev`
/// tends to `2^(-p)` for terms decaying like `|n|^(-2-p)`: below 1 for
/// convergent series, 1 for logarithmic divergence, above 1 for power growth.
pub fn classify_doubling_sums(sums: &[f64]) -> Result<SeriesBehaviour> {
    if sums.len() < 3 {
        return Err(invalid("sums", "need partial sums at three or more doubled cutoffs"));
    }
    let k = sums.len();
    let last = sums[k - 1] - sums[k - 2];
    let prev = sums[k - 2] - sums[k - 3];
    if !(prev > 0.0) {
        return Ok(if last > 0.0 { SeriesBehaviour::Divergent } else { SeriesBehaviour::Convergent });
    }
    let ratio = last / prev;
    Ok(if ratio <= CONVERGENT_RATIO {
        SeriesBehaviour::Convergent
    } else if ratio >= DIVERGENT_RATIO {
        SeriesBehaviour::Divergent
    } else {
        SeriesBehaviour::Marginal
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn idx(f: u8, a: u32, b: u32) -> BasisIndex {
        BasisIndex::new(f, a, b).unwrap()
    }

    fn pt(a: f64, b: f64) -> TorusPoint {
        TorusPoint::wrap(a, b).unwrap()
    }

    #[test]
    fn index_validation() {
        assert!(BasisIndex::new(0, 0, 0).is_ok());
        assert!(BasisIndex::new(0, 2, 0).is_err());
        assert!(BasisIndex::new(1, 2, 0).is_err());
        assert!(BasisIndex::new(3, 3, 2).is_err());
        assert!(BasisIndex::new(5, 2, 0).is_ok());
        assert!(BasisIndex::new(7, 2, 0).is_err());
        assert!(BasisIndex::new(9, 0, 0).is_err());
        assert_eq!(indices(32).count(), mode_count(32));
        assert_eq!(mode_count(32), 1089);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(basis_eval(BasisIndex::CONSTANT, pt(0.3, 0.7)), 1.0);
        assert_eq!(basis_eval(idx(3, 2, 2), TorusPoint::ORIGIN), 2.0);
        assert!((basis_eval(idx(1, 2, 2), pt(0.25, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(BasisIndex::CONSTANT, 1.0), 0.0);
        assert!((eigenvalue(idx(3, 2, 2), 1.0) - 78.956_835_208_714_86).abs() < 1e-9);
        assert_eq!(eigenvalue(idx(3, 2, 2), 0.0), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let e = 1e-6;
        for i in indices(6) {
            let p = pt(0.137, 0.771);
            let g = basis_gradient(i, p);
            let d1 = (basis_eval(i, pt(p.x1() + e, p.x2())) - basis_eval(i, pt(p.x1() - e, p.x2()))) / (2.0 * e);
            let d2 = (basis_eval(i, pt(p.x1(), p.x2() + e)) - basis_eval(i, pt(p.x1(), p.x2() - e))) / (2.0 * e);
            assert!((g[0] - d1).abs() < 1e-6 && (g[1] - d2).abs() < 1e-6, "{i:?}");
        }
    }

    #[test]
    fn derivative_images_match_gradients() {
        for i in indices(6) {
            for axis in 0..2 {
                let p = pt(0.31, 0.58);
                let expected = basis_gradient(i, p)[axis];
                let got = i.derivative_image(axis).map_or(0.0, |(j, c)| c * basis_eval(j, p));
                assert!((expected - got).abs() < 1e-12);
            }
        }
    }

    /// Brute-force quadrature of `(u, f_k)` on the grid nodes.
    fn quadrature(field: &GridField, k: BasisIndex) -> f64 {
        let n = field.n();
        let h2 = field.spacing() * field.spacing();
        let mut acc = 0.0;
        for i1 in 0..n {
            for i2 in 0..n {
                acc += field.at(i1, i2) * basis_eval(k, field.node(i1, i2));
            }
        }
        acc * h2
    }

    #[test]
    fn project_grid_examples() {
        let ones = project_grid(&GridField::constant(64, 1.0), 1.0, 32).unwrap();
        for (i, c) in ones.iter() {
            let expect = if i == BasisIndex::CONSTANT { 1.0 } else { 0.0 };
            assert!((c - expect).abs() <= 1e-12);
        }
        let target = idx(3, 2, 2);
        let mode = TrigPolynomial::basis(target).to_grid(64);
        let proj = project_grid(&mode, 1.0, 32).unwrap();
        for (i, c) in proj.iter() {
            let expect = if i == target { 1.0 } else { 0.0 };
            assert!((c - expect).abs() <= 1e-12, "{i:?}: {c}");
        }
        let scaled = project_grid(&mode.scale(3.0), 1.0, 32).unwrap();
        assert!((scaled.get(target) - 3.0).abs() < 1e-12);
        assert!(project_grid(&mode, 1.0, 64).is_err());
        assert!(project_grid(&GridField::constant(30, 1.0), 1.0, 8).is_err());
    }

    #[test]
    fn fft_projection_matches_direct_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 16;
        let field = GridField::new(n, (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
        let proj = project_grid(&field, 0.5, 14).unwrap();
        for (i, c) in proj.iter() {
            assert!((c - quadrature(&field, i)).abs() < 1e-13, "{i:?}");
        }
    }

    #[test]
    fn synthesis_inverts_projection_for_every_mode() {
        for i in indices(8) {
            let mut f = SpectralField::zeros(1.0, 8).unwrap();
            f.set(i, 1.7).unwrap();
            let grid = f.synthesize(16).unwrap();
            let direct = TrigPolynomial { terms: vec![(i, 1.7)] }.to_grid(16);
            assert!(grid.sup_distance(&direct).unwrap() < 1e-12, "{i:?}");
            let back = project_grid(&grid, 1.0, 8).unwrap();
            for (j, c) in back.iter() {
                let expect = if j == i { 1.7 } else { 0.0 };
                assert!((c - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn project_measure_examples() {
        let p = pt(0.3, 0.8);
        let single = project_measure(&[(p, 1.0)], 1.0, 8).unwrap();
        assert_eq!(single.get(BasisIndex::CONSTANT), 1.0);
        for (i, c) in single.iter() {
            assert!((c - basis_eval(i, p)).abs() < 1e-12);
        }
        let cancel = project_measure(&[(p, 1.0), (p, -1.0)], 1.0, 8).unwrap();
        assert!(cancel.iter().all(|(_, c)| c == 0.0));
    }

    #[test]
    fn uniform_atoms_decay_like_inverse_sqrt_n() {
        let rms = |n: usize| {
            let mut total = 0.0;
            for seed in 0..50 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let atoms: Vec<_> = (0..n).map(|_| (pt(rng.random(), rng.random()), 1.0 / n as f64)).collect();
                let f = project_measure(&atoms, 1.0, 8).unwrap();
                assert!((f.get(BasisIndex::CONSTANT) - 1.0).abs() < 1e-12);
                total += f.iter().skip(1).map(|(_, c)| c * c).sum::<f64>();
            }
            libm::sqrt(total / 50.0)
        };
        // Every non-constant mode has unit variance under the uniform law.
        let (a, b) = (rms(100), rms(1600));
        let expected = libm::sqrt((mode_count(8) - 1) as f64);
        assert!((a * 10.0 / expected - 1.0).abs() < 0.1);
        assert!((a / b / 4.0 - 1.0).abs() < 0.15);
    }

    #[test]
    fn norm_examples() {
        let zero = SpectralField::zeros(1.0, 16).unwrap();
        assert_eq!(zero.h_neg_s_norm(1.5), 0.0);
        let lebesgue = project_grid(&GridField::constant(64, 1.0), 1.0, 32).unwrap();
        for s in [0.5, 1.5, 2.5] {
            assert!((lebesgue.h_neg_s_norm(s) - 1.0).abs() < 1e-12);
            assert!((lebesgue.hs_norm(s) - 1.0).abs() < 1e-12);
        }
        let mut mode = SpectralField::zeros(1.0, 16).unwrap();
        mode.set(idx(3, 2, 2), 1.0).unwrap();
        assert!((mode.hs_norm(2.0) - (1.0 + 8.0 * PI * PI)).abs() < 1e-10);
        let mut two = mode.clone();
        two.set(idx(6, 4, 0), 1.0).unwrap();
        let mut other = SpectralField::zeros(1.0, 16).unwrap();
        other.set(idx(6, 4, 0), 1.0).unwrap();
        let pyth = libm::sqrt(mode.hs_norm(1.3).powi(2) + other.hs_norm(1.3).powi(2));
        assert!((two.hs_norm(1.3) - pyth).abs() < 1e-12 * pyth);
    }

    #[test]
    fn dirac_norm_extrapolates_to_the_partial_sum_limit() {
        // ||delta_0||^2 in H^{-1.5} with gamma = 1: increments halve per doubling.
        let norm_sq = |c: u32| project_measure(&[(TorusPoint::ORIGIN, 1.0)], 1.0, c).unwrap().h_neg_s_norm(1.5).powi(2);
        let (a, b, c) = (norm_sq(16), norm_sq(32), norm_sq(64));
        assert!(a < b && b < c);
        let ratio = (c - b) / (b - a);
        let extrapolated = c + (c - b) * ratio / (1.0 - ratio);
        let oracle = appendix_sum_diagnostic(1.5, 1.0, TorusPoint::ORIGIN, &[2048]).unwrap()[0].rho_sq;
        assert!((extrapolated - oracle).abs() < 1e-3 * oracle, "{extrapolated} vs {oracle}");
    }

    #[test]
    fn heat_examples() {
        let mut f = SpectralField::zeros(1.0, 8).unwrap();
        f.set(idx(3, 2, 2), 1.0).unwrap();
        f.set(BasisIndex::CONSTANT, 0.7).unwrap();
        assert_eq!(f.heat_apply(0.0).unwrap(), f);
        let g = f.heat_apply(0.1).unwrap();
        assert_eq!(g.get(BasisIndex::CONSTANT), 0.7);
        assert!((g.get(idx(3, 2, 2)) - 3.719e-4).abs() < 1e-6);
        assert!(f.heat_apply(-1.0).is_err());
    }

    #[test]
    fn diagnostic_examples() {
        let cut = [64, 128, 256, 512];
        let s2 = appendix_sum_diagnostic(2.0, 1.0, TorusPoint::ORIGIN, &cut).unwrap();
        assert!(s2[2].rho_sq - s2[1].rho_sq < 1e-3 && s2[3].rho_sq - s2[2].rho_sq < 1e-3);
        let s05 = appendix_sum_diagnostic(0.5, 1.0, TorusPoint::ORIGIN, &cut).unwrap();
        for w in s05.windows(2) {
            assert!(w[1].rho_sq >= 1.5 * w[0].rho_sq);
        }
        let grad = |s: f64| {
            let rows = appendix_sum_diagnostic(s, 1.0, TorusPoint::ORIGIN, &cut).unwrap();
            classify_doubling_sums(&rows.iter().map(|r| r.grad_sq).collect::<Vec<_>>()).unwrap()
        };
        assert_eq!(grad(2.5), SeriesBehaviour::Convergent);
        assert_eq!(grad(1.5), SeriesBehaviour::Divergent);
        assert_eq!(grad(2.0), SeriesBehaviour::Marginal);
    }

    #[test]
    fn classifier_needs_three_sums() {
        assert!(classify_doubling_sums(&[1.0, 2.0]).is_err());
        assert_eq!(classify_doubling_sums(&[1.0, 2.0, 4.0]).unwrap(), SeriesBehaviour::Divergent);
        assert_eq!(classify_doubling_sums(&[1.0, 2.0, 2.5]).unwrap(), SeriesBehaviour::Convergent);
        assert_eq!(classify_doubling_sums(&[1.0, 2.0, 3.0]).unwrap(), SeriesBehaviour::Marginal);
    }

    fn arb_field() -> impl Strategy<Value = SpectralField> {
        proptest::collection::vec(-1.0..1.0f64, mode_count(8))
            .prop_map(|v| SpectralField::from_vec(0.3, 8, &v).unwrap())
    }

    proptest! {
        #[test]
        fn heat_semigroup_law(f in arb_field(), t1 in 0.0..0.5f64, t2 in 0.0..0.5f64) {
            let a = f.heat_apply(t1).unwrap().heat_apply(t2).unwrap();
            let b = f.heat_apply(t1 + t2).unwrap();
            for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn heat_contracts_hs_norms(f in arb_field(), t in 1e-4..2.0f64, s in 0.1..3.0f64) {
            prop_assert!(f.heat_apply(t).unwrap().hs_norm(s) <= f.hs_norm(s) * (1.0 + 1e-14));
        }

        #[test]
        fn parseval_round_trip(f in arb_field(), s in 0.0..2.0f64) {
            // Weighted grid quadrature: sum over modes of (1+lambda)^s (u, f_k)^2 read off the grid.
            let grid = f.synthesize(32).unwrap();
            let back = project_grid(&grid, 0.3, 8).unwrap();
            prop_assert!((back.hs_norm(s) - f.hs_norm(s)).abs() <= 1e-10 * (1.0 + f.hs_norm(s)));
            let l2 = libm::sqrt(grid.inner(&grid).unwrap());
            prop_assert!((l2 - f.hs_norm(0.0)).abs() <= 1e-10 * (1.0 + l2));
        }

        #[test]
        fn negative_norm_monotone_in_cutoff(x in 0.0..1.0f64, y in 0.0..1.0f64, s in 0.5..3.0f64) {
            let atoms = [(pt(x, y), 1.0), (pt(y, x), -0.5)];
            let mut last = 0.0;
            for c in [4, 8, 16, 32] {
                let v = project_measure(&atoms, 1.0, c).unwrap().h_neg_s_norm(s);
                prop_assert!(v >= last - 1e-12);
                last = v;
            }
        }
    }
}
