//! Geometry of the flat unit torus and the interaction kernel.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::PI;

/// A point of `[0,1)^2` with periodic identification.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawPoint"))]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawPoint {
    x1: f64,
    x2: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<RawPoint> for TorusPoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        Self::wrap(raw.x1, raw.x2)
    }
}

#[inline]
fn reduce(x: f64) -> f64 {
    let r = x - libm::floor(x);
    // x slightly below an integer rounds r up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    /// Reduces each coordinate mod 1.
    pub fn wrap(x1: f64, x2: f64) -> Result<Self> {
        if !x1.is_finite() || !x2.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { x1: reduce(x1), x2: reduce(x2) })
    }

    pub const ORIGIN: Self = Self { x1: 0.0, x2: 0.0 };

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    /// Moves by a finite displacement and wraps.
    #[inline]
    pub fn translate(self, d1: f64, d2: f64) -> Self {
        debug_assert!(d1.is_finite() && d2.is_finite());
        Self { x1: reduce(self.x1 + d1), x2: reduce(self.x2 + d2) }
    }
}

/// Minimal-image signed displacement from `a` to `b` along one axis, in `[-1/2, 1/2]`.
#[inline]
pub fn axis_offset(a: f64, b: f64) -> f64 {
    let d = b - a;
    if d > 0.5 {
        d - 1.0
    } else if d < -0.5 {
        d + 1.0
    } else {
        d
    }
}

#[inline]
pub fn torus_distance_sq(a: TorusPoint, b: TorusPoint) -> f64 {
    let d1 = libm::fabs(a.x1 - b.x1);
    let d2 = libm::fabs(a.x2 - b.x2);
    let d1 = d1.min(1.0 - d1);
    let d2 = d2.min(1.0 - d2);
    d1 * d1 + d2 * d2
}

/// Geodesic distance; at most `sqrt(2)/2`.
pub fn torus_distance(a: TorusPoint, b: TorusPoint) -> f64 {
    libm::sqrt(torus_distance_sq(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum KernelMode {
    /// `k(u) = amplitude * (1 - u/R^2)^m` on `[0, R^2]`, zero beyond.
    Bump,
    /// `K = amplitude` everywhere; has no compact support.
    Constant,
}

/// `K(x, y) = k(d(x, y)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct KernelSpec {
    pub radius: f64,
    pub exponent: u32,
    #[cfg_attr(feature = "serde", serde(default = "unit_amplitude"))]
    pub amplitude: f64,
    #[cfg_attr(feature = "serde", serde(default = "bump_mode"))]
    pub mode: KernelMode,
}

#[cfg(feature = "serde")]
fn unit_amplitude() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn bump_mode() -> KernelMode {
    KernelMode::Bump
}

#[inline]
fn ipow(mut base: f64, mut e: u32) -> f64 {
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

impl KernelSpec {
    pub fn bump(radius: f64, exponent: u32) -> Result<Self> {
        let spec = Self { radius, exponent, amplitude: 1.0, mode: KernelMode::Bump };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(amplitude: f64) -> Result<Self> {
        let spec = Self { radius: 0.5, exponent: 4, amplitude, mode: KernelMode::Constant };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        self.amplitude = amplitude;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid("kernel.amplitude", "must be a positive finite number"));
        }
        if self.mode == KernelMode::Bump {
            if !(self.radius > 0.0 && self.radius < 0.5) {
                return Err(invalid("kernel.radius", "must lie in (0, 1/2)"));
            }
            if self.exponent < 4 {
                return Err(invalid("kernel.exponent", "must be at least 4 for a C^3 profile"));
            }
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.mode == KernelMode::Constant
    }

    /// Support radius, `None` for the constant mode.
    pub fn support_radius(&self) -> Option<f64> {
        match self.mode {
            KernelMode::Bump => Some(self.radius),
            KernelMode::Constant => None,
        }
    }

    /// The profile `k(u)` at squared distance `u`.
    #[inline]
    pub fn profile(&self, u: f64) -> f64 {
        match self.mode {
            KernelMode::Constant => self.amplitude,
            KernelMode::Bump => {
                let r2 = self.radius * self.radius;
                if u >= r2 {
                    0.0
                } else {
                    self.amplitude * ipow(1.0 - u / r2, self.exponent)
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, a: TorusPoint, b: TorusPoint) -> f64 {
        self.profile(torus_distance_sq(a, b))
    }

    /// `k(0)`, the self-interaction weight.
    pub fn peak(&self) -> f64 {
        self.amplitude
    }

    /// Lipschitz constant of `u -> k(u)`.
    pub fn lipschitz_constant(&self) -> f64 {
        match self.mode {
            KernelMode::Constant => 0.0,
            KernelMode::Bump => self.amplitude * self.exponent as f64 / (self.radius * self.radius),
        }
    }

    /// `integral of K(x, y) dx`, independent of `y`.
    pub fn total_mass(&self) -> f64 {
        match self.mode {
            KernelMode::Constant => self.amplitude,
            KernelMode::Bump => self.amplitude * PI * self.radius * self.radius / (self.exponent as f64 + 1.0),
        }
    }
}

/// Uniform bucket grid over the torus with cells no smaller than the kernel radius.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cells: usize,
    starts: Vec<u32>,
    entries: Vec<u32>,
    cell_of: Vec<u32>,
}

impl SpatialIndex {
    /// Cell size `max(radius, 1/64)`.
    pub fn new(radius: f64) -> Self {
        let size = radius.max(1.0 / 64.0);
        let cells = (libm::floor(1.0 / size) as usize).max(1);
        Self { cells, starts: vec![0; cells * cells + 1], entries: Vec::new(), cell_of: Vec::new() }
    }

    pub fn build(points: &[TorusPoint], radius: f64) -> Self {
        let mut index = Self::new(radius);
        index.rebuild(points);
        index
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    #[inline]
    fn axis_cell(&self, x: f64) -> usize {
        ((x * self.cells as f64) as usize).min(self.cells - 1)
    }

    #[inline]
    fn cell(&self, p: TorusPoint) -> usize {
        self.axis_cell(p.x1) * self.cells + self.axis_cell(p.x2)
    }

    /// Counting-sort rebuild; stable in point order within each cell.
    pub fn rebuild(&mut self, points: &[TorusPoint]) {
        let n_cells = self.cells * self.cells;
        self.starts.clear();
        self.starts.resize(n_cells + 1, 0);
        self.cell_of.clear();
        for p in points {
            let c = self.cell(*p);
            self.cell_of.push(c as u32);
            self.starts[c + 1] += 1;
        }
        for c in 0..n_cells {
            self.starts[c + 1] += self.starts[c];
        }
        self.entries.clear();
        self.entries.resize(points.len(), 0);
        let mut cursor: Vec<u32> = self.starts[..n_cells].to_vec();
        for (i, &c) in self.cell_of.iter().enumerate() {
            let slot = &mut cursor[c as usize];
            self.entries[*slot as usize] = i as u32;
            *slot += 1;
        }
    }

    /// Visits every indexed point in the block of cells around `p`, each once.
    /// Every point within the cell size of `p` is visited.
    #[inline]
    pub fn for_each_candidate(&self, p: TorusPoint, mut f: impl FnMut(usize)) {
        let m = self.cells;
        if m < 3 {
            for &e in &self.entries {
                f(e as usize);
            }
            return;
        }
        let c1 = self.axis_cell(p.x1);
        let c2 = self.axis_cell(p.x2);
        for d1 in [m - 1, 0, 1] {
            let r = (c1 + d1) % m;
            for d2 in [m - 1, 0, 1] {
                let c = r * m + (c2 + d2) % m;
                let (lo, hi) = (self.starts[c] as usize, self.starts[c + 1] as usize);
                for &e in &self.entries[lo..hi] {
                    f(e as usize);
                }
            }
        }
    }
}

/// `sum_l K(X_l, X_j)` for every `j`, via the bucket grid.
pub fn kernel_column_sums(spec: &KernelSpec, points: &[TorusPoint]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if spec.is_constant() {
        return Ok(vec![spec.amplitude * points.len() as f64; points.len()]);
    }
    let index = SpatialIndex::build(points, spec.radius);
    Ok(points
        .iter()
        .map(|&pj| {
            let mut acc = 0.0;
            index.for_each_candidate(pj, |l| acc += spec.eval(points[l], pj));
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x1: f64, x2: f64) -> TorusPoint {
        TorusPoint::wrap(x1, x2).unwrap()
    }

    #[test]
    fn wrap_reduces_mod_one() {
        assert_eq!(pt(1.25, -0.25), pt(0.25, 0.75));
        assert_eq!(pt(0.25, 0.75).x1(), 0.25);
        assert_eq!(pt(3.0, 2.0), TorusPoint::ORIGIN);
        assert_eq!(pt(0.0, 0.0), TorusPoint::ORIGIN);
        let tiny = pt(-1e-18, 0.0);
        assert!(tiny.x1() < 1.0);
        assert!(TorusPoint::wrap(f64::NAN, 0.0).is_err());
        assert!(TorusPoint::wrap(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(torus_distance(TorusPoint::ORIGIN, TorusPoint::ORIGIN), 0.0);
        assert!((torus_distance(pt(0.1, 0.0), pt(0.9, 0.0)) - 0.2).abs() < 1e-15);
        assert!((torus_distance(TorusPoint::ORIGIN, pt(0.5, 0.5)) - libm::sqrt(0.5)).abs() < 1e-15);
    }

    #[test]
    fn kernel_examples() {
        let k = KernelSpec::bump(0.2, 4).unwrap();
        assert_eq!(k.eval(pt(0.3, 0.3), pt(0.3, 0.3)), 1.0);
        assert_eq!(k.eval(pt(0.0, 0.0), pt(0.2, 0.0)), 0.0);
        assert_eq!(k.eval(pt(0.0, 0.0), pt(0.0, 0.35)), 0.0);
        assert!((k.profile(0.01) - 0.31640625).abs() < 1e-15);
        assert!(KernelSpec::bump(0.5, 4).is_err());
        assert!(KernelSpec::bump(0.2, 3).is_err());
        assert!(KernelSpec::bump(0.2, 4).unwrap().with_amplitude(0.0).is_err());
    }

    #[test]
    fn column_sums_small_cases() {
        let k = KernelSpec::bump(0.2, 4).unwrap();
        assert!(kernel_column_sums(&k, &[]).is_err());
        assert_eq!(kernel_column_sums(&k, &[pt(0.4, 0.1)]).unwrap(), vec![1.0]);
        assert_eq!(kernel_column_sums(&k, &[pt(0.1, 0.1), pt(0.6, 0.6)]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn binned_column_sums_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (radius, n) in [(0.2, 100), (0.05, 500), (0.4, 60), (0.01, 300)] {
            let k = KernelSpec::bump(radius, 4).unwrap();
            let pts: Vec<TorusPoint> = (0..n).map(|_| pt(rng.random(), rng.random())).collect();
            let binned = kernel_column_sums(&k, &pts).unwrap();
            for (j, &b) in binned.iter().enumerate() {
                let brute: f64 = pts.iter().map(|&l| k.eval(l, pts[j])).sum();
                assert!((b - brute).abs() < 1e-12, "radius {radius}: {b} vs {brute}");
            }
        }
    }

    #[test]
    fn constant_mode_sums_are_n_times_amplitude() {
        let k = KernelSpec::constant(2.0).unwrap();
        let pts = [pt(0.1, 0.1), pt(0.9, 0.2), pt(0.5, 0.5)];
        assert_eq!(kernel_column_sums(&k, &pts).unwrap(), vec![6.0; 3]);
    }

    #[test]
    fn candidate_scan_visits_each_point_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<TorusPoint> = (0..400).map(|_| pt(rng.random(), rng.random())).collect();
        for radius in [0.3, 0.2, 0.1, 0.001] {
            let index = SpatialIndex::build(&pts, radius);
            let mut seen = vec![0u32; pts.len()];
            index.for_each_candidate(pt(0.02, 0.97), |l| seen[l] += 1);
            assert!(seen.iter().all(|&c| c <= 1));
            for (l, &c) in seen.iter().enumerate() {
                if torus_distance(pts[l], pt(0.02, 0.97)) < radius {
                    assert_eq!(c, 1);
                }
            }
        }
    }

    fn arb_point() -> impl Strategy<Value = TorusPoint> {
        (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| pt(a, b))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = torus_distance(a, b);
            prop_assert!(ab >= 0.0 && ab <= libm::sqrt(0.5) + 1e-15);
            prop_assert_eq!(ab, torus_distance(b, a));
            prop_assert!(ab <= torus_distance(a, c) + torus_distance(c, b) + 1e-12);
            prop_assert_eq!(torus_distance(a, a), 0.0);
        }

        #[test]
        fn wrapped_coordinates_stay_in_unit_interval(x in -1e6..1e6f64, y in -1e6..1e6f64) {
            let p = pt(x, y);
            prop_assert!((0.0..1.0).contains(&p.x1()) && (0.0..1.0).contains(&p.x2()));
        }

        #[test]
        fn kernel_symmetric_and_lipschitz(
            x in arb_point(), y in arb_point(), xp in arb_point(), yp in arb_point(),
            radius in 0.02..0.49f64, m in 4u32..9,
        ) {
            let k = KernelSpec::bump(radius, m).unwrap();
            prop_assert_eq!(k.eval(x, y), k.eval(y, x));
            let lhs = (k.eval(x, y) - k.eval(xp, yp)).abs();
            let rhs = 2.0 * libm::sqrt(2.0) * k.lipschitz_constant()
                * (torus_distance(x, xp) + torus_distance(y, yp));
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn kernel_profile_non_increasing(radius in 0.02..0.49f64, u in 0.0..0.25f64, du in 0.0..0.1f64) {
            let k = KernelSpec::bump(radius, 4).unwrap();
            prop_assert!(k.profile(u + du) <= k.profile(u));
        }
    }
}
