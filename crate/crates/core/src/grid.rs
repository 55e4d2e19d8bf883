//! Periodic uniform grids on the torus.
//!
//! Node `(i1, i2)` sits at `(i1 h, i2 h)` with `h = 1/n` and represents the
//! cell `[(i1 - 1/2) h, (i1 + 1/2) h) x [(i2 - 1/2) h, (i2 + 1/2) h)`.
//! Values are stored first-coordinate major: `values[i1 * n + i2]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::CompensatedSum;
use crate::torus::TorusPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n_grid", "must be positive"));
        }
        if values.len() != n * n {
            return Err(Error::GridMismatch { expected: n * n, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { n, values: vec![c; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(TorusPoint) -> f64) -> Self {
        let h = 1.0 / n as f64;
        let mut values = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                values.push(f(TorusPoint::wrap(i1 as f64 * h, i2 as f64 * h).expect("grid nodes are finite")));
            }
        }
        Self { n, values }
    }

    pub(crate) fn from_raw(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.n + i2]
    }

    pub fn node(&self, i1: usize, i2: usize) -> TorusPoint {
        let h = self.spacing();
        TorusPoint::wrap(i1 as f64 * h, i2 as f64 * h).expect("grid nodes are finite")
    }

    /// Index of the node whose cell contains `p`.
    pub fn cell_index(&self, p: TorusPoint) -> usize {
        let n = self.n;
        let axis = |x: f64| ((libm::floor(x * n as f64 + 0.5)) as usize) % n;
        axis(p.x1()) * n + axis(p.x2())
    }

    /// Piecewise-constant reading: the value of the cell containing `p`.
    pub fn cell_value(&self, p: TorusPoint) -> f64 {
        self.values[self.cell_index(p)]
    }

    /// `h^2 * sum(values)`.
    pub fn mass(&self) -> f64 {
        let h = self.spacing();
        self.values.iter().copied().collect::<CompensatedSum>().value() * h * h
    }

    /// `h^2 * sum(self * other)`.
    pub fn inner(&self, other: &GridField) -> Result<f64> {
        self.check_same(other)?;
        let h = self.spacing();
        let acc: CompensatedSum = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(acc.value() * h * h)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &GridField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GridField {
        Self { n: self.n, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &GridField, mut f: impl FnMut(f64, f64) -> f64) -> Result<GridField> {
        self.check_same(other)?;
        Ok(Self { n: self.n, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() })
    }

    pub fn scale(&self, c: f64) -> GridField {
        self.map(|v| c * v)
    }

    pub fn check_same(&self, other: &GridField) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_of_constant_is_exact() {
        assert_eq!(GridField::constant(64, 1.0).mass(), 1.0);
        assert_eq!(GridField::constant(16, 2.5).mass(), 2.5);
    }

    #[test]
    fn nodes_and_cells_agree() {
        let g = GridField::from_fn(8, |p| p.x1() * 10.0 + p.x2());
        assert_eq!(g.at(3, 5), 3.0 / 8.0 * 10.0 + 5.0 / 8.0);
        let p = TorusPoint::wrap(3.4 / 8.0, 4.6 / 8.0).unwrap();
        assert_eq!(g.cell_value(p), g.at(3, 5));
        let wrap = TorusPoint::wrap(7.7 / 8.0, 0.2 / 8.0).unwrap();
        assert_eq!(g.cell_index(wrap), 0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridField::new(4, vec![0.0; 15]).is_err());
        assert!(GridField::new(2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(GridField::zeros(4).inner(&GridField::zeros(8)).is_err());
    }
}
