//! Radix-2 complex FFT on square periodic grids.
//!
//! Layout is row-major with the first coordinate major: entry `i1 * n + i2`.
//! Neither direction is normalized.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::math::PI;

#[derive(Debug, Clone)]
pub struct Fft2 {
    n: usize,
    /// Stage twiddles laid out contiguously: stage with half-length `m` starts at `m - 1`.
    forward_twiddles: Vec<Complex64>,
    backward_twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft2 {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(invalid("n_grid", "transform size must be a power of two >= 2"));
        }
        let mut forward_twiddles = Vec::with_capacity(n);
        let mut half = 1;
        while half < n {
            for k in 0..half {
                let theta = -PI * k as f64 / half as f64;
                forward_twiddles.push(Complex64::new(libm::cos(theta), libm::sin(theta)));
            }
            half <<= 1;
        }
        let backward_twiddles = forward_twiddles.iter().map(|w| w.conj()).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        Ok(Self { n, forward_twiddles, backward_twiddles, bitrev })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `X[k] = sum_j x[j] exp(-2 pi i j.k / n)` over both axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform_2d(data, &self.forward_twiddles);
    }

    /// `x[j] = sum_k X[k] exp(+2 pi i j.k / n)`; divide by `n^2` to invert `forward`.
    pub fn backward(&self, data: &mut [Complex64]) {
        self.transform_2d(data, &self.backward_twiddles);
    }

    fn transform_2d(&self, data: &mut [Complex64], twiddles: &[Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "fft buffer must hold n^2 entries");
        for row in data.chunks_exact_mut(n) {
            self.transform_1d(row, twiddles);
        }
        // Columns: the same butterflies applied to whole rows at once.
        self.transform_rows(data, n, twiddles);
    }

    fn transform_1d(&self, buf: &mut [Complex64], twiddles: &[Complex64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let w = &twiddles[half - 1..2 * half - 1];
            for chunk in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = chunk.split_at_mut(half);
                for ((a, b), &tw) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let t = *b * tw;
                    *b = *a - t;
                    *a += t;
                }
            }
            half <<= 1;
        }
    }

    /// In-place FFT over `n` blocks of `width` contiguous entries each.
    fn transform_rows(&self, buf: &mut [Complex64], width: usize, twiddles: &[Complex64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                let (lo, hi) = buf.split_at_mut(j * width);
                lo[i * width..(i + 1) * width].swap_with_slice(&mut hi[..width]);
            }
        }
        let mut half = 1;
        while half < n {
            let w = &twiddles[half - 1..2 * half - 1];
            for start in (0..n).step_by(2 * half) {
                for (k, &tw) in w.iter().enumerate() {
                    let top = (start + k) * width;
                    let bottom = (start + k + half) * width;
                    let (lo, hi) = buf.split_at_mut(bottom);
                    for (a, b) in lo[top..top + width].iter_mut().zip(&mut hi[..width]) {
                        let t = *b * tw;
                        *b = *a - t;
                        *a += t;
                    }
                }
            }
            half <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_dft(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for k1 in 0..n {
            for k2 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j1 in 0..n {
                    for j2 in 0..n {
                        let theta = -2.0 * PI * ((j1 * k1 + j2 * k2) % n) as f64 / n as f64;
                        acc += data[j1 * n + j2] * Complex64::new(libm::cos(theta), libm::sin(theta));
                    }
                }
                out[k1 * n + k2] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 8;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new(libm::sin(i as f64 * 0.37), libm::cos(i as f64 * 1.3)))
            .collect();
        let mut fast = data.clone();
        Fft2::new(n).unwrap().forward(&mut fast);
        for (a, b) in fast.iter().zip(naive_dft(&data, n)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity_after_scaling() {
        let n = 16;
        let fft = Fft2::new(n).unwrap();
        let data: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut buf = data.clone();
        fft.forward(&mut buf);
        fft.backward(&mut buf);
        let scale = (n * n) as f64;
        for (a, b) in buf.iter().zip(&data) {
            assert!((a / scale - b).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Fft2::new(12).is_err());
    }
}
