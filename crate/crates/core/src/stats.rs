//! Monte Carlo summaries: means with standard errors, bootstrap, medians and
//! the one-sample Kolmogorov-Smirnov test.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::math::CompensatedSum;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `(mean - target) / se`; infinite when `se == 0` and the mean misses the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// One line of a comparison report: an estimate with its standard error
/// against a predicted value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportRow {
    pub quantity: alloc::string::String,
    pub estimate: f64,
    pub se: f64,
    pub predicted: f64,
    pub z_score: f64,
}

impl ReportRow {
    pub fn new(quantity: impl Into<alloc::string::String>, estimate: Estimate, predicted: f64) -> Self {
        Self {
            quantity: quantity.into(),
            estimate: estimate.mean,
            se: estimate.se,
            predicted,
            z_score: estimate.z_score(predicted),
        }
    }

    /// Mean of `samples` against `predicted`.
    pub fn from_samples(quantity: impl Into<alloc::string::String>, samples: &[f64], predicted: f64) -> Result<Self> {
        Ok(Self::new(quantity, estimate(samples)?, predicted))
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).collect::<CompensatedSum>().value() / (xs.len() - 1) as f64
}

/// Unbiased sample covariance of paired samples.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect::<CompensatedSum>().value() / (xs.len() - 1) as f64
}

pub fn estimate(xs: &[f64]) -> Result<Estimate> {
    if xs.is_empty() {
        return Err(invalid("samples", "need at least one sample"));
    }
    Ok(Estimate { mean: mean(xs), se: libm::sqrt(variance(xs) / xs.len() as f64) })
}

/// Median by sorting a copy; the mean of the two middle values for even lengths.
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(invalid("samples", "need finite samples"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

/// Bootstrap standard error of `statistic` over resamples of the rows of `data`.
pub fn bootstrap_se<T, R: Rng + ?Sized>(
    data: &[T],
    resamples: usize,
    rng: &mut R,
    mut statistic: impl FnMut(&[&T]) -> f64,
) -> Result<f64> {
    if data.is_empty() || resamples < 2 {
        return Err(invalid("bootstrap", "need data and at least two resamples"));
    }
    let mut draws = Vec::with_capacity(resamples);
    let mut sample: Vec<&T> = Vec::with_capacity(data.len());
    for _ in 0..resamples {
        sample.clear();
        for _ in 0..data.len() {
            sample.push(&data[rng.random_range(0..data.len())]);
        }
        draws.push(statistic(&sample));
    }
    Ok(libm::sqrt(variance(&draws)))
}

/// `sup_x |F_n(x) - F(x)|` for the empirical law of `xs` against the continuous CDF `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if xs.is_empty() || xs.iter().any(|x| x.is_nan()) {
        return Err(invalid("samples", "need non-empty samples without NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic p-value of the statistic `d` on `n` samples, with the usual
/// small-sample correction of the argument.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let rn = libm::sqrt(n as f64);
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = libm::exp(-2.0 * kf * kf * lambda * lambda);
        acc += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn moments_of_small_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert!((covariance(&xs, &xs) - variance(&xs)).abs() < 1e-15);
        assert_eq!(median(&xs).unwrap(), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn z_score_conventions() {
        assert_eq!(Estimate { mean: 1.0, se: 0.0 }.z_score(1.0), 0.0);
        assert_eq!(Estimate { mean: 2.0, se: 0.5 }.z_score(1.0), 2.0);
        assert!(Estimate { mean: 0.0, se: 0.0 }.z_score(1.0).is_infinite());
    }

    #[test]
    fn bootstrap_se_of_mean_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let se = bootstrap_se(&xs, 2000, &mut rng, |s| s.iter().map(|x| **x).sum::<f64>() / s.len() as f64).unwrap();
        let formula = libm::sqrt(variance(&xs) / 400.0);
        assert!((se / formula - 1.0).abs() < 0.1, "{se} vs {formula}");
    }

    #[test]
    fn ks_accepts_true_law_and_rejects_wrong_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..2000).map(|_| Exp1.sample(&mut rng)).collect();
        let d = ks_statistic(&xs, |x| 1.0 - libm::exp(-x)).unwrap();
        assert!(ks_p_value(d, xs.len()) > 0.01);
        let d = ks_statistic(&xs, |x| 1.0 - libm::exp(-1.2 * x)).unwrap();
        assert!(ks_p_value(d, xs.len()) < 0.01);
    }

    #[test]
    fn ks_p_value_reference_points() {
        // Kolmogorov distribution: P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098.
        let n = 1_000_000;
        let rn = 1000.0;
        assert!((ks_p_value(1.358 / rn, n) - 0.05).abs() < 2e-3);
        assert!((ks_p_value(1.628 / rn, n) - 0.01).abs() < 1e-3);
    }
}
