use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

/// Streaming count, mean and centred sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pairwise combination; associative up to rounding, and deterministic
    /// when merges happen in a fixed order.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// Mean squared distance to `target`: `(n-1)/n s^2 + (mean - target)^2`.
    pub fn mean_square_about(&self, target: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        self.m2 / n + (self.mean - target).powi(2)
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut s = RunningStats::default();
        values.iter().for_each(|&v| s.push(v));
        s
    }
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Goodness of fit of non-negative counts against `Poisson(mean)`. Bins are
/// merged from the upper tail (the last bin is open) until every expected
/// frequency is at least 5.
pub fn poisson_chi_square(counts: &[usize], mean: f64) -> Result<ChiSquareTest> {
    if counts.is_empty() || mean.is_nan() || mean <= 0.0 {
        return Err(Error::Verification("chi-square needs samples and a positive mean".into()));
    }
    let n = counts.len() as f64;
    let dist = Poisson::new(mean).map_err(|e| Error::Verification(e.to_string()))?;
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0.0; max + 2];
    for &c in counts {
        observed[c] += 1.0;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut cdf = 0.0;
    for (k, &obs) in observed.iter().enumerate().take(max + 1) {
        let pk = dist.pmf(k as u64);
        cdf += pk;
        bins.push((obs, n * pk));
    }
    bins.push((observed[max + 1], n * (1.0 - cdf).max(0.0)));
    while bins.len() > 1 && bins.last().is_some_and(|b| b.1 < 5.0) {
        let (o, e) = bins.pop().expect("non-empty");
        let last = bins.last_mut().expect("non-empty");
        last.0 += o;
        last.1 += e;
    }
    let first_ok = bins.iter().position(|b| b.1 >= 5.0).unwrap_or(0);
    if first_ok > 0 {
        let (o, e) = bins[..first_ok].iter().fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
        bins.drain(..first_ok);
        bins[0].0 += o;
        bins[0].1 += e;
    }
    if bins.len() < 2 {
        return Err(Error::Verification("too few populated bins for chi-square".into()));
    }
    let statistic = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::Verification(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: 1.0 - chi.cdf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_mean_and_error() {
        let s = RunningStats::from_slice(&[1.0, 3.0]);
        assert_eq!(s.mean(), 2.0);
        assert!((s.standard_error() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let whole = RunningStats::from_slice(&xs);
        let mut parts = RunningStats::from_slice(&xs[..10]);
        parts.merge(&RunningStats::from_slice(&xs[10..]));
        assert!((whole.mean() - parts.mean()).abs() < 1e-13);
        assert!((whole.variance() - parts.variance()).abs() < 1e-12);
        assert_eq!(whole.count(), parts.count());
        let mut empty = RunningStats::default();
        empty.merge(&whole);
        assert_eq!(empty, whole);
    }

    #[test]
    fn mean_square_about_target() {
        let s = RunningStats::from_slice(&[1.0, 3.0]);
        assert!((s.mean_square_about(0.0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn chi_square_accepts_exact_frequencies() {
        let mean: f64 = 1.0;
        let mut counts = Vec::new();
        for (k, freq) in [(0usize, 3679), (1, 3679), (2, 1839), (3, 613), (4, 153), (5, 31), (6, 6)] {
            counts.extend(std::iter::repeat_n(k, freq));
        }
        let test = poisson_chi_square(&counts, mean).unwrap();
        assert!(test.p_value > 0.5, "{test:?}");
        let skewed: Vec<usize> = counts.iter().map(|c| c + 1).collect();
        assert!(poisson_chi_square(&skewed, mean).unwrap().p_value < 1e-6);
    }
}
