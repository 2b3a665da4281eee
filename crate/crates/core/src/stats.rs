//! Streaming moments and interval constructions.

use statrs::distribution::{Binomial, DiscreteCDF};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// One-pass mean and variance; `merge` combines disjoint streams.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sd() / (self.count as f64).sqrt()
        }
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Median of sorted data and a distribution-free ~95% interval
/// `[x_(l), x_(N-l+1)]` with `l` the 2.5% quantile of Binomial(N, 1/2).
pub fn median_with_ci(sorted: &[f64]) -> (f64, (f64, f64)) {
    let n = sorted.len();
    assert!(n > 0, "median of empty data");
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
    let l = (binom.inverse_cdf(0.025) as usize).clamp(1, n);
    let u = (n + 1 - l).clamp(1, n);
    let (l, u) = (l.min(u), l.max(u));
    (median, (sorted[l - 1], sorted[u - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 + 1e6).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let mut w = Welford::new();
        xs.iter().for_each(|&x| w.push(x));
        assert!((w.mean() - mean).abs() < 1e-9);
        assert!((w.variance() - var).abs() < 1e-6 * var);

        let mut a = Welford::new();
        let mut b = Welford::new();
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), 1000);
        assert!((a.mean() - mean).abs() < 1e-9);
        assert!((a.variance() - var).abs() < 1e-6 * var);
    }

    #[test]
    fn wilson_known_values() {
        // 0 of 10: upper limit z^2 / (n + z^2).
        let (lo, hi) = wilson(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((hi - lo - 2.0 * 0.0958).abs() < 2e-3);
    }

    #[test]
    fn median_ci_brackets_median() {
        let xs: Vec<f64> = (0..1001).map(|i| i as f64).collect();
        let (m, (lo, hi)) = median_with_ci(&xs);
        assert_eq!(m, 500.0);
        assert!(lo < 500.0 && hi > 500.0);
        // Half-width about 1.96 sqrt(N)/2 order statistics.
        assert!((hi - lo - 2.0 * 1.96 * 1001f64.sqrt() / 2.0).abs() < 3.0, "{lo} {hi}");
    }
}
