//! Small statistical building blocks shared by the Monte Carlo modules.

use statrs::distribution::{Beta, ContinuousCDF};

/// Neumaier-compensated running sum.
///
/// Partial sums from independent chunks can be merged with [`merge`](Self::merge);
/// the result does not depend on how the chunks were scheduled as long as they
/// are merged in index order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().copied().collect::<CompensatedSum>().value() / values.len() as f64
}

/// Exact (Clopper-Pearson) two-sided binomial confidence interval for
/// `successes` out of `trials` at confidence `1 - level`.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let k = successes as f64;
    let n = trials as f64;
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .expect("positive beta parameters")
            .inverse_cdf(level / 2.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .expect("positive beta parameters")
            .inverse_cdf(1.0 - level / 2.0)
    };
    // inverse_cdf is a numerical inversion; keep the point estimate inside.
    let p = k / n;
    (lower.min(p), upper.max(p))
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let s: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e-3 + 1.0).collect();
        let whole: CompensatedSum = xs.iter().copied().collect();
        let mut merged = CompensatedSum::new();
        for chunk in xs.chunks(37) {
            merged.merge(&chunk.iter().copied().collect());
        }
        assert!(close(whole.value(), merged.value(), 1e-12));
    }

    #[test]
    fn clopper_pearson_reference_values() {
        // Reference: scipy.stats.beta.ppf.
        let (lo, hi) = clopper_pearson(5, 20, 0.05);
        assert!(close(lo, 0.086_571_5, 1e-6), "{lo}");
        assert!(close(hi, 0.491_045_9, 1e-6), "{hi}");
        let (lo, hi) = clopper_pearson(0, 100, 0.05);
        assert_eq!(lo, 0.0);
        assert!(close(hi, 0.036_216_7, 1e-6), "{hi}");
        let (lo, hi) = clopper_pearson(100, 100, 0.05);
        assert!(close(lo, 0.963_783_3, 1e-6), "{lo}");
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 1.0).collect();
        let (slope, icpt) = linear_fit(&x, &y).unwrap();
        assert!(close(slope, 0.5, 1e-12) && close(icpt, -1.0, 1e-12));
    }
}
