//! Symmetric Weibull laws `W_s(alpha)` and standardized alpha-subexponential
//! generators.
//!
//! A symmetric Weibull variable with shape `alpha` satisfies
//! `-log P{|xi| > x} = x^alpha` for `x >= 0`. Samples are produced by the
//! inverse CDF of `|xi|`, so tails are exact all the way out.

use rand::distr::OpenClosed01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::stats::CompensatedSum;

/// Largest `ln x` representable as a finite `f64`.
const LN_F64_MAX: f64 = 709.782_712_893_384;

/// Shape and scale data of a generator distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaLaw {
    alpha: f64,
    variance: f64,
    psi_scale: f64,
    standardized: bool,
}

impl AlphaLaw {
    /// Raw `W_s(alpha)`, unit Weibull scale.
    pub fn raw(alpha: f64) -> Result<Self> {
        Self::build(alpha, false)
    }

    /// `W_s(alpha)` divided by its standard deviation: mean 0, variance 1.
    pub fn standardized(alpha: f64) -> Result<Self> {
        Self::build(alpha, true)
    }

    fn build(alpha: f64, standardized: bool) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let variance = ws_moment(alpha, 2.0)?;
        // |xi|^alpha ~ Exp(1), so E exp(|xi|^alpha / t^alpha) = 1 / (1 - t^-alpha)
        // for t > 1, which equals 2 at t = 2^(1/alpha).
        let raw_psi = 2f64.powf(1.0 / alpha);
        let psi_scale = if standardized {
            raw_psi / variance.sqrt()
        } else {
            raw_psi
        };
        Ok(Self {
            alpha,
            variance,
            psi_scale,
            standardized,
        })
    }

    /// Replace the analytic psi_alpha scale, e.g. by an empirical estimate.
    pub fn with_psi_scale(mut self, psi_scale: f64) -> Self {
        self.psi_scale = psi_scale;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Variance of the raw law, `(2/alpha) Gamma(2/alpha)`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// psi_alpha norm `L` of one coordinate.
    pub fn psi_scale(&self) -> f64 {
        self.psi_scale
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Multiplier applied to raw `W_s(alpha)` draws.
    pub fn scale(&self) -> f64 {
        if self.standardized {
            1.0 / self.variance.sqrt()
        } else {
            1.0
        }
    }

    /// Variance of the values this law emits.
    pub fn output_variance(&self) -> f64 {
        if self.standardized {
            1.0
        } else {
            self.variance
        }
    }

    /// `E|xi|^p` of the emitted values.
    pub fn abs_moment(&self, p: f64) -> Result<f64> {
        Ok(ws_moment(self.alpha, p)? * self.scale().powf(p))
    }

    /// `P{|xi| > x}` of the emitted values.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        (-(x / self.scale()).powf(self.alpha)).exp()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(OpenClosed01);
        let magnitude = ws_inverse_cdf(u, self.alpha) * self.scale();
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.sample(rng);
        }
    }
}

/// Magnitude of a unit-scale `W_s(alpha)` draw at uniform level `u`:
/// `(-log u)^(1/alpha)`.
#[inline]
pub fn ws_inverse_cdf(u: f64, alpha: f64) -> f64 {
    (-u.ln()).powf(1.0 / alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub law: AlphaLaw,
}

pub fn sample_ws(law: &AlphaLaw, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = vec![0.0; count];
    law.fill(&mut rng, &mut values);
    Ok(SampleBatch {
        values,
        seed,
        law: *law,
    })
}

fn check_moment_args(alpha: f64, p: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid("p", format!("moment order must be >= 1, got {p}")));
    }
    Ok(())
}

/// `ln E|xi|^p = ln Gamma(p/alpha + 1)` for unit-scale `W_s(alpha)`.
pub fn ws_log_moment(alpha: f64, p: f64) -> Result<f64> {
    check_moment_args(alpha, p)?;
    Ok(ln_gamma(p / alpha + 1.0))
}

/// `E|xi|^p = (p/alpha) Gamma(p/alpha)` for unit-scale `W_s(alpha)`.
pub fn ws_moment(alpha: f64, p: f64) -> Result<f64> {
    let log_value = ws_log_moment(alpha, p)?;
    if log_value > LN_F64_MAX {
        return Err(Error::Overflow { log_value });
    }
    Ok(log_value.exp())
}

/// `||xi||_{L_p}`, evaluated in log space so it stays finite for any p.
pub fn ws_lp_norm(alpha: f64, p: f64) -> Result<f64> {
    Ok((ws_log_moment(alpha, p)? / p).exp())
}

/// Plug-in `(mean |x|^p)^(1/p)`, rescaled by the largest magnitude to avoid
/// overflow at large `p`.
pub fn empirical_lp_norm(values: &[f64], p: f64) -> f64 {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || values.is_empty() {
        return 0.0;
    }
    let sum: CompensatedSum = values.iter().map(|v| (v.abs() / peak).powf(p)).collect();
    peak * (sum.value() / values.len() as f64).powf(1.0 / p)
}

/// Bracket `theta1 <= ||xi||_{L_p} / p^(1/alpha) <= theta2` over a grid of `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub theta1: f64,
    pub theta2: f64,
    pub p_max: f64,
    /// False when the batch is too small for the plug-in norm at `p_max`
    /// (fewer than `1000 * exp(p_max * max(1, 1/alpha))` samples).
    pub reliable: bool,
}

fn check_p_grid(p_grid: &[f64]) -> Result<f64> {
    if p_grid.is_empty() {
        return Err(invalid("p_grid", "must be nonempty"));
    }
    if let Some(p) = p_grid.iter().find(|p| !(**p >= 2.0) || !p.is_finite()) {
        return Err(invalid("p_grid", format!("entries must be >= 2, got {p}")));
    }
    Ok(p_grid.iter().copied().fold(f64::MIN, f64::max))
}

fn bracket(ratios: impl Iterator<Item = f64>) -> (f64, f64) {
    ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    })
}

pub fn moment_scaling_fit(batch: &SampleBatch, p_grid: &[f64]) -> Result<ScalingFit> {
    let p_max = check_p_grid(p_grid)?;
    let alpha = batch.law.alpha();
    let (theta1, theta2) = bracket(
        p_grid
            .iter()
            .map(|&p| empirical_lp_norm(&batch.values, p) / p.powf(1.0 / alpha)),
    );
    let needed = (3.0 * std::f64::consts::LN_10 + p_max * (1.0 / alpha).max(1.0)).exp();
    Ok(ScalingFit {
        theta1,
        theta2,
        p_max,
        reliable: batch.values.len() as f64 >= needed,
    })
}

/// The same bracket computed from exact moments of the batch's law.
pub fn moment_scaling_exact(law: &AlphaLaw, p_grid: &[f64]) -> Result<ScalingFit> {
    let p_max = check_p_grid(p_grid)?;
    let alpha = law.alpha();
    let ratios = p_grid
        .iter()
        .map(|&p| Ok(ws_lp_norm(alpha, p)? * law.scale() / p.powf(1.0 / alpha)))
        .collect::<Result<Vec<_>>>()?;
    let (theta1, theta2) = bracket(ratios.into_iter());
    Ok(ScalingFit {
        theta1,
        theta2,
        p_max,
        reliable: true,
    })
}

pub fn psi_alpha_estimate(batch: &SampleBatch) -> f64 {
    psi_alpha_of(&batch.values, batch.law.alpha())
}

/// Empirical psi_alpha norm: the crossing `t` where the sample mean of
/// `exp(|x|^alpha / t^alpha)` falls to 2, located by bisection.
pub fn psi_alpha_of(values: &[f64], alpha: f64) -> f64 {
    let powers: Vec<f64> = values.iter().map(|v| v.abs().powf(alpha)).collect();
    let top = powers.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    // Work in s = t^alpha; the mean is decreasing in s.
    let mean_exp = |s: f64| -> f64 {
        let mut acc = CompensatedSum::new();
        for &v in &powers {
            let e = v / s;
            if e > LN_F64_MAX {
                return f64::INFINITY;
            }
            acc.add(e.exp());
        }
        acc.value() / powers.len() as f64
    };
    // At s = top / ln 2 every term is at most 2.
    let mut hi = top / std::f64::consts::LN_2;
    let mut lo = hi / 2.0;
    while mean_exp(lo) <= 2.0 {
        hi = lo;
        lo /= 2.0;
        if lo < f64::MIN_POSITIVE {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_exp(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi.powf(1.0 / alpha)
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `|xi|` and the
/// exact CDF `1 - exp(-(x/scale)^alpha)` of the batch's law.
pub fn ks_distance(batch: &SampleBatch) -> f64 {
    let mut mags: Vec<f64> = batch.values.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len() as f64;
    mags.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - batch.law.survival(x);
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_alpha() {
        for a in [0.0, -0.5, 1.01, f64::NAN] {
            assert!(matches!(AlphaLaw::raw(a), Err(Error::InvalidAlpha(_))));
        }
        assert!(AlphaLaw::standardized(1.0).is_ok());
    }

    #[test]
    fn inverse_cdf_at_e_inverse_is_one() {
        for alpha in [0.25, 0.5, 1.0] {
            let x = ws_inverse_cdf((-1.0f64).exp(), alpha);
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_moments() {
        assert_eq!(ws_moment(1.0, 1.0).unwrap(), 1.0);
        assert!((ws_moment(1.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((ws_moment(0.5, 1.0).unwrap() - 2.0).abs() < 1e-12);
        // 4! = 24 for alpha = 1, p = 4.
        assert!((ws_moment(1.0, 4.0).unwrap() - 24.0).abs() < 1e-10);
    }

    #[test]
    fn moment_overflow_is_reported() {
        // Gamma(129 / 0.1 + 1) is far beyond f64.
        assert!(matches!(ws_moment(0.1, 129.0), Err(Error::Overflow { .. })));
        assert!(ws_lp_norm(0.1, 129.0).unwrap().is_finite());
        assert!(ws_moment(0.5, 0.5).is_err());
    }

    #[test]
    fn standardized_variance_is_one() {
        for alpha in [0.3, 0.5, 1.0] {
            let law = AlphaLaw::standardized(alpha).unwrap();
            assert_eq!(law.variance(), ws_moment(alpha, 2.0).unwrap());
            assert!((law.abs_moment(2.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lp_ratio_bounded_by_four_to_one_over_alpha() {
        for alpha in [0.25, 0.5, 0.75, 1.0] {
            let mut p = 2.0;
            while p <= 64.0 {
                let ratio = ws_lp_norm(alpha, 2.0 * p).unwrap() / ws_lp_norm(alpha, p).unwrap();
                assert!(ratio <= 4f64.powf(1.0 / alpha), "alpha {alpha} p {p}");
                p += 0.5;
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let law = AlphaLaw::raw(0.5).unwrap();
        let a = sample_ws(&law, 1000, 7).unwrap();
        let b = sample_ws(&law, 1000, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, sample_ws(&law, 1000, 8).unwrap().values);
        assert!(sample_ws(&law, 0, 7).is_err());
    }

    #[test]
    fn sampler_uses_inverse_cdf() {
        // Two copies of one stream: the draw equals the inverse CDF of the
        // first uniform.
        for alpha in [0.5, 1.0] {
            let law = AlphaLaw::raw(alpha).unwrap();
            let mut rng = crate::rng::rng_from_seed(17);
            let mut rng2 = rng.clone();
            let x = law.sample(&mut rng);
            let u: f64 = rng2.sample(OpenClosed01);
            assert_eq!(x.abs(), ws_inverse_cdf(u, alpha));
        }
    }

    #[test]
    fn psi_of_zero_and_constant_batches() {
        assert_eq!(psi_alpha_of(&[0.0; 10], 0.5), 0.0);
        for alpha in [0.5, 1.0] {
            let c = 3.0;
            let got = psi_alpha_of(&[c, -c, c], alpha);
            let want = c / std::f64::consts::LN_2.powf(1.0 / alpha);
            assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn analytic_psi_scale() {
        assert!((AlphaLaw::raw(1.0).unwrap().psi_scale() - 2.0).abs() < 1e-15);
        assert!((AlphaLaw::raw(0.5).unwrap().psi_scale() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn exact_scaling_bracket_alpha_one() {
        let law = AlphaLaw::raw(1.0).unwrap();
        let fit = moment_scaling_exact(&law, &[2.0, 4.0]).unwrap();
        let at2 = 2f64.sqrt() / 2.0;
        let at4 = 24f64.powf(0.25) / 4.0;
        assert!((fit.theta1 - at4).abs() < 1e-12);
        assert!((fit.theta2 - at2).abs() < 1e-12);
    }

    #[test]
    fn zero_batch_scaling_fit() {
        let batch = SampleBatch {
            values: vec![0.0; 100],
            seed: 0,
            law: AlphaLaw::raw(1.0).unwrap(),
        };
        let fit = moment_scaling_fit(&batch, &[2.0, 4.0]).unwrap();
        assert_eq!((fit.theta1, fit.theta2), (0.0, 0.0));
        assert!(moment_scaling_fit(&batch, &[1.0]).is_err());
    }

    #[test]
    fn small_batch_flagged_unreliable() {
        let law = AlphaLaw::raw(0.5).unwrap();
        let batch = sample_ws(&law, 1000, 1).unwrap();
        assert!(!moment_scaling_fit(&batch, &[2.0, 8.0]).unwrap().reliable);
    }
}
