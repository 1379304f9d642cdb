//! Empirical checks of the moment, tail, contraction, decoupling and
//! supremum inequalities. Each check returns a serializable report; none of
//! them asserts, so callers decide what tolerance applies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::curves::{PowerSums, TailCurve, MIN_TRIALS};
use super::family::MatrixFamily;
use super::forms::bilinear;
use crate::chaining::{
    bound_terms, chaining_estimate, uniform_deviation, uniform_exponent, BetaTag, BoundTerms,
    ChainingEstimate, MethodTag,
};
use crate::error::{invalid, mismatch, Error, Result};
use crate::norms::{norm_profile, DenseMatrix, DEFAULT_TOL};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{linear_fit, CompensatedSum};
use crate::weibull::AlphaLaw;

/// z-score used for "within Monte Carlo error" comparisons.
pub const MC_Z: f64 = 3.0;

fn check_trials(n_trials: usize) -> Result<()> {
    if n_trials < MIN_TRIALS {
        return Err(invalid(
            "n_trials",
            format!("must be at least {MIN_TRIALS}"),
        ));
    }
    Ok(())
}

fn check_grid(p_grid: &[f64], lo: f64, hi: f64) -> Result<()> {
    if p_grid.is_empty() || p_grid.iter().any(|&p| !(p >= lo && p <= hi)) {
        return Err(invalid(
            "p_grid",
            format!("entries must lie in [{lo}, {hi}]"),
        ));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("p_grid", "must be strictly increasing"));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `(min, max)` of the finite positive part of `ratios`, or `(0, 0)`.
fn bracket(ratios: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &r in ratios {
        if r > 0.0 {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if hi == 0.0 {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

/// Empirical `L_p` norms set against a reference scale `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p_grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `empirical / rhs`, 0 where both vanish.
    pub ratios: Vec<f64>,
    /// `c_low * rhs <= empirical <= c_high * rhs` across the grid.
    pub c_low: f64,
    pub c_high: f64,
    pub n_trials: u64,
    pub seed: u64,
}

impl MomentReport {
    fn build(sums: &PowerSums, rhs: Vec<f64>, seed: u64) -> Self {
        let curve = sums.curve(seed);
        let ratios: Vec<f64> = curve
            .lp_norms
            .iter()
            .zip(&rhs)
            .map(|(&e, &r)| ratio(e, r))
            .collect();
        let (c_low, c_high) = bracket(&ratios);
        Self {
            p_grid: curve.p_grid,
            empirical: curve.lp_norms,
            std_errors: curve.std_errors,
            rhs,
            ratios,
            c_low,
            c_high,
            n_trials: curve.n_trials,
            seed,
        }
    }

    /// `c_high / c_low`; 1 for a degenerate report.
    pub fn spread(&self) -> f64 {
        if self.c_low > 0.0 {
            self.c_high / self.c_low
        } else {
            1.0
        }
    }
}

/// `||sum a_i xi_i||_{L_p}` against `sqrt(p) ||a||_2 + p^(1/alpha) ||a||_inf`.
pub fn linear_moment_check(
    a: &[f64],
    law: &AlphaLaw,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    check_grid(p_grid, 2.0, 32.0)?;
    check_trials(n_trials)?;
    if a.is_empty() {
        return Err(invalid("a", "must be nonempty"));
    }
    let l2 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let linf = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let alpha = law.alpha();
    let rhs = p_grid
        .iter()
        .map(|&p| p.sqrt() * l2 + p.powf(1.0 / alpha) * linf)
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut xi = vec![0.0; a.len()];
    let mut sums = PowerSums::new(p_grid);
    for _ in 0..n_trials {
        law.fill(&mut rng, &mut xi);
        sums.push(a.iter().zip(&xi).map(|(x, y)| x * y).sum());
    }
    Ok(MomentReport::build(&sums, rhs, seed))
}

/// Four-term reference scale
/// `sqrt(p)||A||_F + p||A|| + p^((alpha+2)/(2 alpha))||A||_{2->inf} + p^(2/alpha)||A||_inf`.
pub fn chaos_moment_rhs(a: &DenseMatrix, alpha: f64, p: f64) -> Result<f64> {
    let prof = norm_profile(a, DEFAULT_TOL)?;
    Ok(p.sqrt() * prof.frobenius
        + p * prof.spectral
        + p.powf((alpha + 2.0) / (2.0 * alpha)) * prof.two_to_inf
        + p.powf(2.0 / alpha) * prof.entry_max)
}

/// Decoupled chaos `xi^T A eta` with independent copies against the
/// four-term scale. `A` must be symmetric.
pub fn chaos_moment_check(
    a: &DenseMatrix,
    law: &AlphaLaw,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    check_grid(p_grid, 2.0, 32.0)?;
    check_trials(n_trials)?;
    if !a.is_square() {
        return Err(mismatch(
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let n = a.rows();
    for i in 0..n {
        for j in i + 1..n {
            if a.get(i, j) != a.get(j, i) {
                return Err(invalid("a", "must be symmetric"));
            }
        }
    }
    let rhs = p_grid
        .iter()
        .map(|&p| chaos_moment_rhs(a, law.alpha(), p))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng_from_seed(seed);
    let (mut xi, mut eta) = (vec![0.0; n], vec![0.0; n]);
    let mut sums = PowerSums::new(p_grid);
    for _ in 0..n_trials {
        law.fill(&mut rng, &mut xi);
        law.fill(&mut rng, &mut eta);
        sums.push(bilinear(a, &xi, &eta));
    }
    Ok(MomentReport::build(&sums, rhs, seed))
}

fn check_moment_coeffs(coeffs: &[f64], betas: &[f64]) -> Result<()> {
    if coeffs.is_empty() || coeffs.len() != betas.len() {
        return Err(mismatch(
            format!("{} betas", coeffs.len()),
            format!("{} betas", betas.len()),
        ));
    }
    if coeffs
        .iter()
        .chain(betas)
        .any(|&c| !(c > 0.0 && c.is_finite()))
    {
        return Err(invalid("coeffs", "all C_k and beta_k must be positive"));
    }
    Ok(())
}

/// Tail bound from moment growth `||xi||_{L_p} <= sum C_k p^beta_k + C_{m+1}`
/// for `p >= p0`: `min(1, e^p0 exp(-min_k (t/C_k)^(1/beta_k)))`.
pub fn tail_from_moments(coeffs: &[f64], betas: &[f64], p0: f64, t: f64) -> Result<f64> {
    check_moment_coeffs(coeffs, betas)?;
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let exponent = coeffs
        .iter()
        .zip(betas)
        .map(|(&c, &b)| (t / c).powf(1.0 / b))
        .fold(f64::INFINITY, f64::min);
    Ok((p0 - exponent).exp().min(1.0))
}

/// Level `e (sum C_k t^beta_k + C_{m+1})` exceeded with probability at most
/// `e^p0 e^-t` (see [`tail_from_moments_level_bound`]).
pub fn tail_from_moments_level(coeffs: &[f64], betas: &[f64], c_last: f64, t: f64) -> Result<f64> {
    check_moment_coeffs(coeffs, betas)?;
    if !(c_last >= 0.0) || !(t > 0.0) {
        return Err(invalid("t", "need t > 0 and C_{m+1} >= 0"));
    }
    let sum: f64 = coeffs.iter().zip(betas).map(|(&c, &b)| c * t.powf(b)).sum();
    Ok(std::f64::consts::E * (sum + c_last))
}

/// `min(1, e^p0 e^-t)`.
pub fn tail_from_moments_level_bound(p0: f64, t: f64) -> f64 {
    (p0 - t).exp().min(1.0)
}

/// Smallest `K` with `e^{-t^eta_alpha} <= K e^{-t^xi_alpha}` for all `t >= 0`,
/// i.e. `sup_t exp(t^xi_alpha - t^eta_alpha)`. Finite iff `eta_alpha >= xi_alpha`.
pub fn tail_domination_constant(eta_alpha: f64, xi_alpha: f64) -> Result<f64> {
    for a in [eta_alpha, xi_alpha] {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidAlpha(a));
        }
    }
    if eta_alpha < xi_alpha {
        return Err(invalid("eta_alpha", "dominated tail must be lighter"));
    }
    if eta_alpha == xi_alpha {
        return Ok(1.0);
    }
    let t_star = (xi_alpha / eta_alpha).powf(1.0 / (eta_alpha - xi_alpha));
    Ok((t_star.powf(xi_alpha) - t_star.powf(eta_alpha))
        .exp()
        .max(1.0))
}

/// Coordinate law for the contraction check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "law")]
pub enum Coordinates {
    Zero,
    Law(AlphaLaw),
}

impl Coordinates {
    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Coordinates::Zero => out.fill(0.0),
            Coordinates::Law(law) => law.fill(rng, out),
        }
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let n = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| invalid("points", "need a nonempty set"))?;
    if n == 0 {
        return Err(invalid("points", "vectors must be nonempty"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(mismatch(n, p.len()));
    }
    Ok(n)
}

fn sup_abs_dot(points: &[Vec<f64>], x: &[f64]) -> f64 {
    points
        .iter()
        .map(|t| t.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = values
        .iter()
        .map(|v| (v - mean).powi(2))
        .collect::<CompensatedSum>()
        .value()
        / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `E sup_T |sum eta_i t_i|^p`
    pub lhs: f64,
    pub lhs_se: f64,
    /// `E sup_T |sum xi_i t_i|^p`
    pub rhs: f64,
    pub rhs_se: f64,
    pub k: f64,
    pub p: f64,
    /// `lhs / (K^p rhs)`
    pub ratio: f64,
    /// `lhs <= K^p rhs` within `MC_Z` combined standard errors.
    pub holds: bool,
}

/// `E sup_T |sum eta_i t_i|^p <= K^p E sup_T |sum xi_i t_i|^p` when `eta`'s
/// tails are `K`-dominated by `xi`'s. The two vectors use independent streams.
pub fn contraction_check(
    points: &[Vec<f64>],
    xi: &Coordinates,
    eta: &Coordinates,
    k: f64,
    p: f64,
    n_trials: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let n = check_points(points)?;
    check_trials(n_trials)?;
    if !(k >= 1.0) || !(p >= 1.0) {
        return Err(invalid("k", "need K >= 1 and p >= 1"));
    }
    let draw = |coords: &Coordinates, stream: u64| {
        let mut rng = rng_from_seed(derive_seed(seed, stream));
        let mut x = vec![0.0; n];
        (0..n_trials)
            .map(|_| {
                coords.fill(&mut rng, &mut x);
                sup_abs_dot(points, &x).powf(p)
            })
            .collect::<Vec<_>>()
    };
    let (rhs, rhs_se) = mean_and_se(&draw(xi, 0));
    let (lhs, lhs_se) = mean_and_se(&draw(eta, 1));
    let kp = k.powf(p);
    let err = (lhs_se.powi(2) + (kp * rhs_se).powi(2)).sqrt();
    Ok(ContractionReport {
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        k,
        p,
        ratio: ratio(lhs, kp * rhs),
        holds: lhs <= kp * rhs + MC_Z * err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongReport {
    pub p_grid: Vec<f64>,
    /// `||sup_T |sum t_i xi_i|||_{L_p}`
    pub strong: Vec<f64>,
    /// `E sup_T |sum t_i xi_i|`
    pub mean_sup: f64,
    /// `sup_T ||sum t_i xi_i||_{L_p}`
    pub weak: Vec<f64>,
    /// `strong / (mean_sup + weak)`
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub n_trials: u64,
    pub seed: u64,
}

/// Strong moments of the supremum against mean supremum plus weak moments.
/// All three quantities come from the same draws.
pub fn weak_strong_check(
    points: &[Vec<f64>],
    law: &AlphaLaw,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<WeakStrongReport> {
    let n = check_points(points)?;
    check_grid(p_grid, 1.0, f64::MAX)?;
    check_trials(n_trials)?;
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n];
    let mut sup_sums = PowerSums::new(p_grid);
    let mut point_sums: Vec<PowerSums> = points.iter().map(|_| PowerSums::new(p_grid)).collect();
    let mut mean_sup = CompensatedSum::new();
    for _ in 0..n_trials {
        law.fill(&mut rng, &mut x);
        let mut sup = 0.0f64;
        for (t, sums) in points.iter().zip(point_sums.iter_mut()) {
            let v = t.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().abs();
            sums.push(v);
            sup = sup.max(v);
        }
        sup_sums.push(sup);
        mean_sup.add(sup);
    }
    let mean_sup = mean_sup.value() / n_trials as f64;
    let strong = sup_sums.curve(seed).lp_norms;
    let curves: Vec<_> = point_sums.iter().map(|s| s.curve(seed).lp_norms).collect();
    let weak: Vec<f64> = (0..p_grid.len())
        .map(|k| curves.iter().map(|c| c[k]).fold(0.0, f64::max))
        .collect();
    let ratios: Vec<f64> = strong
        .iter()
        .zip(&weak)
        .map(|(&s, &w)| ratio(s, mean_sup + w))
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(WeakStrongReport {
        p_grid: p_grid.to_vec(),
        strong,
        mean_sup,
        weak,
        ratios,
        max_ratio,
        n_trials: n_trials as u64,
        seed,
    })
}

/// Convex even functions admitted by the decoupling check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
pub enum FTag {
    Abs,
    Square,
    Power(f64),
}

impl FTag {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            FTag::Abs => x.abs(),
            FTag::Square => x * x,
            FTag::Power(p) => x.abs().powf(p),
        }
    }

    /// `F(C x) = C^degree F(x)` for `C >= 0`.
    pub fn degree(self) -> f64 {
        match self {
            FTag::Abs => 1.0,
            FTag::Square => 2.0,
            FTag::Power(p) => p,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            FTag::Power(p) if !(p >= 1.0 && p.is_finite()) => {
                Err(invalid("f_tag", "power must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Tail-domination constant `c_1 = max{c, (2/c)^(2/alpha)}`.
pub fn domination_c1(c: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if !(c > 0.0) {
        return Err(invalid("c", "must be positive"));
    }
    Ok(c.max((2.0 / c).powf(2.0 / alpha)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    /// `E sup_A F(xi^T A xi - E xi^T A xi)`
    pub lhs: f64,
    pub lhs_se: f64,
    /// `E sup_A F(eta^T A eta~)`; `RHS(C) = C^degree * base`.
    pub rhs_base: f64,
    pub rhs_base_se: f64,
    pub c_grid: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Smallest grid `C` with `LHS <= RHS(C)` up to `MC_Z` standard errors;
    /// `None` when no grid value works.
    pub smallest_c: Option<f64>,
    pub n_trials: u64,
    pub seed: u64,
}

/// Decoupling: `xi` from `law`, `eta`, `eta~` i.i.d. raw `W_s(alpha)`.
pub fn decoupling_check(
    family: &MatrixFamily,
    law: &AlphaLaw,
    f: FTag,
    c_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<DecouplingReport> {
    f.validate()?;
    check_trials(n_trials)?;
    if c_grid.is_empty()
        || c_grid.iter().any(|&c| !(c > 0.0))
        || c_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(invalid(
            "c_grid",
            "must be positive and strictly increasing",
        ));
    }
    let n = family.cols();
    if family.rows() != n {
        return Err(mismatch(
            "square members",
            format!("{}x{}", family.rows(), n),
        ));
    }
    let variance = law.output_variance();
    let traces: Vec<f64> = family
        .members()
        .iter()
        .map(|a| (0..n).map(|i| a.get(i, i)).sum::<f64>() * variance)
        .collect();
    let raw = AlphaLaw::raw(law.alpha())?;

    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let mut xi = vec![0.0; n];
    let lhs_samples: Vec<f64> = (0..n_trials)
        .map(|_| {
            law.fill(&mut rng, &mut xi);
            family
                .members()
                .iter()
                .zip(&traces)
                .map(|(a, tr)| f.apply(bilinear(a, &xi, &xi) - tr))
                .fold(0.0, f64::max)
        })
        .collect();

    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let (mut eta, mut eta2) = (vec![0.0; n], vec![0.0; n]);
    let rhs_samples: Vec<f64> = (0..n_trials)
        .map(|_| {
            raw.fill(&mut rng, &mut eta);
            raw.fill(&mut rng, &mut eta2);
            family
                .members()
                .iter()
                .map(|a| f.apply(bilinear(a, &eta, &eta2)))
                .fold(0.0, f64::max)
        })
        .collect();

    let (lhs, lhs_se) = mean_and_se(&lhs_samples);
    let (rhs_base, rhs_base_se) = mean_and_se(&rhs_samples);
    let deg = f.degree();
    let rhs: Vec<f64> = c_grid.iter().map(|c| c.powf(deg) * rhs_base).collect();
    let smallest_c = c_grid.iter().zip(&rhs).find_map(|(&c, &r)| {
        let err = (lhs_se.powi(2) + (c.powf(deg) * rhs_base_se).powi(2)).sqrt();
        (lhs <= r + MC_Z * err).then_some(c)
    });
    Ok(DecouplingReport {
        lhs,
        lhs_se,
        rhs_base,
        rhs_base_se,
        c_grid: c_grid.to_vec(),
        rhs,
        smallest_c,
        n_trials: n_trials as u64,
        seed,
    })
}

fn apply_all(family: &MatrixFamily, x: &[f64], out: &mut [Vec<f64>]) {
    for (a, buf) in family.members().iter().zip(out.iter_mut()) {
        a.mul_vec_into(x, buf);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop31Report {
    pub p_grid: Vec<f64>,
    /// `||sup_A |zeta^T A^T A zeta~|||_{L_p}`
    pub lhs: Vec<f64>,
    /// `sup_A ||zeta^T A^T A zeta~||_{L_p}`
    pub first_term: Vec<f64>,
    /// `||sup_A ||A zeta~||_2||_{L_p}`
    pub sup_norm: Vec<f64>,
    pub gamma: f64,
    pub rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub n_trials: u64,
    pub seed: u64,
}

/// Supremum of the decoupled chaos `zeta^T A^T A zeta~` with raw `W_s(alpha)`
/// vectors against `sup_A ||.||_{L_p} + ||sup_A ||A zeta~||||_{L_p} Gamma`,
/// `Gamma` from entropy integrals at `beta = infinity`.
pub fn prop31_check(
    family: &MatrixFamily,
    alpha: f64,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<Prop31Report> {
    let estimate = chaining_estimate(family, alpha, BetaTag::Infinity, MethodTag::EntropyIntegral)?;
    prop31_check_with(family, alpha, p_grid, n_trials, seed, &estimate)
}

pub fn prop31_check_with(
    family: &MatrixFamily,
    alpha: f64,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
    estimate: &ChainingEstimate,
) -> Result<Prop31Report> {
    check_grid(p_grid, 1.0, f64::MAX)?;
    check_trials(n_trials)?;
    let law = AlphaLaw::raw(alpha)?;
    let (m, n, k) = (family.rows(), family.cols(), family.len());
    let mut rng = rng_from_seed(seed);
    let (mut z, mut z2) = (vec![0.0; n], vec![0.0; n]);
    let mut az = vec![vec![0.0; m]; k];
    let mut az2 = vec![vec![0.0; m]; k];
    let mut sup_sums = PowerSums::new(p_grid);
    let mut norm_sums = PowerSums::new(p_grid);
    let mut member_sums: Vec<PowerSums> = (0..k).map(|_| PowerSums::new(p_grid)).collect();
    for _ in 0..n_trials {
        law.fill(&mut rng, &mut z);
        law.fill(&mut rng, &mut z2);
        apply_all(family, &z, &mut az);
        apply_all(family, &z2, &mut az2);
        let mut sup = 0.0f64;
        let mut sup_norm = 0.0f64;
        for ((u, v), sums) in az.iter().zip(&az2).zip(member_sums.iter_mut()) {
            let dot = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs();
            sums.push(dot);
            sup = sup.max(dot);
            sup_norm = sup_norm.max(v.iter().map(|x| x * x).sum::<f64>());
        }
        sup_sums.push(sup);
        norm_sums.push(sup_norm.sqrt());
    }
    let lhs = sup_sums.curve(seed).lp_norms;
    let sup_norm = norm_sums.curve(seed).lp_norms;
    let member_curves: Vec<_> = member_sums.iter().map(|s| s.curve(seed).lp_norms).collect();
    let first_term: Vec<f64> = (0..p_grid.len())
        .map(|j| member_curves.iter().map(|c| c[j]).fold(0.0, f64::max))
        .collect();
    let gamma = estimate.gamma();
    let rhs: Vec<f64> = first_term
        .iter()
        .zip(&sup_norm)
        .map(|(f, s)| f + s * gamma)
        .collect();
    let ratios: Vec<f64> = lhs.iter().zip(&rhs).map(|(&l, &r)| ratio(l, r)).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(Prop31Report {
        p_grid: p_grid.to_vec(),
        lhs,
        first_term,
        sup_norm,
        gamma,
        rhs,
        ratios,
        max_ratio,
        n_trials: n_trials as u64,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNormReport {
    pub p_grid: Vec<f64>,
    /// `||sup_A ||A zeta||_2||_{L_p}`
    pub lhs: Vec<f64>,
    /// `E sup_A ||A zeta||_2`
    pub mean_sup: f64,
    /// `mean_sup + sqrt(p) M_{2->2} + p^(1/alpha) M_{2->inf}`
    pub rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Smallest `c` with `lhs <= c * rhs` on the grid.
    pub fitted_c: f64,
    pub n_trials: u64,
    pub seed: u64,
}

pub fn sup_norm_moment_check(
    family: &MatrixFamily,
    alpha: f64,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<SupNormReport> {
    check_grid(p_grid, 1.0, f64::MAX)?;
    check_trials(n_trials)?;
    let law = AlphaLaw::raw(alpha)?;
    let (m, n, k) = (family.rows(), family.cols(), family.len());
    let mut rng = rng_from_seed(seed);
    let mut z = vec![0.0; n];
    let mut az = vec![vec![0.0; m]; k];
    let mut sums = PowerSums::new(p_grid);
    let mut mean = CompensatedSum::new();
    for _ in 0..n_trials {
        law.fill(&mut rng, &mut z);
        apply_all(family, &z, &mut az);
        let sup = az
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt();
        sums.push(sup);
        mean.add(sup);
    }
    let mean_sup = mean.value() / n_trials as f64;
    let norms = family.norms();
    let lhs = sums.curve(seed).lp_norms;
    let rhs: Vec<f64> = p_grid
        .iter()
        .map(|&p| mean_sup + p.sqrt() * norms.spectral + p.powf(1.0 / alpha) * norms.two_to_inf)
        .collect();
    let ratios: Vec<f64> = lhs.iter().zip(&rhs).map(|(&l, &r)| ratio(l, r)).collect();
    let fitted_c = ratios.iter().copied().fold(0.0, f64::max);
    Ok(SupNormReport {
        p_grid: p_grid.to_vec(),
        lhs,
        mean_sup,
        rhs,
        ratios,
        fitted_c,
        n_trials: n_trials as u64,
        seed,
    })
}

/// Exceedance count needed before a threshold enters the far-tail fit.
pub const MIN_TAIL_COUNT: f64 = 100.0;

/// Survival level below which a threshold counts as far tail.
pub const FAR_TAIL_SURVIVAL: f64 = 0.01;

/// Empirical tail set against a fitted bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// Empirical survival with the fitted bound in `bound`.
    pub curve: TailCurve,
    /// Index of the anchor threshold: the grid point whose empirical
    /// survival is nearest 1/2.
    pub anchor: usize,
    pub fitted_c: f64,
    pub fitted_c1: f64,
    /// Thresholds past the anchor with survival `>= min_survival` where the
    /// lower confidence limit exceeds the bound.
    pub violations: Vec<f64>,
    /// Thresholds that were checked.
    pub checked: usize,
    /// Checked thresholds where the bound is below 1.
    pub informative: usize,
    /// Slope of `log(-log survival)` against `log threshold` over thresholds
    /// with survival at most [`FAR_TAIL_SURVIVAL`] and at least
    /// [`MIN_TAIL_COUNT`] exceedances.
    pub far_tail_slope: Option<f64>,
}

impl DominanceReport {
    pub fn dominated(&self) -> bool {
        self.violations.is_empty()
    }
}

fn median_index(curve: &TailCurve) -> usize {
    let mut best = 0;
    for (k, s) in curve.survival.iter().enumerate() {
        if (s - 0.5).abs() < (curve.survival[best] - 0.5).abs() {
            best = k;
        }
    }
    best
}

fn far_tail_slope(curve: &TailCurve) -> Option<f64> {
    let n = curve.n_trials as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..curve.len())
        .filter(|&k| {
            let s = curve.survival[k];
            curve.thresholds[k] > 0.0 && s * n >= MIN_TAIL_COUNT && s <= FAR_TAIL_SURVIVAL
        })
        .map(|k| (curve.thresholds[k].ln(), (-curve.survival[k].ln()).ln()))
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    linear_fit(&xs, &ys).map(|(slope, _)| slope)
}

#[allow(clippy::needless_range_loop)]
fn dominance(
    curve: TailCurve,
    anchor: usize,
    fitted_c: f64,
    fitted_c1: f64,
    bound: Vec<f64>,
    min_survival: f64,
) -> Result<DominanceReport> {
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut informative = 0;
    for k in anchor + 1..curve.len() {
        if curve.survival[k] < min_survival {
            continue;
        }
        checked += 1;
        if bound[k] < 1.0 {
            informative += 1;
        }
        if curve.ci_low[k] > bound[k] {
            violations.push(curve.thresholds[k]);
        }
    }
    let far_tail_slope = far_tail_slope(&curve);
    Ok(DominanceReport {
        curve: curve.with_bound(bound)?,
        anchor,
        fitted_c,
        fitted_c1,
        violations,
        checked,
        informative,
        far_tail_slope,
    })
}

/// Two-regime single-matrix exponent `min{(t/||A^T A||_F)^2, (t/||A^T A||)^(alpha/2)}`.
pub fn single_matrix_exponent(gram_frobenius: f64, gram_spectral: f64, alpha: f64, t: f64) -> f64 {
    [(gram_frobenius, 2.0), (gram_spectral, alpha / 2.0)]
        .iter()
        .filter(|(s, _)| *s > 0.0)
        .map(|(s, q)| (t / s).powf(*q))
        .fold(f64::INFINITY, f64::min)
}

/// Prefactor that makes `C_1 exp(-exponent)` pass through `survival` at the
/// anchor, floored at 1.
fn anchor_prefactor(survival: f64, exponent: f64) -> f64 {
    if survival <= 0.0 || !exponent.is_finite() {
        return 1.0;
    }
    (survival.ln() + exponent).exp().max(1.0)
}

/// Tail of `| ||A xi||^2 - E||A xi||^2 |` against the single-matrix shape
/// with `C L^2 = L^2` and `C_1` fitted at the empirical median.
/// Dominance is checked at every larger threshold with survival at least
/// `min_survival`.
pub fn single_matrix_tail_check(
    a: &DenseMatrix,
    law: &AlphaLaw,
    thresholds: &[f64],
    n_trials: usize,
    seed: u64,
    min_survival: f64,
) -> Result<DominanceReport> {
    check_trials(n_trials)?;
    if thresholds.is_empty() {
        return Err(invalid("thresholds", "must be nonempty"));
    }
    let family = MatrixFamily::singleton(a.clone())?;
    let variance = law.output_variance();
    let mut rng = rng_from_seed(seed);
    let mut xi = vec![0.0; a.cols()];
    let mut buf = vec![0.0; a.rows()];
    let samples: Vec<f64> = (0..n_trials)
        .map(|_| {
            law.fill(&mut rng, &mut xi);
            super::forms::centered_sup_into(&family, &xi, variance, &mut buf)
        })
        .collect();
    let curve = TailCurve::from_samples(&samples, thresholds.to_vec(), seed)?;
    let gram = a.gram();
    let gram_prof = norm_profile(&gram, DEFAULT_TOL)?;
    let l2 = law.psi_scale().powi(2);
    let exponent = |x: f64| {
        let t = if l2 > 0.0 { x / l2 } else { f64::INFINITY };
        single_matrix_exponent(gram_prof.frobenius, gram_prof.spectral, law.alpha(), t)
    };
    let anchor = median_index(&curve);
    let c1 = anchor_prefactor(curve.survival[anchor], exponent(thresholds[anchor]));
    let bound = thresholds
        .iter()
        .map(|&x| {
            if x <= 0.0 {
                c1.min(1.0)
            } else {
                (c1 * (-exponent(x)).exp()).min(1.0)
            }
        })
        .collect();
    dominance(curve, anchor, 1.0, c1, bound, min_survival)
}

/// Rule for the two unknown constants of the uniform bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitRule {
    /// `C = 1`; `C_1` chosen so the bound passes through the anchor.
    Prefactor,
    /// `C_1 = 1`; the shift `C L^2 U_1` placed at the anchor level, so `C`
    /// is `x_anchor / (L^2 U_1)`. Falls back to `Prefactor` when `U_1 = 0`.
    Shift,
}

/// Fit `C`, `C_1` at the anchor statistic level `x_anchor` with empirical
/// survival `s_anchor`.
pub fn fit_uniform_bound(
    terms: &BoundTerms,
    psi_scale: f64,
    alpha: f64,
    spectral_sup: f64,
    x_anchor: f64,
    s_anchor: f64,
    rule: FitRule,
) -> BoundTerms {
    let mut out = *terms;
    let l2 = psi_scale * psi_scale;
    match rule {
        FitRule::Shift if terms.u1 > 0.0 && l2 > 0.0 && x_anchor > 0.0 => {
            out.fitted_c = x_anchor / (l2 * terms.u1);
            out.fitted_c1 = 1.0;
        }
        _ => {
            out.fitted_c = 1.0;
            let t = uniform_deviation(&out, psi_scale, x_anchor);
            let e = if t > 0.0 {
                uniform_exponent(&out, alpha, spectral_sup, t)
            } else {
                0.0
            };
            out.fitted_c1 = anchor_prefactor(s_anchor, e);
        }
    }
    out
}

/// Uniform tail of `sup_A | ||A xi||^2 - E||A xi||^2 |` against the fitted
/// bound `C_1 exp(-min{...})` at deviation `t = x/(C L^2) - U_1`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_dominance_check(
    family: &MatrixFamily,
    law: &AlphaLaw,
    estimate: &ChainingEstimate,
    thresholds: &[f64],
    n_trials: usize,
    seed: u64,
    min_survival: f64,
    rule: FitRule,
) -> Result<DominanceReport> {
    check_trials(n_trials)?;
    if thresholds.is_empty() {
        return Err(invalid("thresholds", "must be nonempty"));
    }
    let terms = bound_terms(family, estimate)?;
    let variance = law.output_variance();
    let mut rng = rng_from_seed(seed);
    let mut xi = vec![0.0; family.cols()];
    let mut buf = vec![0.0; family.rows()];
    let samples: Vec<f64> = (0..n_trials)
        .map(|_| {
            law.fill(&mut rng, &mut xi);
            super::forms::centered_sup_into(family, &xi, variance, &mut buf)
        })
        .collect();
    uniform_dominance_from_samples(
        family,
        law,
        &terms,
        &samples,
        thresholds,
        seed,
        min_survival,
        rule,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn uniform_dominance_from_samples(
    family: &MatrixFamily,
    law: &AlphaLaw,
    terms: &BoundTerms,
    samples: &[f64],
    thresholds: &[f64],
    seed: u64,
    min_survival: f64,
    rule: FitRule,
) -> Result<DominanceReport> {
    let curve = TailCurve::from_samples(samples, thresholds.to_vec(), seed)?;
    let m22 = family.norms().spectral;
    let psi = law.psi_scale();
    let anchor = median_index(&curve);
    let fitted = fit_uniform_bound(
        terms,
        psi,
        law.alpha(),
        m22,
        thresholds[anchor],
        curve.survival[anchor],
        rule,
    );
    let bound = thresholds
        .iter()
        .map(|&x| {
            let t = uniform_deviation(&fitted, psi, x);
            crate::chaining::uniform_bound_value(&fitted, law.alpha(), m22, t)
        })
        .collect();
    dominance(
        curve,
        anchor,
        fitted.fitted_c,
        fitted.fitted_c1,
        bound,
        min_survival,
    )
}
