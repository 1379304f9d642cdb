//! Computable surrogates for Talagrand's gamma functionals and assembly of
//! the uniform Hanson-Wright bound terms.
//!
//! All nets come from one farthest-point traversal of the family under the
//! chosen distance. The greedy cover at radius `u` is the prefix of that
//! traversal made of the points inserted at distance `> u`, so covers for a
//! whole radius grid cost a single traversal and are nested.

use serde::{Deserialize, Serialize};

use crate::chaos::{MatrixFamily, TailCurve};
use crate::error::{invalid, Error, Result};
use crate::norms::{spectral_norm, two_to_inf, DenseMatrix, DEFAULT_TOL};

/// Number of halvings of the radius grid below the diameter.
pub const OCTAVES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceTag {
    /// `||A - B||_{l2 -> l2}`
    Spectral,
    /// `||A - B||_{l2 -> l_inf}`
    TwoToInf,
}

impl DistanceTag {
    pub fn distance(self, a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
        let diff = a.sub(b)?;
        match self {
            DistanceTag::Spectral => spectral_norm(&diff, DEFAULT_TOL),
            DistanceTag::TwoToInf => Ok(two_to_inf(&diff)),
        }
    }
}

/// Symmetric pairwise distances of a family.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
    tag: DistanceTag,
}

impl DistanceMatrix {
    pub fn new(family: &MatrixFamily, tag: DistanceTag) -> Result<Self> {
        let members = family.members();
        let size = members.len();
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            for j in i + 1..size {
                let d = tag.distance(&members[i], &members[j])?;
                values[i * size + j] = d;
                values[j * size + i] = d;
            }
        }
        Ok(Self { size, values, tag })
    }

    /// Distances given directly, e.g. for point sets that are not matrices.
    pub fn from_values(size: usize, values: Vec<f64>, tag: DistanceTag) -> Result<Self> {
        if values.len() != size * size || size == 0 {
            return Err(invalid("values", "expected a nonempty square table"));
        }
        Ok(Self { size, values, tag })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn tag(&self) -> DistanceTag {
        self.tag
    }

    pub fn diameter(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Farthest-point traversal starting at member 0.
///
/// `order[k]` is the k-th inserted member and `insertion_radius[k]` its
/// distance to the previously inserted ones (infinite for the first).
/// Ties go to the lowest index. Insertion radii are non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    pub order: Vec<usize>,
    pub insertion_radius: Vec<f64>,
}

pub fn farthest_point_traversal(dist: &DistanceMatrix) -> Traversal {
    let n = dist.len();
    let mut order = Vec::with_capacity(n);
    let mut insertion_radius = Vec::with_capacity(n);
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = vec![false; n];
    let mut next = 0usize;
    for step in 0..n {
        chosen[next] = true;
        order.push(next);
        insertion_radius.push(if step == 0 {
            f64::INFINITY
        } else {
            nearest[next]
        });
        for (j, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist.get(next, j));
        }
        let mut best = None::<(usize, f64)>;
        for j in (0..n).filter(|&j| !chosen[j]) {
            if best.is_none_or(|(_, d)| nearest[j] > d) {
                best = Some((j, nearest[j]));
            }
        }
        match best {
            Some((j, _)) => next = j,
            None => break,
        }
    }
    Traversal {
        order,
        insertion_radius,
    }
}

impl Traversal {
    /// Size of the greedy cover at `radius`.
    pub fn net_size(&self, radius: f64) -> usize {
        // Radii are non-increasing, so the cover is a prefix.
        self.insertion_radius.partition_point(|&r| r > radius)
    }

    pub fn net(&self, radius: f64) -> Vec<usize> {
        self.order[..self.net_size(radius)].to_vec()
    }
}

/// Greedy farthest-point cover: every member lies within `radius` of a chosen
/// center and chosen centers are pairwise more than `radius` apart.
pub fn greedy_net(family: &MatrixFamily, tag: DistanceTag, radius: f64) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    let dist = DistanceMatrix::new(family, tag)?;
    Ok(farthest_point_traversal(&dist).net(radius))
}

/// Greedy covers on the geometric radius grid `diameter * 2^-k`, `k = 0..=16`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSequence {
    pub radii: Vec<f64>,
    pub nets: Vec<Vec<usize>>,
    pub distance_tag: DistanceTag,
}

impl NetSequence {
    pub fn build(dist: &DistanceMatrix) -> Self {
        let traversal = farthest_point_traversal(dist);
        let diameter = dist.diameter();
        let radii: Vec<f64> = (0..=OCTAVES)
            .map(|k| diameter * 0.5f64.powi(k as i32))
            .collect();
        let nets = radii
            .iter()
            .map(|&r| {
                if diameter == 0.0 {
                    vec![traversal.order[0]]
                } else {
                    traversal.net(r)
                }
            })
            .collect();
        Self {
            radii,
            nets,
            distance_tag: dist.tag(),
        }
    }

    pub fn log_sizes(&self) -> Vec<f64> {
        self.nets.iter().map(|n| (n.len() as f64).ln()).collect()
    }
}

fn check_exponent(exponent: f64) -> Result<()> {
    if exponent == 2.0 || (exponent > 0.0 && exponent <= 1.0) {
        Ok(())
    } else {
        Err(invalid(
            "alpha_exponent",
            format!("must be 2 or lie in (0, 1], got {exponent}"),
        ))
    }
}

/// Entropy-integral surrogate `int_0^diam (log N(T, d, u))^(1/exponent) du`
/// as an upper Riemann sum on the halving grid, with `N` from greedy covers.
pub fn entropy_gamma(family: &MatrixFamily, tag: DistanceTag, alpha_exponent: f64) -> Result<f64> {
    check_exponent(alpha_exponent)?;
    let dist = DistanceMatrix::new(family, tag)?;
    Ok(entropy_gamma_from(&dist, alpha_exponent))
}

pub fn entropy_gamma_from(dist: &DistanceMatrix, alpha_exponent: f64) -> f64 {
    let diameter = dist.diameter();
    if diameter == 0.0 {
        return 0.0;
    }
    let traversal = farthest_point_traversal(dist);
    (0..OCTAVES)
        .map(|k| {
            let outer = diameter * 0.5f64.powi(k as i32);
            let inner = 0.5 * outer;
            let log_n = (traversal.net_size(inner) as f64).ln();
            log_n.powf(1.0 / alpha_exponent) * (outer - inner)
        })
        .sum()
}

/// `sup_t sum_r 2^(r/exponent) d(t, T_r)` for the admissible sequence `T_r` =
/// first `min(2^(2^r), |T|)` traversal points (`|T_0| = 1`).
///
/// Any admissible sequence bounds the gamma functional from above, so this
/// is a constant-free upper bound.
pub fn greedy_admissible_gamma(dist: &DistanceMatrix, alpha_exponent: f64) -> f64 {
    let n = dist.len();
    if n <= 1 {
        return 0.0;
    }
    let traversal = farthest_point_traversal(dist);
    let mut nearest = vec![f64::INFINITY; n];
    let mut total = vec![0.0; n];
    let mut included = 0usize;
    let mut r = 0i32;
    loop {
        let size = if r == 0 {
            1
        } else if r >= 6 {
            n
        } else {
            (1usize << (1usize << r)).min(n)
        };
        for &c in &traversal.order[included..size] {
            for (j, d) in nearest.iter_mut().enumerate() {
                *d = d.min(dist.get(c, j));
            }
        }
        included = size;
        let weight = 2f64.powf(r as f64 / alpha_exponent);
        for j in 0..n {
            total[j] += weight * nearest[j];
        }
        if included == n {
            break;
        }
        r += 1;
    }
    total.into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaTag {
    /// `gamma_alpha` under `||.||_{l2 -> l2}`
    Two,
    /// `gamma_alpha` under `||.||_{l2 -> l_inf}`
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    EntropyIntegral,
    GreedyPartition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainingEstimate {
    pub gamma2: f64,
    pub gamma_alpha: f64,
    pub alpha: f64,
    pub beta_tag: BetaTag,
    pub method_tag: MethodTag,
}

impl ChainingEstimate {
    /// `Gamma(alpha, beta, A) = gamma_2 + gamma_alpha`.
    pub fn gamma(&self) -> f64 {
        self.gamma2 + self.gamma_alpha
    }
}

pub fn chaining_estimate(
    family: &MatrixFamily,
    alpha: f64,
    beta: BetaTag,
    method: MethodTag,
) -> Result<ChainingEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let spectral = DistanceMatrix::new(family, DistanceTag::Spectral)?;
    let beta_dist = match beta {
        BetaTag::Two => spectral.clone(),
        BetaTag::Infinity => DistanceMatrix::new(family, DistanceTag::TwoToInf)?,
    };
    let eval = |d: &DistanceMatrix, e: f64| match method {
        MethodTag::EntropyIntegral => entropy_gamma_from(d, e),
        MethodTag::GreedyPartition => greedy_admissible_gamma(d, e),
    };
    Ok(ChainingEstimate {
        gamma2: eval(&spectral, 2.0),
        gamma_alpha: eval(&beta_dist, alpha),
        alpha,
        beta_tag: beta,
        method_tag: method,
    })
}

/// Regime values of the covering bound for `{V_x : x in D_{s,n}}` under the
/// spectral norm, unit leading constants, natural logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverBound {
    /// `(s/m) (log n / u)^2`, stated for `u >= 1/sqrt(m)`.
    pub large_radius: f64,
    /// `s log(e n / (s u))`, stated for `u <= 1/sqrt(m)`; floored at 0.
    pub small_radius: f64,
    /// The applicable regime; 0 once `u >= sqrt(s/m)` (one ball around the
    /// origin covers the family), the smaller of the two at `u = 1/sqrt(m)`.
    pub value: f64,
}

fn check_dims(s: usize, m: usize, n: usize) -> Result<()> {
    if s == 0 || s > n {
        return Err(invalid("s", format!("need 1 <= s <= n, got s={s}, n={n}")));
    }
    if m == 0 {
        return Err(invalid("m", "must be positive"));
    }
    Ok(())
}

pub fn dsn_cover_bound(s: usize, m: usize, n: usize, u: f64) -> Result<CoverBound> {
    check_dims(s, m, n)?;
    if !(u > 0.0) {
        return Err(invalid("u", "must be positive"));
    }
    let (sf, mf, nf) = (s as f64, m as f64, n as f64);
    let large_radius = sf / mf * (nf.ln() / u).powi(2);
    let small_radius = (sf * (std::f64::consts::E * nf / (sf * u)).ln()).max(0.0);
    let boundary = 1.0 / mf.sqrt();
    let value = if u >= (sf / mf).sqrt() {
        0.0
    } else if u > boundary {
        large_radius
    } else if u < boundary {
        small_radius
    } else {
        large_radius.min(small_radius)
    };
    Ok(CoverBound {
        large_radius,
        small_radius,
        value,
    })
}

/// Plug-in chaining bounds for `{V_x : x in D_{s,n}}`:
/// `gamma_2 <= sqrt(s/m) log s log n` and
/// `gamma_alpha <= s^(1/alpha) / sqrt(m) * log^(2/alpha) n`.
/// The first vanishes at `s = 1` as printed.
pub fn dsn_gamma_bound(s: usize, m: usize, n: usize, alpha: f64) -> Result<(f64, f64)> {
    check_dims(s, m, n)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let (sf, mf, ln_n) = (s as f64, m as f64, (n as f64).ln());
    let gamma2 = (sf / mf).sqrt() * sf.ln() * ln_n;
    let gamma_alpha = sf.powf(1.0 / alpha) / mf.sqrt() * ln_n.powf(2.0 / alpha);
    Ok((gamma2, gamma_alpha))
}

/// `U_1, U_2, U_3` at `beta = infinity` plus the unknown constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    /// `C(alpha)` in the threshold `C L^2 (U_1 + t)`.
    pub fitted_c: f64,
    /// `C_1(alpha)` in front of the exponential.
    pub fitted_c1: f64,
}

pub fn bound_terms(family: &MatrixFamily, estimate: &ChainingEstimate) -> Result<BoundTerms> {
    if estimate.beta_tag != BetaTag::Infinity {
        return Err(invalid("estimate", "bound terms need beta = infinity"));
    }
    let norms = family.norms();
    let gamma = estimate.gamma();
    Ok(BoundTerms {
        u1: gamma * (gamma + norms.frobenius),
        u2: norms.spectral * gamma + norms.gram_frobenius,
        u3: norms.two_to_inf * gamma,
        fitted_c: 1.0,
        fitted_c1: 1.0,
    })
}

/// Exponent `min{(t/U_2)^2, (t/U_3)^alpha, (t/M^2)^(alpha/2)}`; regimes with a
/// vanishing scale are dropped, and an empty minimum is `+inf`.
pub fn uniform_exponent(terms: &BoundTerms, alpha: f64, spectral_sup: f64, t: f64) -> f64 {
    let m2 = spectral_sup * spectral_sup;
    [(terms.u2, 2.0), (terms.u3, alpha), (m2, alpha / 2.0)]
        .iter()
        .filter(|(scale, _)| *scale > 0.0)
        .map(|(scale, power)| (t / scale).powf(*power))
        .fold(f64::INFINITY, f64::min)
}

/// `min(1, C_1 exp(-exponent(t)))`; `t <= 0` gives `min(1, C_1)`.
pub fn uniform_bound_value(terms: &BoundTerms, alpha: f64, spectral_sup: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return terms.fitted_c1.min(1.0);
    }
    (terms.fitted_c1 * (-uniform_exponent(terms, alpha, spectral_sup, t)).exp()).min(1.0)
}

/// Tail bound on the deviation axis: `thresholds` are the `t` beyond
/// `C L^2 U_1` (see [`uniform_statistic_threshold`]).
pub fn theorem1_curve(
    terms: &BoundTerms,
    psi_scale: f64,
    alpha: f64,
    spectral_sup: f64,
    thresholds: &[f64],
) -> Result<TailCurve> {
    if !(psi_scale >= 0.0) {
        return Err(invalid("psi_scale", "must be nonnegative"));
    }
    let values = thresholds
        .iter()
        .map(|&t| uniform_bound_value(terms, alpha, spectral_sup, t))
        .collect();
    TailCurve::theoretical(thresholds.to_vec(), values)
}

/// Statistic level `C L^2 (U_1 + t)` matching deviation `t`.
pub fn uniform_statistic_threshold(terms: &BoundTerms, psi_scale: f64, t: f64) -> f64 {
    terms.fitted_c * psi_scale * psi_scale * (terms.u1 + t)
}

/// Deviation `t` matching statistic level `x`: `x / (C L^2) - U_1`.
pub fn uniform_deviation(terms: &BoundTerms, psi_scale: f64, x: f64) -> f64 {
    x / (terms.fitted_c * psi_scale * psi_scale) - terms.u1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn family(members: Vec<DenseMatrix>) -> MatrixFamily {
        MatrixFamily::new(members).unwrap()
    }

    fn brute_force_cover_ok(dist: &DistanceMatrix, net: &[usize], radius: f64) -> bool {
        (0..dist.len()).all(|j| net.iter().any(|&c| dist.get(c, j) <= radius))
    }

    fn brute_force_packing_ok(dist: &DistanceMatrix, net: &[usize], radius: f64) -> bool {
        net.iter()
            .enumerate()
            .all(|(a, &i)| net[a + 1..].iter().all(|&j| dist.get(i, j) > radius))
    }

    #[test]
    fn singleton_net_and_gamma() {
        let f = family(vec![DenseMatrix::identity(3)]);
        assert_eq!(greedy_net(&f, DistanceTag::Spectral, 0.1).unwrap(), vec![0]);
        assert_eq!(entropy_gamma(&f, DistanceTag::Spectral, 2.0).unwrap(), 0.0);
        let est =
            chaining_estimate(&f, 0.5, BetaTag::Infinity, MethodTag::EntropyIntegral).unwrap();
        assert_eq!((est.gamma2, est.gamma_alpha), (0.0, 0.0));
        let est =
            chaining_estimate(&f, 0.5, BetaTag::Infinity, MethodTag::GreedyPartition).unwrap();
        assert_eq!((est.gamma2, est.gamma_alpha), (0.0, 0.0));
    }

    #[test]
    fn two_far_points_need_two_centers() {
        let f = family(vec![DenseMatrix::zeros(2, 2), DenseMatrix::identity(2)]);
        assert_eq!(greedy_net(&f, DistanceTag::Spectral, 0.5).unwrap().len(), 2);
        assert!(greedy_net(&f, DistanceTag::Spectral, 0.0).is_err());
    }

    #[test]
    fn two_point_entropy_integral() {
        // N(u) = 2 below D = 3, so the integral is D sqrt(log 2) minus the
        // omitted bottom octave.
        let f = family(vec![
            DenseMatrix::zeros(2, 2),
            DenseMatrix::identity(2).scaled(3.0),
        ]);
        let got = entropy_gamma(&f, DistanceTag::Spectral, 2.0).unwrap();
        let want = 3.0 * std::f64::consts::LN_2.sqrt() * (1.0 - 0.5f64.powi(OCTAVES as i32));
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        assert!((got - 3.0 * std::f64::consts::LN_2.sqrt()).abs() < 1e-4);
        assert!(entropy_gamma(&f, DistanceTag::Spectral, 1.5).is_err());
    }

    #[test]
    fn random_family_nets_are_covers_and_packings() {
        let mut rng = rng_from_seed(21);
        let members: Vec<_> = (0..20)
            .map(|_| DenseMatrix::random_uniform(4, 4, &mut rng))
            .collect();
        let f = family(members);
        for tag in [DistanceTag::Spectral, DistanceTag::TwoToInf] {
            let dist = DistanceMatrix::new(&f, tag).unwrap();
            let mut prev = usize::MAX;
            for k in 0..40 {
                let radius = 0.05 + 0.1 * k as f64;
                let net = greedy_net(&f, tag, radius).unwrap();
                assert!(brute_force_cover_ok(&dist, &net, radius));
                assert!(brute_force_packing_ok(&dist, &net, radius));
                assert!(net.len() <= prev, "net grew with radius");
                prev = net.len();
            }
        }
    }

    #[test]
    fn entropy_gamma_scales_linearly() {
        let mut rng = rng_from_seed(8);
        let members: Vec<_> = (0..12)
            .map(|_| DenseMatrix::random_uniform(3, 5, &mut rng))
            .collect();
        let f = family(members);
        let g = f.scaled(2.5).unwrap();
        for (tag, e) in [(DistanceTag::Spectral, 2.0), (DistanceTag::TwoToInf, 0.5)] {
            let a = entropy_gamma(&f, tag, e).unwrap();
            let b = entropy_gamma(&g, tag, e).unwrap();
            assert!((b - 2.5 * a).abs() <= 1e-8 * b, "{a} {b}");
        }
    }

    #[test]
    fn greedy_admissible_bounds_two_points() {
        // T_0 = {first}, T_1 = both: sup_t sum = d.
        let dist = DistanceMatrix::from_values(2, vec![0.0, 2.0, 2.0, 0.0], DistanceTag::Spectral)
            .unwrap();
        assert_eq!(greedy_admissible_gamma(&dist, 2.0), 2.0);
        assert_eq!(greedy_admissible_gamma(&dist, 0.5), 2.0);
    }

    #[test]
    fn cover_bound_examples() {
        // u = 1 >= sqrt(2/16): one ball suffices.
        let b = dsn_cover_bound(2, 16, 64, 1.0).unwrap();
        assert_eq!(b.value, 0.0);
        let plug_in = 2.0 / 16.0 * 64f64.ln().powi(2);
        assert!((b.large_radius - plug_in).abs() < 1e-12);
        assert!((b.large_radius - 2.162).abs() < 1e-3);

        let edge = 1.0 / 4.0;
        let b = dsn_cover_bound(2, 16, 64, edge).unwrap();
        assert_eq!(b.value, b.large_radius.min(b.small_radius));
        let small = dsn_cover_bound(2, 16, 64, 0.1).unwrap();
        assert_eq!(small.value, small.small_radius);
        assert!((small.small_radius - 2.0 * (std::f64::consts::E * 64.0 / 0.2).ln()).abs() < 1e-12);
        assert!(dsn_cover_bound(0, 16, 64, 0.1).is_err());
    }

    #[test]
    fn gamma_bound_examples() {
        let (g2, _) = dsn_gamma_bound(1, 16, 64, 1.0).unwrap();
        assert_eq!(g2, 0.0);
        let (_, ga) = dsn_gamma_bound(4, 64, 256, 1.0).unwrap();
        assert!((ga - 0.5 * 256f64.ln().powi(2)).abs() < 1e-12);
        let (a2, aa) = dsn_gamma_bound(4, 64, 256, 0.5).unwrap();
        let (b2, ba) = dsn_gamma_bound(4, 128, 256, 0.5).unwrap();
        assert!((a2 / b2 - 2f64.sqrt()).abs() < 1e-12);
        assert!((aa / ba - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bound_terms_singleton_and_zero() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let f = family(vec![a.clone()]);
        let est =
            chaining_estimate(&f, 1.0, BetaTag::Infinity, MethodTag::EntropyIntegral).unwrap();
        let t = bound_terms(&f, &est).unwrap();
        assert_eq!(t.u1, 0.0);
        assert_eq!(t.u3, 0.0);
        assert!((t.u2 - crate::norms::frobenius(&a.gram())).abs() < 1e-12);

        let z = family(vec![DenseMatrix::zeros(2, 2)]);
        let est =
            chaining_estimate(&z, 1.0, BetaTag::Infinity, MethodTag::EntropyIntegral).unwrap();
        let t = bound_terms(&z, &est).unwrap();
        assert_eq!((t.u1, t.u2, t.u3), (0.0, 0.0, 0.0));

        let two = chaining_estimate(&f, 1.0, BetaTag::Two, MethodTag::EntropyIntegral).unwrap();
        assert!(bound_terms(&f, &two).is_err());
    }

    #[test]
    fn uniform_curve_shape() {
        let terms = BoundTerms {
            u1: 0.5,
            u2: 1.0,
            u3: 0.3,
            fitted_c: 1.0,
            fitted_c1: 3.0,
        };
        let ts: Vec<f64> = std::iter::once(0.0)
            .chain((0..140).map(|k| 10f64.powf(k as f64 / 20.0)))
            .collect();
        let curve = theorem1_curve(&terms, 1.0, 0.5, 0.7, &ts).unwrap();
        assert_eq!(curve.survival[0], 1.0);
        assert!(curve.survival.windows(2).all(|w| w[1] <= w[0]));
        assert!(*curve.survival.last().unwrap() < 1e-3);

        // Singleton: U_3 = 0 drops its regime.
        let single = BoundTerms {
            u1: 0.0,
            u2: 2.0,
            u3: 0.0,
            fitted_c: 1.0,
            fitted_c1: 1.0,
        };
        let t = 5.0;
        let want = (-(t / 2.0f64).powi(2).min((t / 1.0f64).powf(0.25))).exp();
        assert!((uniform_bound_value(&single, 0.5, 1.0, t) - want).abs() < 1e-15);
    }

    #[test]
    fn deviation_axis_roundtrip() {
        let terms = BoundTerms {
            u1: 2.0,
            u2: 1.0,
            u3: 1.0,
            fitted_c: 0.7,
            fitted_c1: 1.0,
        };
        let x = uniform_statistic_threshold(&terms, 1.3, 4.0);
        assert!((uniform_deviation(&terms, 1.3, x) - 4.0).abs() < 1e-12);
    }
}
