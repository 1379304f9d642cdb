//! Partial random circulant operators `Phi = (1/sqrt m) R_Omega H_z` and
//! restricted isometry constants.
//!
//! Indices are 0-based and `H_{jk} = z_{(j - k) mod n}`.

use std::collections::HashSet;
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chaos::MatrixFamily;
use crate::error::{invalid, mismatch, Error, Result};
use crate::norms::DenseMatrix;
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{clopper_pearson, CompensatedSum};
use crate::weibull::AlphaLaw;

/// Lengths above this use the transform path in [`circ_convolve`].
pub const DIRECT_LIMIT: usize = 64;

/// Default bound on the number of supports [`rip_exact`] will enumerate.
pub const ENUMERATION_CAP: u128 = 100_000;

/// `(z * x)_j = sum_k z_{(j-k) mod n} x_k` by the double loop.
pub fn circ_convolve_direct(z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_lengths(z, x)?;
    let n = z.len();
    Ok((0..n)
        .map(|j| (0..n).map(|k| z[(j + n - k) % n] * x[k]).sum::<f64>())
        .collect())
}

/// Circular convolution through forward transforms, a pointwise product and
/// an inverse transform.
pub fn circ_convolve_fft(z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_lengths(z, x)?;
    let n = z.len();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut zf: Vec<Complex<f64>> = z.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut xf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    forward.process(&mut zf);
    forward.process(&mut xf);
    for (a, b) in zf.iter_mut().zip(&xf) {
        *a *= b;
    }
    inverse.process(&mut zf);
    let scale = 1.0 / n as f64;
    Ok(zf.iter().map(|c| c.re * scale).collect())
}

/// Circular convolution; direct for `n <= 64`, transform-based above.
pub fn circ_convolve(z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if z.len() > DIRECT_LIMIT {
        circ_convolve_fft(z, x)
    } else {
        circ_convolve_direct(z, x)
    }
}

fn check_lengths(z: &[f64], x: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(invalid("z", "must be nonempty"));
    }
    if z.len() != x.len() {
        return Err(mismatch(z.len(), x.len()));
    }
    Ok(())
}

fn check_omega(omega: &[usize], n: usize) -> Result<()> {
    if omega.is_empty() || omega.len() > n {
        return Err(invalid("omega", format!("need 1 <= |omega| <= n = {n}")));
    }
    if omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("omega", "must be strictly increasing"));
    }
    if omega[omega.len() - 1] >= n {
        return Err(invalid("omega", format!("indices must be below n = {n}")));
    }
    Ok(())
}

/// Uniformly random `m`-subset of `{0..n-1}`, sorted.
pub fn draw_omega<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(invalid("m", format!("need 1 <= m <= n = {n}")));
    }
    let mut omega = index::sample(rng, n, m).into_vec();
    omega.sort_unstable();
    Ok(omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantOperator {
    pub z: Vec<f64>,
    pub omega: Vec<usize>,
    pub n: usize,
    pub m: usize,
}

impl CirculantOperator {
    pub fn new(z: Vec<f64>, omega: Vec<usize>) -> Result<Self> {
        let n = z.len();
        check_omega(&omega, n)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(invalid("z", "entries must be finite"));
        }
        let m = omega.len();
        Ok(Self { z, omega, n, m })
    }

    /// Generator drawn i.i.d. from `law` with a fixed `omega`.
    pub fn random<R: Rng + ?Sized>(
        law: &AlphaLaw,
        n: usize,
        omega: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut z = vec![0.0; n];
        law.fill(rng, &mut z);
        Self::new(z, omega)
    }

    /// Dense `m x n` matrix with rows `z_{(omega_r - k) mod n} / sqrt(m)`.
    pub fn matrix(&self) -> DenseMatrix {
        let (n, scale) = (self.n, 1.0 / (self.m as f64).sqrt());
        let mut data = Vec::with_capacity(self.m * n);
        for &j in &self.omega {
            data.extend((0..n).map(|k| self.z[(j + n - k) % n] * scale));
        }
        DenseMatrix::new(self.m, n, data).expect("dimensions validated at construction")
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json(text: &str) -> Result<Self> {
        let op: Self = serde_json::from_str(text)?;
        Self::new(op.z, op.omega)
    }
}

/// `Phi x = (1/sqrt m) R_Omega (z * x)`.
pub fn phi_apply(op: &CirculantOperator, x: &[f64]) -> Result<Vec<f64>> {
    let conv = circ_convolve(&op.z, x)?;
    let scale = 1.0 / (op.m as f64).sqrt();
    Ok(op.omega.iter().map(|&j| conv[j] * scale).collect())
}

/// The `m x n` matrix with `V_x eta = (1/sqrt m) R_Omega (x * eta)`.
pub fn build_vx(x: &[f64], omega: &[usize], n: usize) -> Result<DenseMatrix> {
    if x.len() != n {
        return Err(mismatch(n, x.len()));
    }
    check_omega(omega, n)?;
    let m = omega.len();
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = Vec::with_capacity(m * n);
    for &j in omega {
        data.extend((0..n).map(|k| x[(j + n - k) % n] * scale));
    }
    DenseMatrix::new(m, n, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseSpec {
    pub s: usize,
    pub n: usize,
}

impl SparseSpec {
    pub fn new(s: usize, n: usize) -> Result<Self> {
        if s == 0 || s > n {
            return Err(invalid("s", format!("need 1 <= s <= n, got s={s}, n={n}")));
        }
        Ok(Self { s, n })
    }

    /// `binomial(n, s)`, saturating.
    pub fn support_count(&self) -> u128 {
        binomial(self.n, self.s)
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Random `s`-sparse vector on the unit sphere: uniform support, entries
/// uniform on `[-1, 1]` before normalization.
pub fn random_sparse_unit<R: Rng + ?Sized>(spec: SparseSpec, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x = vec![0.0; spec.n];
        for i in index::sample(rng, spec.n, spec.s) {
            x[i] = rng.random_range(-1.0..1.0);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
            return x;
        }
    }
}

/// `count` matrices `V_x` for random unit `s`-sparse `x`, sharing one random
/// `Omega` of size `m`.
pub fn random_vx_family(
    spec: SparseSpec,
    m: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<usize>, MatrixFamily)> {
    if count == 0 {
        return Err(invalid("count", "must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let omega = draw_omega(spec.n, m, &mut rng)?;
    let members = (0..count)
        .map(|_| build_vx(&random_sparse_unit(spec, &mut rng), &omega, spec.n))
        .collect::<Result<Vec<_>>>()?;
    Ok((omega, MatrixFamily::new(members)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub n_trials: u64,
    pub seed: u64,
}

impl EnergyReport {
    pub fn relative_error(&self) -> f64 {
        if self.target == 0.0 {
            self.estimate.abs()
        } else {
            (self.estimate - self.target).abs() / self.target
        }
    }
}

/// Monte Carlo `E ||Phi x||^2` over fresh generators from `law` with the
/// operator's `Omega` held fixed; the target is `||x||^2`.
pub fn expected_energy_check(
    op: &CirculantOperator,
    x: &[f64],
    law: &AlphaLaw,
    n_trials: usize,
    seed: u64,
) -> Result<EnergyReport> {
    if n_trials < 2 {
        return Err(invalid("n_trials", "must be at least 2"));
    }
    let vx = build_vx(x, &op.omega, op.n)?;
    let mut rng = rng_from_seed(seed);
    let mut z = vec![0.0; op.n];
    let mut y = vec![0.0; op.m];
    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    for _ in 0..n_trials {
        law.fill(&mut rng, &mut z);
        vx.mul_vec_into(&z, &mut y);
        let e: f64 = y.iter().map(|v| v * v).sum();
        sum.add(e);
        sum_sq.add(e * e);
    }
    let nf = n_trials as f64;
    let estimate = sum.value() / nf;
    let var = ((sum_sq.value() / nf - estimate * estimate) * nf / (nf - 1.0)).max(0.0);
    Ok(EnergyReport {
        estimate,
        std_error: (var / nf).sqrt(),
        target: x.iter().map(|v| v * v).sum(),
        n_trials: n_trials as u64,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMethod {
    ExactEnumeration,
    SupportSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub delta: f64,
    pub method_tag: RipMethod,
    pub supports_examined: u64,
    pub argmax_support: Vec<usize>,
}

/// `||G_S - I||_{2->2}` for the Gram minor on `support`.
fn support_delta(gram: &DenseMatrix, support: &[usize]) -> f64 {
    match support {
        [i] => (gram.get(*i, *i) - 1.0).abs(),
        [i, j] => {
            let a = gram.get(*i, *i) - 1.0;
            let c = gram.get(*j, *j) - 1.0;
            let b = gram.get(*i, *j);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mid + rad).abs().max((mid - rad).abs())
        }
        _ => {
            let s = support.len();
            let minor = DMatrix::from_fn(s, s, |r, c| {
                gram.get(support[r], support[c]) - if r == c { 1.0 } else { 0.0 }
            });
            minor
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        }
    }
}

/// Advance `c` to the next `s`-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let s = c.len();
    let mut i = s;
    while i > 0 {
        i -= 1;
        if c[i] < n - s + i {
            c[i] += 1;
            for k in i + 1..s {
                c[k] = c[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

struct Running {
    delta: f64,
    argmax: Vec<usize>,
    examined: u64,
}

impl Running {
    fn new() -> Self {
        Self {
            delta: -1.0,
            argmax: Vec::new(),
            examined: 0,
        }
    }

    fn visit(&mut self, gram: &DenseMatrix, support: &[usize]) {
        let d = support_delta(gram, support);
        self.examined += 1;
        if d > self.delta {
            self.delta = d;
            self.argmax = support.to_vec();
        }
    }

    fn finish(self, method_tag: RipMethod) -> RipEstimate {
        RipEstimate {
            delta: self.delta.max(0.0),
            method_tag,
            supports_examined: self.examined,
            argmax_support: self.argmax,
        }
    }
}

fn check_phi(phi: &DenseMatrix, spec: SparseSpec) -> Result<()> {
    if phi.cols() != spec.n {
        return Err(mismatch(spec.n, phi.cols()));
    }
    SparseSpec::new(spec.s, spec.n).map(|_| ())
}

fn enumerate_all(gram: &DenseMatrix, spec: SparseSpec, method: RipMethod) -> RipEstimate {
    let mut running = Running::new();
    let mut c: Vec<usize> = (0..spec.s).collect();
    loop {
        running.visit(gram, &c);
        if !next_combination(&mut c, spec.n) {
            break;
        }
    }
    running.finish(method)
}

/// `delta_s` as the maximum over every `s`-support of the Gram-minor
/// deviation. The first maximizing support in lexicographic order is
/// reported.
pub fn rip_exact(phi: &DenseMatrix, spec: SparseSpec) -> Result<RipEstimate> {
    rip_exact_capped(phi, spec, ENUMERATION_CAP)
}

pub fn rip_exact_capped(phi: &DenseMatrix, spec: SparseSpec, cap: u128) -> Result<RipEstimate> {
    check_phi(phi, spec)?;
    let supports = spec.support_count();
    if supports > cap {
        return Err(Error::EnumerationCap { supports, cap });
    }
    Ok(enumerate_all(
        &phi.gram(),
        spec,
        RipMethod::ExactEnumeration,
    ))
}

/// Lower bound on `delta_s` from `n_supports` distinct uniformly drawn
/// supports. Draws are a fixed sequence per seed, so a larger `n_supports`
/// extends the same sequence. When `n_supports` reaches `binomial(n, s)` all
/// supports are visited in lexicographic order.
pub fn rip_sampled(
    phi: &DenseMatrix,
    spec: SparseSpec,
    n_supports: u64,
    seed: u64,
) -> Result<RipEstimate> {
    check_phi(phi, spec)?;
    if n_supports == 0 {
        return Err(invalid("n_supports", "must be positive"));
    }
    let gram = phi.gram();
    if n_supports as u128 >= spec.support_count() {
        return Ok(enumerate_all(&gram, spec, RipMethod::SupportSampling));
    }
    let mut rng = rng_from_seed(seed);
    let mut seen = HashSet::new();
    let mut running = Running::new();
    while running.examined < n_supports {
        let mut support = index::sample(&mut rng, spec.n, spec.s).into_vec();
        support.sort_unstable();
        if seen.insert(support.clone()) {
            running.visit(&gram, &support);
        }
    }
    Ok(running.finish(RipMethod::SupportSampling))
}

/// `delta_s` by enumeration when within the cap, otherwise sampled with
/// `cap` supports.
pub fn rip_auto(phi: &DenseMatrix, spec: SparseSpec, seed: u64) -> Result<RipEstimate> {
    if spec.support_count() <= ENUMERATION_CAP {
        rip_exact(phi, spec)
    } else {
        rip_sampled(phi, spec, ENUMERATION_CAP as u64, seed)
    }
}

/// One row of the success-probability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipRow {
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub delta_target: f64,
    pub trials: u64,
    pub successes: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub master_seed: u64,
}

impl RipRow {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

pub const RIP_CSV_HEADER: &str =
    "alpha,n,m,s,delta_target,trials,successes,ci_low,ci_high,master_seed";

pub fn write_rip_csv<W: Write>(rows: &[RipRow], mut w: W) -> Result<()> {
    writeln!(w, "{RIP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:?},{},{},{},{:?},{},{},{:?},{:?},{}",
            r.alpha,
            r.n,
            r.m,
            r.s,
            r.delta_target,
            r.trials,
            r.successes,
            r.ci_low,
            r.ci_high,
            r.master_seed
        )?;
    }
    Ok(())
}

/// `delta_s` of one partial circulant draw with fixed `omega`.
pub fn rip_trial(law: &AlphaLaw, omega: &[usize], spec: SparseSpec, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let op = CirculantOperator::random(law, spec.n, omega.to_vec(), &mut rng)?;
    Ok(rip_auto(&op.matrix(), spec, derive_seed(seed, 0))?.delta)
}

/// Success table for `P(delta_s <= delta_target)` across `m_grid`.
///
/// Cell `i` uses seed `derive_seed(seed, i)`: its `Omega` comes from
/// `derive_seed(cell, 0)` and trial `j` from `derive_seed(cell, j + 1)`.
/// Generators are standardized `W_s(alpha)`. Trials run on the current rayon
/// pool; results do not depend on its size.
pub fn rip_experiment(
    alpha: f64,
    n: usize,
    m_grid: &[usize],
    s: usize,
    delta_target: f64,
    trials_per_cell: u64,
    seed: u64,
) -> Result<Vec<RipRow>> {
    let law = AlphaLaw::standardized(alpha)?;
    let spec = SparseSpec::new(s, n)?;
    if trials_per_cell == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    if !(delta_target > 0.0) {
        return Err(invalid("delta_target", "must be positive"));
    }
    m_grid
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let cell = derive_seed(seed, i as u64);
            let omega = draw_omega(n, m, &mut rng_from_seed(derive_seed(cell, 0)))?;
            let deltas = (0..trials_per_cell)
                .into_par_iter()
                .map(|j| rip_trial(&law, &omega, spec, derive_seed(cell, j + 1)))
                .collect::<Result<Vec<_>>>()?;
            let successes = deltas.iter().filter(|&&d| d <= delta_target).count() as u64;
            let (ci_low, ci_high) = clopper_pearson(successes, trials_per_cell, 0.05);
            Ok(RipRow {
                alpha,
                n,
                m,
                s,
                delta_target,
                trials: trials_per_cell,
                successes,
                ci_low,
                ci_high,
                master_seed: seed,
            })
        })
        .collect()
}
