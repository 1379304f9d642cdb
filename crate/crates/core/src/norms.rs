//! Dense matrices and the norms that enter the uniform Hanson-Wright bound:
//! Frobenius, spectral (l2 -> l2), l2 -> l_inf, entrywise max, and the
//! Frobenius norm of the Gram matrix `A^T A`.

use std::io::{BufRead, Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::rng::rng_from_seed;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_POWER_ITERATIONS: usize = 100_000;
/// Above this `min(rows, cols)` the dense eigensolve cross-check is skipped.
pub const DENSE_CHECK_LIMIT: usize = 64;
const START_VECTOR_SEED: u64 = 0x005E_ED0F_5EC7_0001;

/// Row-major `rows x cols` matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("dims", format!("{rows}x{cols} has an empty side")));
        }
        if data.len() != rows * cols {
            return Err(mismatch(rows * cols, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self::new(n, n, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(mismatch(cols, bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Matrix with i.i.d. entries uniform on `[-1, 1)`.
    pub fn random_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(mismatch(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    /// `y = A x` into a caller-provided buffer.
    #[inline]
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(mismatch(self.cols, x.len()));
        }
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A^T x` into a caller-provided buffer.
    pub fn mul_t_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.fill(0.0);
        for (xi, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += xi * a;
            }
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(mismatch(self.cols, other.rows));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let out = &mut data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    /// `A^T A` (cols x cols).
    pub fn gram(&self) -> Self {
        self.transpose()
            .matmul(self)
            .expect("conformal by construction")
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// One row per line, comma separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("`{t}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Little-endian `u64 rows, u64 cols`, then row-major `f64` entries.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Parse(format!("dims {rows}x{cols} overflow")))?;
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Self::new(rows, cols, data)
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub frobenius: f64,
    pub spectral: f64,
    pub two_to_inf: f64,
    pub entry_max: f64,
    /// `||A^T A||_F`
    pub gram_frobenius: f64,
}

pub fn frobenius(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn entry_max(a: &DenseMatrix) -> f64 {
    a.data.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `||A||_{l2 -> l_inf}`: by duality, the largest Euclidean row norm.
pub fn two_to_inf(a: &DenseMatrix) -> f64 {
    a.data
        .chunks_exact(a.cols)
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Largest eigenvalue of `A^T A` by power iteration from a fixed
/// pseudo-random start, returned as its square root.
///
/// Stops when the eigen-residual `||A^T A v - lambda v||` drops below
/// `tol * lambda`, which bounds the error of `lambda` by the same amount.
pub fn spectral_norm_power(a: &DenseMatrix, tol: f64) -> Result<f64> {
    power_iterate(a, tol, MAX_POWER_ITERATIONS)
}

/// Iteration budget before [`spectral_norm`] switches to the dense solve.
const FALLBACK_ITERATIONS: usize = 5_000;

/// Power iteration, falling back to the dense eigensolve when the top two
/// singular values are too close for it to converge quickly.
pub fn spectral_norm(a: &DenseMatrix, tol: f64) -> Result<f64> {
    match power_iterate(a, tol, FALLBACK_ITERATIONS) {
        Err(Error::NoConvergence { .. }) => Ok(spectral_norm_dense(a)),
        other => other,
    }
}

fn power_iterate(a: &DenseMatrix, tol: f64, max_iterations: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let mut rng = rng_from_seed(START_VECTOR_SEED);
    let mut v: Vec<f64> = (0..a.cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut av = vec![0.0; a.rows];
    let mut w = vec![0.0; a.cols];
    normalize(&mut v);

    for _ in 0..max_iterations {
        a.mul_vec_into(&v, &mut av);
        a.mul_t_vec_into(&av, &mut w);
        // Rayleigh quotient of A^T A at the unit vector v.
        let lambda = av.iter().map(|x| x * x).sum::<f64>();
        if lambda == 0.0 {
            // v is in the null space; the start vector is generic, so A = 0
            // (up to a measure-zero event we do not chase).
            return Ok(0.0);
        }
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol.max(4.0 * f64::EPSILON) * lambda {
            return Ok(lambda.sqrt());
        }
        v.copy_from_slice(&w);
        normalize(&mut v);
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
    })
}

/// Spectral norm from a dense symmetric eigensolve of the smaller Gram matrix.
pub fn spectral_norm_dense(a: &DenseMatrix) -> f64 {
    let m = a.to_nalgebra();
    let gram = if a.rows <= a.cols {
        &m * m.transpose()
    } else {
        m.transpose() * &m
    };
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(*v))
        .sqrt()
}

/// Eigenvalues of a symmetric matrix (ascending).
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(mismatch("square matrix", format!("{}x{}", a.rows, a.cols)));
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(a.to_nalgebra())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn norm_profile(a: &DenseMatrix, tol: f64) -> Result<NormProfile> {
    let spectral = spectral_norm(a, tol)?;
    if a.rows.min(a.cols) <= DENSE_CHECK_LIMIT {
        let dense = spectral_norm_dense(a);
        // Relative tol on lambda = sigma^2 is tol/2 on sigma; allow 10x.
        let scale = dense.max(spectral);
        if (spectral - dense).abs() > 10.0 * tol * scale + 1e-14 {
            return Err(Error::SpectralMismatch {
                power: spectral,
                dense,
            });
        }
    }
    Ok(NormProfile {
        frobenius: frobenius(a),
        spectral,
        two_to_inf: two_to_inf(a),
        entry_max: entry_max(a),
        gram_frobenius: frobenius(&a.gram()),
    })
}

/// Suprema of the norms over a matrix family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyNorms {
    /// `M_F`
    pub frobenius: f64,
    /// `M_{l2 -> l2}`
    pub spectral: f64,
    /// `M_{l2 -> l_inf}`
    pub two_to_inf: f64,
    /// `sup ||A^T A||_F`
    pub gram_frobenius: f64,
}

/// Componentwise suprema of [`norm_profile`] over `members`.
pub fn family_norms(members: &[DenseMatrix], tol: f64) -> Result<FamilyNorms> {
    if members.is_empty() {
        return Err(Error::InvalidFamily("empty family".into()));
    }
    let profiles = members
        .iter()
        .map(|a| norm_profile(a, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(family_norms_of(&profiles))
}

pub fn family_norms_of(profiles: &[NormProfile]) -> FamilyNorms {
    profiles.iter().fold(
        FamilyNorms {
            frobenius: 0.0,
            spectral: 0.0,
            two_to_inf: 0.0,
            gram_frobenius: 0.0,
        },
        |acc, p| FamilyNorms {
            frobenius: acc.frobenius.max(p.frobenius),
            spectral: acc.spectral.max(p.spectral),
            two_to_inf: acc.two_to_inf.max(p.two_to_inf),
            gram_frobenius: acc.gram_frobenius.max(p.gram_frobenius),
        },
    )
}
