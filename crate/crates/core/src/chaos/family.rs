use std::io::{Read, Write};

use crate::error::{mismatch, Error, Result};
use crate::norms::{
    family_norms_of, norm_profile, read_u64, DenseMatrix, FamilyNorms, NormProfile, DEFAULT_TOL,
};

/// A finite, nonempty family of `m x n` matrices with cached norms.
#[derive(Debug, Clone)]
pub struct MatrixFamily {
    members: Vec<DenseMatrix>,
    profiles: Vec<NormProfile>,
    norms: FamilyNorms,
    /// Squared column norms per member; `E||A xi||^2 = sum_j var_j * col_sq[j]`.
    col_sq: Vec<Vec<f64>>,
}

impl MatrixFamily {
    pub fn new(members: Vec<DenseMatrix>) -> Result<Self> {
        Self::with_tol(members, DEFAULT_TOL)
    }

    pub fn with_tol(members: Vec<DenseMatrix>, tol: f64) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidFamily("empty family".into()))?;
        let (m, n) = (first.rows(), first.cols());
        if let Some(bad) = members.iter().find(|a| (a.rows(), a.cols()) != (m, n)) {
            return Err(Error::InvalidFamily(format!(
                "member is {}x{}, expected {m}x{n}",
                bad.rows(),
                bad.cols()
            )));
        }
        let profiles = members
            .iter()
            .map(|a| norm_profile(a, tol))
            .collect::<Result<Vec<_>>>()?;
        let norms = family_norms_of(&profiles);
        let col_sq = members
            .iter()
            .map(|a| {
                let mut c = vec![0.0; n];
                for i in 0..m {
                    for (cj, v) in c.iter_mut().zip(a.row(i)) {
                        *cj += v * v;
                    }
                }
                c
            })
            .collect();
        Ok(Self {
            members,
            profiles,
            norms,
            col_sq,
        })
    }

    pub fn singleton(a: DenseMatrix) -> Result<Self> {
        Self::new(vec![a])
    }

    pub fn members(&self) -> &[DenseMatrix] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.members[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.members[0].cols()
    }

    pub fn profiles(&self) -> &[NormProfile] {
        &self.profiles
    }

    pub fn norms(&self) -> &FamilyNorms {
        &self.norms
    }

    /// `E||A xi||^2` for member `k` when every coordinate has variance `variance`.
    pub fn expected_energy(&self, k: usize, variance: f64) -> f64 {
        variance * self.col_sq[k].iter().sum::<f64>()
    }

    /// `E||A xi||^2` with per-coordinate variances.
    pub fn expected_energy_weighted(&self, k: usize, variances: &[f64]) -> Result<f64> {
        if variances.len() != self.cols() {
            return Err(mismatch(self.cols(), variances.len()));
        }
        Ok(self.col_sq[k]
            .iter()
            .zip(variances)
            .map(|(c, v)| c * v)
            .sum())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.members.iter().map(|a| a.scaled(c)).collect())
    }

    /// Little-endian `u64 count, u64 rows, u64 cols`, then each member row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        for a in &self.members {
            for v in a.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let count = read_u64(&mut r)? as usize;
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut members = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            members.push(DenseMatrix::new(rows, cols, data)?);
        }
        Self::new(members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::family_norms;

    #[test]
    fn singleton_identity_norms() {
        let f = MatrixFamily::singleton(DenseMatrix::identity(2)).unwrap();
        let n = f.norms();
        assert!((n.frobenius - 2f64.sqrt()).abs() < 1e-15);
        assert!((n.spectral - 1.0).abs() < 1e-12);
        assert_eq!(n.two_to_inf, 1.0);
    }

    #[test]
    fn scaled_pair_takes_maxima() {
        let i2 = DenseMatrix::identity(2);
        let n = family_norms(&[i2.clone(), i2.scaled(2.0)], DEFAULT_TOL).unwrap();
        assert!((n.frobenius - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!((n.spectral - 2.0).abs() < 1e-11);
        assert_eq!(n.two_to_inf, 2.0);
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(MatrixFamily::new(vec![]).is_err());
        assert!(
            MatrixFamily::new(vec![DenseMatrix::identity(2), DenseMatrix::identity(3)]).is_err()
        );
    }

    #[test]
    fn binary_roundtrip() {
        let f =
            MatrixFamily::new(vec![DenseMatrix::identity(3), DenseMatrix::zeros(3, 3)]).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let g = MatrixFamily::read_binary(buf.as_slice()).unwrap();
        assert_eq!(g.members(), f.members());
    }

    #[test]
    fn expected_energy_is_variance_weighted_frobenius() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let f = MatrixFamily::singleton(a).unwrap();
        assert_eq!(f.expected_energy(0, 1.0), 14.0);
        assert_eq!(f.expected_energy(0, 2.0), 28.0);
        assert_eq!(f.expected_energy_weighted(0, &[1.0, 0.0]).unwrap(), 1.0);
    }
}
