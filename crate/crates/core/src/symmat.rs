//! Dense symmetric matrices and the spectral operations the certificates need:
//! extreme eigenvalues, symmetric square roots, inverse square roots and the
//! Weyl bracket used as a self-test.
//!
//! Everything goes through a full symmetric eigendecomposition. Matrix sizes in
//! this crate are at most `max(n, p)` at desk scale, so accuracy wins over speed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance below which a matrix is treated as singular.
pub const REL_EIG_TOL: f64 = 1e-12;

/// A square, exactly symmetric, finite real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `(m + mᵀ)/2` after checking shape and finiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("symmetric matrix must have dim >= 1"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("symmetric matrix has non-finite entries"));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(
                "matrix rows must all have length equal to the row count",
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// `scale · I`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        SymMatrix(DMatrix::identity(dim, dim) * scale)
    }

    /// `AᵀA` for an arbitrary (possibly rectangular) matrix.
    pub fn gram(a: &DMatrix<f64>) -> Self {
        Self::symmetrized(a.tr_mul(a))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_same_dim(self, other)?;
        Ok(SymMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_same_dim(self, other)?;
        Ok(SymMatrix(&self.0 - &other.0))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(&self.0 * s)
    }

    /// `s · self · s` for symmetric `s`.
    pub fn congruence(&self, s: &SymMatrix) -> Result<SymMatrix> {
        check_same_dim(self, s)?;
        Ok(Self::symmetrized(&s.0 * &self.0 * &s.0))
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        let mut vals = SymmetricEigen::new(self.0.clone()).eigenvalues;
        vals.as_mut_slice().sort_by(f64::total_cmp);
        vals
    }

    pub fn eig_extremes(&self) -> (f64, f64) {
        let vals = self.eigenvalues();
        (vals[0], vals[vals.len() - 1])
    }

    pub fn lambda_min(&self) -> f64 {
        self.eig_extremes().0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eig_extremes().1
    }

    /// Symmetric PSD square root. Eigenvalues in `[-1e-12·λ_max, 0)` are clamped
    /// to zero; anything more negative is an error.
    pub fn sqrt(&self) -> Result<SymMatrix> {
        let (vals, vecs) = self.eigen();
        let lmin = vals[0];
        let lmax = vals[vals.len() - 1];
        if lmin < -REL_EIG_TOL * lmax.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd {
                lambda_min: lmin,
                lambda_max: lmax,
            });
        }
        let roots = vals.map(|v| v.max(0.0).sqrt());
        Ok(spectral(&vecs, &roots))
    }

    /// Symmetric inverse square root; requires `λ_min > 1e-12·λ_max`.
    pub fn inv_sqrt(&self) -> Result<SymMatrix> {
        let (vals, vecs) = self.eigen();
        let lmin = vals[0];
        let lmax = vals[vals.len() - 1];
        if !(lmax > 0.0) || lmin <= REL_EIG_TOL * lmax {
            return Err(Error::NotPd { lambda_min: lmin });
        }
        let inv_roots = vals.map(|v| 1.0 / v.sqrt());
        Ok(spectral(&vecs, &inv_roots))
    }

    /// True when `λ_min > 1e-12·λ_max > 0`.
    pub fn is_positive_definite(&self) -> bool {
        let (lmin, lmax) = self.eig_extremes();
        lmax > 0.0 && lmin > REL_EIG_TOL * lmax
    }

    pub fn is_psd(&self) -> bool {
        let (lmin, lmax) = self.eig_extremes();
        lmin >= -REL_EIG_TOL * lmax.abs()
    }
}

fn spectral(vecs: &DMatrix<f64>, vals: &DVector<f64>) -> SymMatrix {
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, c)] * vals[c]);
    SymMatrix::symmetrized(scaled * vecs.transpose())
}

fn check_same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Smallest and largest eigenvalue of `m`.
pub fn eig_extremes(m: &SymMatrix) -> (f64, f64) {
    m.eig_extremes()
}

/// Weyl bracket for `λ_max(m1)`:
/// `(λ_max(m2) + λ_min(m1 − m2), λ_max(m2) + λ_max(m1 − m2))`.
pub fn weyl_bracket(m1: &SymMatrix, m2: &SymMatrix) -> Result<(f64, f64)> {
    let diff = m1.sub(m2)?;
    let (dmin, dmax) = diff.eig_extremes();
    let top = m2.lambda_max();
    Ok((top + dmin, top + dmax))
}

/// Weyl bracket for `λ_min(m1)`:
/// `(λ_min(m2) + λ_min(m1 − m2), λ_min(m2) + λ_max(m1 − m2))`.
pub fn weyl_bracket_min(m1: &SymMatrix, m2: &SymMatrix) -> Result<(f64, f64)> {
    let diff = m1.sub(m2)?;
    let (dmin, dmax) = diff.eig_extremes();
    let bottom = m2.lambda_min();
    Ok((bottom + dmin, bottom + dmax))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob(m: &DMatrix<f64>) -> f64 {
        m.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn two_one() -> SymMatrix {
        SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()
    }

    #[test]
    fn extremes_of_simple_matrices() {
        assert_eq!(SymMatrix::identity(3).eig_extremes(), (1.0, 1.0));
        let d = SymMatrix::from_diagonal(&[2.0, 5.0]).unwrap();
        let (lo, hi) = d.eig_extremes();
        assert!((lo - 2.0).abs() < 1e-14 && (hi - 5.0).abs() < 1e-14);
        // characteristic polynomial (2-x)^2 - 1 has roots 1 and 3
        let (lo, hi) = two_one().eig_extremes();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.as_matrix()[(0, 1)], m.as_matrix()[(1, 0)]);
    }

    #[test]
    fn sqrt_cases() {
        let s = SymMatrix::identity(3).sqrt().unwrap();
        assert!(frob(&(s.as_matrix() - DMatrix::identity(3, 3))) < 1e-14);

        let s = SymMatrix::from_diagonal(&[4.0, 9.0])
            .unwrap()
            .sqrt()
            .unwrap();
        assert!((s.as_matrix()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((s.as_matrix()[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(s.as_matrix()[(0, 1)].abs() < 1e-14);

        let m = two_one();
        let s = m.sqrt().unwrap();
        let err = frob(&(s.as_matrix() * s.as_matrix() - m.as_matrix()));
        assert!(err < 1e-10 * frob(m.as_matrix()));
    }

    #[test]
    fn sqrt_clamps_tiny_negative_and_rejects_real_negative() {
        let m = SymMatrix::from_diagonal(&[1.0, -1e-14]).unwrap();
        let s = m.sqrt().unwrap();
        assert_eq!(s.as_matrix()[(1, 1)], 0.0);
        let bad = SymMatrix::from_diagonal(&[1.0, -1e-6]).unwrap();
        assert!(matches!(bad.sqrt(), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn inv_sqrt_cases() {
        let s = SymMatrix::identity(2).inv_sqrt().unwrap();
        assert!(frob(&(s.as_matrix() - DMatrix::identity(2, 2))) < 1e-14);
        let s = SymMatrix::from_diagonal(&[4.0])
            .unwrap()
            .inv_sqrt()
            .unwrap();
        assert!((s.as_matrix()[(0, 0)] - 0.5).abs() < 1e-15);

        let m = two_one();
        let s = m.inv_sqrt().unwrap();
        let prod = s.as_matrix() * m.as_matrix() * s.as_matrix();
        assert!(frob(&(prod - DMatrix::identity(2, 2))) < 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let m = SymMatrix::from_diagonal(&[1.0, 1e-14]).unwrap();
        match m.inv_sqrt() {
            Err(Error::NotPd { lambda_min }) => assert!((lambda_min - 1e-14).abs() < 1e-20),
            other => panic!("expected NotPd, got {other:?}"),
        }
    }

    #[test]
    fn weyl_examples() {
        let i = SymMatrix::identity(2);
        assert_eq!(weyl_bracket(&i, &i).unwrap(), (1.0, 1.0));
        let m1 = SymMatrix::from_diagonal(&[3.0, 0.0]).unwrap();
        let m2 = SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let (lo, hi) = weyl_bracket(&m1, &m2).unwrap();
        assert!(lo <= 3.0 + 1e-12 && 3.0 <= hi + 1e-12);
        assert!(weyl_bracket(&m1, &SymMatrix::identity(3)).is_err());
    }
}
