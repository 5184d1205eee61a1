//! Dense factorizations backed by `faer`, exchanged as `nalgebra` matrices.

use crate::error::{Error, Result};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, `s` nonincreasing.
#[derive(Debug, Clone)]
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(a.nrows(), 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(a.ncols(), 0),
        });
    }
    let f = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::InvalidInput(format!("singular value decomposition failed: {e:?}")))?;
    let s = f.S().column_vector();
    Ok(Svd {
        u: from_faer(f.U()),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: from_faer(f.V()),
    })
}

impl Svd {
    pub fn max(&self) -> f64 {
        if self.s.is_empty() { 0.0 } else { self.s[0] }
    }

    /// Number of singular values above `rtol` times the largest.
    pub fn rank(&self, rtol: f64) -> usize {
        let cut = rtol * self.max();
        self.s.iter().take_while(|&&v| v > cut).count()
    }

    /// Pseudo-inverse keeping singular values above `rtol` times the largest.
    pub fn pinv(&self, rtol: f64) -> DMatrix<f64> {
        let r = self.rank(rtol);
        let mut ut = self.u.columns(0, r).transpose();
        for i in 0..r {
            ut.row_mut(i).scale_mut(1.0 / self.s[i]);
        }
        self.v.columns(0, r) * ut
    }

    /// Minimum-norm least-squares solution of `A x = b`.
    pub fn solve(&self, b: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
        self.pinv(rtol) * b
    }

    /// `U_r diag(s_r)` for the leading `r` directions: the channel-compressed data.
    pub fn scaled_left(&self, r: usize) -> DMatrix<f64> {
        let mut out = self.u.columns(0, r).into_owned();
        for j in 0..r {
            out.column_mut(j).scale_mut(self.s[j]);
        }
        out
    }
}

/// Eigenvalues of a general real square matrix.
pub(crate) fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(a)
        .eigenvalues()
        .map_err(|e| Error::InvalidInput(format!("eigenvalue computation failed: {e:?}")))
}

/// Eigenpairs of a symmetric matrix, eigenvalues nondecreasing.
pub(crate) fn symmetric_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let f = to_faer(a).self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenNonConvergence {
        iterations: 0,
        dimension: n,
    })?;
    let s = f.S().column_vector();
    Ok((DVector::from_fn(n, |i, _| s[i]), from_faer(f.U())))
}
