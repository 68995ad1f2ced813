//! Dense complex linear algebra used by the LMI builders.
//!
//! Vectorization is column-major everywhere in this crate, so that
//! `vec(A B C) = (Cᵀ ⊗ A) vec(B)` holds with the plain transpose.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative distance from Hermitian symmetry below which inputs are accepted
/// (and symmetrized).
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix equal to its own conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    /// Validates and symmetrizes `m` as `(m + mᴴ)/2`.
    pub fn new(m: CMatrix) -> Result<Self, Error> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("hermitian matrix must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let adj = m.adjoint();
        let asym = (&m - &adj).norm();
        let scale = m.norm().max(f64::MIN_POSITIVE);
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { rel_asymmetry: asym / scale });
        }
        Ok(Self((m + adj).scale(0.5)))
    }

    /// Wraps a matrix already known to be Hermitian by construction.
    pub(crate) fn from_parts_unchecked(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    /// `w wᴴ`.
    pub fn outer(w: &CVector) -> Self {
        Self::from_parts_unchecked(w * w.adjoint())
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let eig = SymmetricEigen::new(self.0.clone());
        let mut idx: Vec<usize> = (0..self.order()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = CMatrix::from_fn(self.order(), self.order(), |r, c| eig.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }
}

/// Column-major stacking of the columns of `a`.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix, Error> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!("cannot reshape length {} into {rows}x{cols}", v.len())));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product with the standard block layout `[a_ij B]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian
/// matrix. Each eigenvalue of `m` appears twice in the result.
pub fn realify(m: &Hermitian) -> RMatrix {
    let n = m.order();
    let a = m.matrix();
    RMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (i, j) = (r % n, c % n);
        let z = a[(i, j)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub fn min_eig(m: &Hermitian) -> f64 {
    m.matrix().clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn min_eig_real(m: &RMatrix) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `Tr(Aᴴ B)`.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn diag(v: &CVector) -> CMatrix {
    CMatrix::from_diagonal(v)
}

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues
/// from round-off are clamped to zero.
pub fn psd_sqrt(m: &Hermitian) -> CMatrix {
    let (vals, vecs) = m.eigh();
    let n = m.order();
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}
