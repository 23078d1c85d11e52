//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Singular values below `rel_tol * largest` count as zero.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().cloned().fold(0.0_f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// A unit vector `v` with `m * v ≈ 0`, if the numerical null space is nontrivial.
pub fn null_vector(m: &DMatrix<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let cols = m.ncols();
    if cols == 0 {
        return None;
    }
    if numerical_rank(m, rel_tol) == cols {
        return None;
    }
    // eigenvectors of m^T m: the smallest eigenvalue belongs to the null space
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(eig.eigenvectors.column(idx).into_owned())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a symmetric positive definite matrix, rejecting
/// pivots below `1e-12 * trace`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims("covariance must be square", m.nrows(), m.ncols()));
        }
        let trace: f64 = m.diagonal().iter().sum();
        if !(trace > 0.0) {
            return Err(Error::SingularCovariance);
        }
        let chol = Cholesky::new(m.clone()).ok_or(Error::SingularCovariance)?;
        let l = chol.l_dirty();
        let floor = 1e-12 * trace;
        if (0..m.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= floor) {
            return Err(Error::SingularCovariance);
        }
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `aᵀ Σ⁻¹ b`
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&self.solve(b))
    }
}

/// Orthonormal basis (as columns) of the complement of `v` in ℝⁿ.
pub fn orthonormal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let norm2 = v.norm_squared();
    let proj = DMatrix::<f64>::identity(n, n) - (v * v.transpose()) / norm2;
    let eig = proj.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let cols: Vec<DVector<f64>> =
        idx.iter().take(n - 1).map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Solve a square system; `None` if numerically singular.
pub fn solve_square(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sol = a.lu().solve(b)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.svd(true, true);
    let largest = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    svd.solve(b, 1e-12 * largest.max(f64::MIN_POSITIVE)).ok()
}
