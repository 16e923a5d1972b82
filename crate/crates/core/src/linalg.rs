//! Dense symmetric linear algebra used throughout the crate.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. The symmetric
//! eigensolver is a cyclic Jacobi iteration: slow for large matrices but
//! eigenvectors come out orthogonal to machine precision, which the
//! character computations downstream depend on.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Mat = DMatrix<f64>;

/// Maximum number of full Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal Frobenius threshold for Jacobi convergence.
pub const JACOBI_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    EigenFailure { sweeps: usize, off: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Reassemble `f(A) = V diag(f(e)) V^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mut scaled = self.vectors.clone();
        for (j, &e) in self.values.iter().enumerate() {
            let fe = f(e);
            scaled.column_mut(j).scale_mut(fe);
        }
        symmetrize(&(&scaled * self.vectors.transpose()))
    }

    /// Columns of `vectors` whose eigenvalue satisfies `keep`.
    pub fn select(&self, keep: impl Fn(f64) -> bool) -> Mat {
        let idx: Vec<usize> = (0..self.dim()).filter(|&j| keep(self.values[j])).collect();
        columns(&self.vectors, &idx)
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Only the symmetric part of `a` is used. Iterates until the off-diagonal
/// Frobenius norm drops below `JACOBI_TOL * ||a||_F`, for at most
/// `MAX_SWEEPS` sweeps. Output ordering is deterministic: ascending values,
/// ties broken by original column position.
pub fn sym_eigen(a: &Mat) -> Result<SymEigen, LinalgError> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = rows;
    let mut m = symmetrize(a);
    let mut v = Mat::identity(n, n);
    let scale = m.norm();
    let target = JACOBI_TOL * scale;

    let mut converged = off_diagonal_norm(&m) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&m) <= target;
    }
    if !converged {
        return Err(LinalgError::EigenFailure { sweeps, off: off_diagonal_norm(&m) });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = columns(&v, &order);
    Ok(SymEigen { values, vectors })
}

// Apply the rotation in the (p, q) plane that annihilates m[p, q].
fn rotate(m: &mut Mat, v: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let n = m.nrows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn off_diagonal_norm(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Sub-matrix made of the listed columns, in order.
pub fn columns(a: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(a.nrows(), idx.len());
    for (k, &j) in idx.iter().enumerate() {
        out.set_column(k, &a.column(j));
    }
    out
}

/// Horizontal concatenation of frames with equal row counts.
pub fn hstack(frames: &[&Mat]) -> Mat {
    let rows = frames.first().map_or(0, |f| f.nrows());
    let cols = frames.iter().map(|f| f.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for f in frames {
        debug_assert_eq!(f.nrows(), rows);
        out.view_mut((0, at), (rows, f.ncols())).copy_from(*f);
        at += f.ncols();
    }
    out
}

/// Block-diagonal sum of square matrices.
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(*b);
        at += k;
    }
    out
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_norm(a: &Mat) -> Result<f64, LinalgError> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let eig = sym_eigen(a)?;
    Ok(eig.values.iter().fold(0.0f64, |acc, e| acc.max(e.abs())))
}

/// Spectral norm of a general matrix, via the Gram matrix `a^T a`.
pub fn spectral_norm(a: &Mat) -> Result<f64, LinalgError> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let gram = if a.nrows() >= a.ncols() { a.transpose() * a } else { a * a.transpose() };
    let eig = sym_eigen(&gram)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// Singular values of a general matrix in ascending order.
pub fn singular_values(a: &Mat) -> Result<Vec<f64>, LinalgError> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let gram = a.transpose() * a;
    let eig = sym_eigen(&gram)?;
    Ok(eig.values.iter().map(|e| e.max(0.0).sqrt()).collect())
}

/// `||F^T F - I||_F` for a frame with orthonormal columns.
pub fn orthonormality_defect(frame: &Mat) -> f64 {
    let k = frame.ncols();
    (frame.transpose() * frame - Mat::identity(k, k)).norm()
}

/// Orthogonal projection `F F^T` onto the span of an orthonormal frame.
pub fn projector(frame: &Mat) -> Mat {
    frame * frame.transpose()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn diag(values: &[f64]) -> Mat {
    Mat::from_diagonal(&DVector::from_column_slice(values))
}
