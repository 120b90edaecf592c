//! Dense row-major matrices and the symmetric eigensolver used by the
//! diffusion-map reducer.

use faer::linalg::evd;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Off-diagonal convergence threshold for [`jacobi_eig`], relative to `‖A‖_F`.
pub const DEFAULT_EIG_TOL: f64 = 1e-12;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_JACOBI_SWEEPS: usize = 100;

const SYMMETRY_TOL: f64 = 1e-10;

/// Dense matrix of `f64` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared Euclidean distances between every pair of rows.
pub fn pairwise_sq_dists(x: &Matrix) -> Result<Matrix> {
    if x.rows() == 0 {
        return Err(Error::Shape("pairwise distances need at least one row".into()));
    }
    let n = x.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(x.row(i), x.row(j));
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    Ok(out)
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector belonging to `values[j]`.
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }

    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let n = self.vectors.rows();
        let v = &self.vectors;
        Matrix::from_fn(n, n, |i, j| {
            (0..self.values.len())
                .map(|k| v.get(i, k) * self.values[k] * v.get(j, k))
                .sum()
        })
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::Shape("eigendecomposition of an empty matrix".into()));
    }
    let scale = a.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a.get(i, j) - a.get(j, i)).abs();
            if diff > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
        }
    }
    Ok(())
}

/// Sorts eigenpairs by descending value (index order on ties) and signs
/// every vector so its largest-magnitude component is non-negative.
/// `vector(i)` yields the `k`-th component of the eigenvector for `values[i]`.
fn finish(values: Vec<f64>, vector: impl Fn(usize, usize) -> f64) -> EigenDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for k in 1..n {
            if vector(src, k).abs() > vector(src, pivot).abs() {
                pivot = k;
            }
        }
        let sign = if vector(src, pivot) < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors.set(k, col, sign * vector(src, k));
        }
    }
    EigenDecomposition {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors,
    }
}

/// Symmetric eigendecomposition by tridiagonalization and divide and
/// conquer.
///
/// Eigenpairs are sorted by descending eigenvalue and each eigenvector is
/// signed so that its largest-magnitude component is non-negative.
pub fn sym_eig(a: &Matrix) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut sym = faer::Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            sym[(i, j)] = v;
        }
    }
    let mut u = faer::Mat::<f64>::zeros(n, n);
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    // sequential so results do not depend on the thread pool
    let par = faer::Par::Seq;
    let mut buf = faer::dyn_stack::MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        evd::ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        sym.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        faer::dyn_stack::MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::NoConvergence {
        sweeps: 0,
        residual: f64::NAN,
    })?;
    let values = (0..n).map(|i| s[i]).collect();
    Ok(finish(values, |i, k| u[(k, i)]))
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Iterates until the off-diagonal Frobenius norm drops below `tol·‖A‖_F`
/// or [`MAX_JACOBI_SWEEPS`] sweeps have run. Output conventions match
/// [`sym_eig`]. Cubic cost per sweep makes it slow beyond a few hundred rows.
pub fn jacobi_eig(a: &Matrix, tol: f64) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut w = Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    // rows of `vt` are the eigenvectors being accumulated
    let mut vt = Matrix::identity(n);
    let norm = w.frobenius_norm();
    let threshold = tol * norm;

    let off_norm = |w: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += w.get(i, j) * w.get(i, j);
            }
        }
        (2.0 * s).sqrt()
    };

    let mut residual = off_norm(&w);
    let mut sweeps = 0;
    while residual > threshold {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = w.get(p, p);
                let aqq = w.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                w.set(p, p, app - t * apq);
                w.set(q, q, aqq + t * apq);
                w.set(p, q, 0.0);
                w.set(q, p, 0.0);
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = w.get(p, k);
                    let akq = w.get(q, k);
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    w.set(p, k, np);
                    w.set(k, p, np);
                    w.set(q, k, nq);
                    w.set(k, q, nq);
                }
                for k in 0..n {
                    let vp = vt.get(p, k);
                    let vq = vt.get(q, k);
                    vt.set(p, k, c * vp - s * vq);
                    vt.set(q, k, s * vp + c * vq);
                }
            }
        }
        sweeps += 1;
        residual = off_norm(&w);
    }

    let values = (0..n).map(|i| w.get(i, i)).collect();
    Ok(finish(values, |i, k| vt.get(i, k)))
}
