//! Small dense linear algebra: rank-3/4 tensors, positive-semidefinite solves
//! and the symmetric-definite generalized eigenproblem.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff below which a PSD matrix is treated as singular.
pub const PSD_CUTOFF: f64 = 1e-12;

/// Dense rank-3 tensor with `n^3` entries in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.data[(i * n + j) * n + k] = v;
    }

    /// `T(u, v, w)`.
    pub fn contract3(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let uv = u[i] * v[j];
                if uv == 0.0 {
                    continue;
                }
                for k in 0..n {
                    s += self.get(i, j, k) * uv * w[k];
                }
            }
        }
        s
    }

    /// `T(., ., w)` as a matrix.
    pub fn contract_last(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| self.get(i, j, k) * w[k]).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest deviation from total symmetry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [self.get(j, i, k), self.get(i, k, j), self.get(k, j, i)] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Dense rank-4 tensor with `n^4` entries in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l] = v;
    }

    pub fn contract4(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ab = a[i] * b[j];
                if ab == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let abc = ab * c[k];
                    for l in 0..n {
                        s += self.get(i, j, k, l) * abc * d[l];
                    }
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest deviation from total symmetry (checked on generating transpositions).
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        for w in [self.get(j, i, k, l), self.get(i, k, j, l), self.get(i, j, l, k)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Symmetric part `(A + A^T)/2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigen-decomposition with eigenvalues sorted ascending (columns permuted to match).
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("non-finite matrix entry".into()));
    }
    let eig = SymmetricEigen::try_new(symmetrize(a), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("iteration limit".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Moore-Penrose pseudo-inverse of a symmetric positive-semidefinite matrix.
pub fn psd_pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sorted_symmetric_eigen(a)?;
    let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &lam) in vals.iter().enumerate() {
        if lam > PSD_CUTOFF * top {
            let v = vecs.column(i);
            out += (v * v.transpose()) / lam;
        }
    }
    Ok(out)
}

/// Inverse of a symmetric positive-definite matrix, falling back to the
/// pseudo-inverse when Cholesky fails (semidefinite limits such as the
/// coordinate axes of k-th root norms).
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => psd_pinv(a),
    }
}

/// Solve `A x = b` for symmetric PSD `A`; least-squares minimum-norm when singular.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Ok(psd_pinv(a)? * b),
    }
}

/// Solution of the generalized problem `H v = k G v` for symmetric `H` and
/// symmetric positive-semidefinite `G`.
#[derive(Clone, Debug)]
pub struct GeneralizedEigen {
    /// Eigenvalues sorted ascending.
    pub values: DVector<f64>,
    /// Columns are eigenvectors in the input coordinates; G-orthonormal on the
    /// range of `G`, Euclidean-unit on its kernel.
    pub vectors: DMatrix<f64>,
    /// Number of directions in the kernel of `G` (assigned eigenvalue 0).
    pub null_directions: usize,
}

/// Solve `H v = k G v`. Directions in the (numerical) kernel of `G` must also be
/// annihilated by `H`; they are given the limiting eigenvalue 0.
pub fn generalized_symmetric_eigen(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = g.nrows();
    if h.nrows() != n || h.ncols() != n || g.ncols() != n {
        return Err(Error::BadDimension("generalized eigenproblem shape mismatch".into()));
    }
    if n == 0 {
        return Ok(GeneralizedEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0), null_directions: 0 });
    }
    let h = symmetrize(h);
    let g = symmetrize(g);
    if let Some(ch) = g.clone().cholesky() {
        let l = ch.l();
        // Reduced matrix L^{-1} H L^{-T}.
        let linv = l.clone().try_inverse().ok_or_else(|| Error::EigenFailure("triangular inverse".into()))?;
        let reduced = &linv * &h * linv.transpose();
        let (values, w) = sorted_symmetric_eigen(&reduced)?;
        let vectors = linv.transpose() * w;
        return Ok(GeneralizedEigen { values, vectors, null_directions: 0 });
    }

    let (mu, u) = sorted_symmetric_eigen(&g)?;
    let top = mu.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top <= 0.0 {
        return Err(Error::EigenFailure("metric vanishes on the tangent space".into()));
    }
    let cutoff = 1e-10 * top;
    let range: Vec<usize> = (0..n).filter(|&i| mu[i] > cutoff).collect();
    let kernel: Vec<usize> = (0..n).filter(|&i| mu[i] <= cutoff).collect();
    if kernel.iter().any(|&i| mu[i] < -1e-8 * top) {
        return Err(Error::EigenFailure("metric is indefinite".into()));
    }
    let hscale = h.amax().max(1.0);
    for &i in &kernel {
        let ui = u.column(i);
        let hu = &h * ui;
        if hu.amax() > 1e-7 * hscale {
            return Err(Error::EigenFailure("second fundamental form does not vanish on the metric kernel".into()));
        }
    }
    let r = range.len();
    // Scaled range basis: columns u_i / sqrt(mu_i) are G-orthonormal.
    let basis = DMatrix::from_fn(n, r, |row, c| u[(row, range[c])] / mu[range[c]].sqrt());
    let reduced = basis.transpose() * &h * &basis;
    let (rvals, rvecs) = sorted_symmetric_eigen(&reduced)?;
    let range_vectors = &basis * rvecs;

    let mut entries: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for c in 0..r {
        entries.push((rvals[c], range_vectors.column(c).into_owned()));
    }
    for &i in &kernel {
        entries.push((0.0, u.column(i).into_owned()));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = DVector::from_iterator(n, entries.iter().map(|e| e.0));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, e) in entries.iter().enumerate() {
        vectors.set_column(c, &e.1);
    }
    Ok(GeneralizedEigen { values, vectors, null_directions: kernel.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generalized_eigen_matches_reduced_problem() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let ge = generalized_symmetric_eigen(&h, &g).unwrap();
        for c in 0..2 {
            let v = ge.vectors.column(c);
            let lhs = &h * v;
            let rhs = (&g * v) * ge.values[c];
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
            assert_relative_eq!((v.transpose() * &g * v)[0], 1.0, epsilon = 1e-12);
        }
        assert!(ge.values[0] <= ge.values[1]);
    }

    #[test]
    fn singular_metric_kernel_gets_zero() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        let ge = generalized_symmetric_eigen(&h, &g).unwrap();
        assert_eq!(ge.null_directions, 1);
        assert_relative_eq!(ge.values[0], -0.5, epsilon = 1e-14);
        assert_relative_eq!(ge.values[1], 0.0);
    }

    #[test]
    fn singular_metric_with_curved_kernel_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(generalized_symmetric_eigen(&h, &g), Err(Error::EigenFailure(_))));
    }

    #[test]
    fn pinv_of_singular_block() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let p = spd_inverse(&a).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.25, epsilon = 1e-14);
        assert_relative_eq!(p[(1, 1)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(p[(2, 2)], 0.0);
    }
}
