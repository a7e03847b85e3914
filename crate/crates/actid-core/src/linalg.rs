//! Dense linear algebra for small problems: row-major matrices, pivoted QR
//! least squares, nullspace bases, and cyclic Jacobi symmetric eigensolves.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath::{hypot, sqrt};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(x[i], self.row(i), &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik != 0.0 {
                    for j in 0..other.cols {
                        out[(i, j)] += aik * other[(k, j)];
                    }
                }
            }
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Stack the rows of `self` on top of the rows of `other`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        if self.rows == 0 {
            return other.clone();
        }
        if other.rows == 0 {
            return self.clone();
        }
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR with column pivoting: `A P = Q R`.
pub struct PivotedQr {
    q: Matrix,        // rows x rows, orthogonal
    r: Matrix,        // rows x cols, upper triangular up to pivoting
    perm: Vec<usize>, // column permutation: factored column j is original perm[j]
    rank: usize,
}

/// Relative rank threshold used throughout the crate for degenerate systems.
pub const RANK_TOL: f64 = 1e-12;

impl PivotedQr {
    pub fn new(a: &Matrix) -> Self {
        let m = a.nrows();
        let n = a.ncols();
        let mut r = a.clone();
        let mut q = Matrix::identity(m);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut col_norms: Vec<f64> = (0..n).map(|j| dot(&r.col(j), &r.col(j))).collect();

        let kmax = m.min(n);
        for k in 0..kmax {
            // pivot: largest remaining column norm (recomputed for stability)
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let nj: f64 = (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
                col_norms[j] = nj;
                if nj > best_norm {
                    best_norm = nj;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    let tmp = r[(i, k)];
                    r[(i, k)] = r[(i, best)];
                    r[(i, best)] = tmp;
                }
                perm.swap(k, best);
                col_norms.swap(k, best);
            }

            // Householder vector for column k below the diagonal
            let mut alpha = 0.0;
            for i in k..m {
                alpha = hypot(alpha, r[(i, k)]);
            }
            if alpha == 0.0 {
                continue;
            }
            if r[(k, k)] > 0.0 {
                alpha = -alpha;
            }
            let mut v = vec![0.0; m];
            for i in k..m {
                v[i] = r[(i, k)];
            }
            v[k] -= alpha;
            let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
            if vnorm2 <= f64::MIN_POSITIVE {
                continue;
            }
            // apply H = I - 2 v v^T / (v^T v) to R (columns k..) and accumulate into Q
            for j in k..n {
                let s: f64 = (k..m).map(|i| v[i] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
                for i in k..m {
                    r[(i, j)] -= s * v[i];
                }
            }
            for j in 0..m {
                let s: f64 = (k..m).map(|i| v[i] * q[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
                for i in k..m {
                    q[(i, j)] -= s * v[i];
                }
            }
            r[(k, k)] = alpha;
            for i in (k + 1)..m {
                r[(i, k)] = 0.0;
            }
        }
        // q currently holds Q^T (product of reflectors applied to I)
        let qt = q;
        let q = qt.transpose();

        let diag_max = (0..kmax).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
        let thresh = RANK_TOL * diag_max.max(1e-300);
        let mut rank = 0;
        for i in 0..kmax {
            if r[(i, i)].abs() > thresh {
                rank += 1;
            } else {
                break;
            }
        }
        PivotedQr { q, r, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The orthogonal factor (full, `m x m`).
    pub fn q(&self) -> &Matrix {
        &self.q
    }

    /// Basic least-squares solution of `A x = b` (free variables set to zero
    /// when rank deficient).
    pub fn solve_lstsq(&self, b: &[f64]) -> Vec<f64> {
        let m = self.q.nrows();
        let n = self.r.ncols();
        debug_assert_eq!(b.len(), m);
        let qtb = self.q.tr_matvec(b);
        let r = self.rank;
        let mut y = vec![0.0; n];
        for i in (0..r).rev() {
            let mut s = qtb[i];
            for j in (i + 1)..r {
                s -= self.r[(i, j)] * y[j];
            }
            y[i] = s / self.r[(i, i)];
        }
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[self.perm[j]] = y[j];
        }
        x
    }

    /// Orthonormal basis of the nullspace of `A` (columns).
    /// Computed from the QR factorization of `A^T`.
    pub fn nullspace_of(a: &Matrix) -> Matrix {
        let at = a.transpose();
        let qr = PivotedQr::new(&at);
        let n = a.ncols();
        let r = qr.rank;
        let mut basis = Matrix::zeros(n, n - r);
        for j in r..n {
            for i in 0..n {
                basis[(i, j - r)] = qr.q[(i, j)];
            }
        }
        basis
    }
}

/// Least-squares solve returning the solution and the residual 2-norm.
pub fn lstsq(a: &Matrix, b: &[f64]) -> (Vec<f64>, f64) {
    let qr = PivotedQr::new(a);
    let x = qr.solve_lstsq(b);
    let res = sub(&a.matvec(&x), b);
    (x, norm2(&res))
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in nonincreasing order (stable with respect to the
/// pre-sort order on ties) and the matrix whose columns are the matching
/// eigenvectors, so `A = V diag(w) V^T`.
pub fn jacobi_eigen_sym(a: &Matrix, off_tol: f64, max_sweeps: usize) -> (Vec<f64>, Matrix) {
    assert_eq!(a.nrows(), a.ncols(), "symmetric eigensolve needs a square matrix");
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    if n <= 1 {
        return ((0..n).map(|i| m[(i, i)]).collect(), v);
    }

    for _sweep in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if sqrt(2.0 * off) <= off_tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= off_tol * 1e-3 / (n * n) as f64 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(theta * theta + 1.0))
                } else {
                    1.0 / (theta - sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                // rotate rows/cols p and q of M
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
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    // stable nonincreasing sort: ties keep original order
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap().then(i.cmp(&j)));
    let w: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut vs = Matrix::zeros(n, n);
    for (newj, &oldj) in order.iter().enumerate() {
        for i in 0..n {
            vs[(i, newj)] = v[(i, oldj)];
        }
    }
    (w, vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lstsq_square() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let (x, res) = lstsq(&a, &[5.0, 10.0]);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn lstsq_overdetermined() {
        // fit y = 2x on three points with exact data
        let a = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let (x, res) = lstsq(&a, &[2.0, 4.0, 6.0]);
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn lstsq_rank_deficient() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let (x, res) = lstsq(&a, &[3.0, 6.0]);
        assert!(res < 1e-12);
        let ax = a.matvec(&x);
        assert_abs_diff_eq!(ax[0], 3.0, epsilon = 1e-10);
        assert_eq!(PivotedQr::new(&a).rank(), 1);
    }

    #[test]
    fn nullspace_orthonormal() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        let z = PivotedQr::new(&a).rank();
        assert_eq!(z, 1);
        let basis = PivotedQr::nullspace_of(&a);
        assert_eq!(basis.ncols(), 2);
        for j in 0..2 {
            let col = basis.col(j);
            assert_abs_diff_eq!(norm2(&col), 1.0, epsilon = 1e-12);
            assert!(dot(&a.row(0).to_vec(), &col).abs() < 1e-12);
        }
        assert!(dot(&basis.col(0), &basis.col(1)).abs() < 1e-12);
    }

    #[test]
    fn jacobi_known_2x2() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (w, v) = jacobi_eigen_sym(&a, 1e-12, 100);
        assert_abs_diff_eq!(w[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-12);
        // reconstruct
        let d = Matrix::from_fn(2, 2, |i, j| if i == j { w[i] } else { 0.0 });
        let rec = v.matmul(&d).matmul(&v.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(rec[(i, j)], a[(i, j)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_with_ties() {
        let a = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, -2.0],
        ]);
        let (w, _) = jacobi_eigen_sym(&a, 1e-12, 100);
        assert_eq!(w.len(), 3);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_random_reconstruction() {
        let mut rng = crate::rng::Rng::new(42);
        for _ in 0..20 {
            let n = 2 + rng.below(5);
            let g = Matrix::from_fn(n, n, |_, _| rng.gauss());
            let a = {
                let mut s = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        s[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)]);
                    }
                }
                s
            };
            let (w, v) = jacobi_eigen_sym(&a, 1e-13, 100);
            for k in 1..n {
                assert!(w[k - 1] >= w[k] - 1e-12);
            }
            let d = Matrix::from_fn(n, n, |i, j| if i == j { w[i] } else { 0.0 });
            let rec = v.matmul(&d).matmul(&v.transpose());
            for i in 0..n {
                for j in 0..n {
                    assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }
}
