//! Points on the subdifferential graph of the maximum-eigenvalue function
//! over symmetric `k x k` matrices, with the exact piece distance for the
//! multiplicity/rank pieces of its graph decomposition.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath::sqrt;
use crate::linalg::{jacobi_eigen_sym, Matrix, PivotedQr};
use crate::rng::Rng;

/// Gap tolerance for deciding eigenvalue multiplicity.
pub const MULTIPLICITY_GAP_TOL: f64 = 1e-8;
/// Residual tolerance for the simultaneous spectral decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectralError {
    NotSymmetric,
    DimensionMismatch { expected: usize, got: usize },
    /// `(X, Y)` does not lie on the subdifferential graph (within tolerance),
    /// so the exact piece-distance construction does not apply.
    OffGraph(String),
    BadPieceIndices { mult: usize, rank: usize, k: usize },
}

impl core::fmt::Display for SpectralError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpectralError::NotSymmetric => write!(f, "matrix is not symmetric"),
            SpectralError::DimensionMismatch { expected, got } => {
                write!(f, "expected dimension {expected}, got {got}")
            }
            SpectralError::OffGraph(why) => {
                write!(f, "pair is not on the max-eigenvalue subdifferential graph: {why}")
            }
            SpectralError::BadPieceIndices { mult, rank, k } => {
                write!(f, "piece indices must satisfy 1 <= r <= m <= k, got m={mult}, r={rank}, k={k}")
            }
        }
    }
}

impl core::error::Error for SpectralError {}

/// Packed length for the upper triangle of a `k x k` symmetric matrix.
pub fn packed_len(k: usize) -> usize {
    k * (k + 1) / 2
}

fn packed_index(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i <= j && j < k);
    i * k - i * (i + 1) / 2 + j
}

/// Plain packed upper triangle (no scaling).
pub fn pack_upper(m: &Matrix) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(packed_len(k));
    for i in 0..k {
        for j in i..k {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unpack_upper(p: &[f64], k: usize) -> Matrix {
    let mut m = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = p[packed_index(i, j, k)];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Isometric vectorization: `<X, Y>_trace = <svec X, svec Y>` (off-diagonal
/// entries scaled by sqrt(2)). This is the embedding used whenever a
/// symmetric-matrix pair is treated as a point of `R^m x R^m`.
pub fn svec(m: &Matrix) -> Vec<f64> {
    let k = m.nrows();
    let s2 = sqrt(2.0);
    let mut out = Vec::with_capacity(packed_len(k));
    for i in 0..k {
        for j in i..k {
            out.push(if i == j { m[(i, j)] } else { s2 * m[(i, j)] });
        }
    }
    out
}

pub fn unsvec(p: &[f64], k: usize) -> Matrix {
    let s2 = sqrt(2.0);
    let mut m = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let raw = p[packed_index(i, j, k)];
            let v = if i == j { raw } else { raw / s2 };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// A pair `(X, Y)` on `gph(subdiff lambda_max)` together with its cached
/// simultaneous spectral decomposition `X = U^T Diag(x) U`,
/// `Y = U^T Diag(y) U`, `x` nonincreasing.
#[derive(Clone, Debug)]
pub struct SpectralPoint {
    k: usize,
    x_packed: Vec<f64>,
    y_packed: Vec<f64>,
    u: Matrix,
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectralProjection {
    pub distance: f64,
    pub projected: SpectralPoint,
    /// Set when every candidate component of `y` was zero and the projection
    /// fell back to concentrating the distribution on the top component.
    pub rescale_fallback: bool,
}

impl SpectralPoint {
    /// Build from full symmetric matrices, verifying graph membership and the
    /// simultaneous decomposition to the stated tolerance.
    pub fn try_new(x_mat: &Matrix, y_mat: &Matrix) -> Result<Self, SpectralError> {
        let k = x_mat.nrows();
        if !x_mat.is_symmetric(1e-12 * (1.0 + x_mat.max_abs())) {
            return Err(SpectralError::NotSymmetric);
        }
        if y_mat.nrows() != k || !y_mat.is_symmetric(1e-12 * (1.0 + y_mat.max_abs())) {
            return Err(SpectralError::NotSymmetric);
        }

        // eigen-decompose X, then diagonalize Y within each eigenvalue block
        let (x, v) = jacobi_eigen_sym(x_mat, 1e-13, 100);
        let mut u = v.transpose(); // X = U^T Diag(x) U
        let b = u.matmul(y_mat).matmul(&u.transpose());

        let mut y = vec![0.0; k];
        let mut start = 0;
        while start < k {
            let mut end = start + 1;
            while end < k && (x[end - 1] - x[end]).abs() <= MULTIPLICITY_GAP_TOL {
                end += 1;
            }
            let blk = end - start;
            if blk == 1 {
                y[start] = b[(start, start)];
            } else {
                let sub = Matrix::from_fn(blk, blk, |i, j| b[(start + i, start + j)]);
                let (yv, w) = jacobi_eigen_sym(&sub, 1e-13, 100);
                // rotate the rows of U belonging to this block: new rows = W^T * old rows
                let old_rows: Vec<Vec<f64>> =
                    (0..blk).map(|i| u.row(start + i).to_vec()).collect();
                for i in 0..blk {
                    for c in 0..k {
                        let mut s = 0.0;
                        for l in 0..blk {
                            s += w[(l, i)] * old_rows[l][c];
                        }
                        u[(start + i, c)] = s;
                    }
                }
                y[start..end].copy_from_slice(&yv);
            }
            start = end;
        }

        let point = SpectralPoint {
            k,
            x_packed: pack_upper(x_mat),
            y_packed: pack_upper(y_mat),
            u,
            x,
            y,
        };

        let scale = 1.0 + x_mat.frob_norm().max(y_mat.frob_norm());
        let (rx, ry) = point.reconstruction_residual();
        if rx > DECOMPOSITION_TOL * scale || ry > DECOMPOSITION_TOL * scale {
            return Err(SpectralError::OffGraph(format!(
                "no simultaneous decomposition: residuals {rx:.3e}, {ry:.3e}"
            )));
        }

        // graph conditions on y
        let p = point.multiplicity();
        let ysum: f64 = point.y.iter().sum();
        if (ysum - 1.0).abs() > DECOMPOSITION_TOL * (k as f64) {
            return Err(SpectralError::OffGraph(format!("sum of y is {ysum}")));
        }
        if point.y.iter().any(|&yi| yi < -DECOMPOSITION_TOL) {
            return Err(SpectralError::OffGraph("negative y component".into()));
        }
        if point.y[p..].iter().any(|&yi| yi.abs() > DECOMPOSITION_TOL) {
            return Err(SpectralError::OffGraph(
                "y supported outside the top eigenvalue block".into(),
            ));
        }
        Ok(point)
    }

    pub fn from_svec_pair(pair: &[f64], k: usize) -> Result<Self, SpectralError> {
        let m = packed_len(k);
        if pair.len() != 2 * m {
            return Err(SpectralError::DimensionMismatch {
                expected: 2 * m,
                got: pair.len(),
            });
        }
        let x_mat = unsvec(&pair[..m], k);
        let y_mat = unsvec(&pair[m..], k);
        SpectralPoint::try_new(&x_mat, &y_mat)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.x
    }

    pub fn subgradient_weights(&self) -> &[f64] {
        &self.y
    }

    pub fn packed(&self) -> (&[f64], &[f64]) {
        (&self.x_packed, &self.y_packed)
    }

    pub fn matrices(&self) -> (Matrix, Matrix) {
        (
            unpack_upper(&self.x_packed, self.k),
            unpack_upper(&self.y_packed, self.k),
        )
    }

    pub fn to_svec_pair(&self) -> Vec<f64> {
        let (xm, ym) = self.matrices();
        let mut out = svec(&xm);
        out.extend(svec(&ym));
        out
    }

    /// Multiplicity of the top eigenvalue (gap tolerance 1e-8).
    pub fn multiplicity(&self) -> usize {
        let top = self.x[0];
        self.x
            .iter()
            .take_while(|&&xi| (top - xi).abs() <= MULTIPLICITY_GAP_TOL)
            .count()
    }

    /// Rank of `Y`, i.e. the number of nonzero components of `y`.
    pub fn rank(&self, tol: f64) -> usize {
        self.y.iter().filter(|&&yi| yi.abs() > tol).count()
    }

    fn reconstruction_residual(&self) -> (f64, f64) {
        let (xm, ym) = self.matrices();
        let dx = Matrix::from_fn(self.k, self.k, |i, j| if i == j { self.x[i] } else { 0.0 });
        let dy = Matrix::from_fn(self.k, self.k, |i, j| if i == j { self.y[i] } else { 0.0 });
        let xr = self.u.transpose().matmul(&dx).matmul(&self.u);
        let yr = self.u.transpose().matmul(&dy).matmul(&self.u);
        let mut ex = 0.0f64;
        let mut ey = 0.0f64;
        for i in 0..self.k {
            for j in 0..self.k {
                ex += (xr[(i, j)] - xm[(i, j)]) * (xr[(i, j)] - xm[(i, j)]);
                ey += (yr[(i, j)] - ym[(i, j)]) * (yr[(i, j)] - ym[(i, j)]);
            }
        }
        (sqrt(ex), sqrt(ey))
    }

    /// Exact distance from this graph point to the piece with top-eigenvalue
    /// multiplicity at least `mult` and subgradient rank at most `rank`,
    /// together with the projected graph point.
    ///
    /// `x~` replaces the first `mult` components of `x` by their mean; `y~`
    /// zeroes all but the largest `rank` components of `y` and rescales them
    /// to sum to one.
    pub fn piece_distance(
        &self,
        mult: usize,
        rank: usize,
    ) -> Result<SpectralProjection, SpectralError> {
        let k = self.k;
        if rank < 1 || rank > mult || mult > k {
            return Err(SpectralError::BadPieceIndices { mult, rank, k });
        }

        let mut x_t = self.x.clone();
        let mean: f64 = self.x[..mult].iter().sum::<f64>() / mult as f64;
        for xi in x_t[..mult].iter_mut() {
            *xi = mean;
        }

        // keep the `rank` largest components of y (stable on ties)
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| self.y[j].partial_cmp(&self.y[i]).unwrap().then(i.cmp(&j)));
        let kept = &order[..rank];
        let mut y_t = vec![0.0; k];
        let mut total = 0.0;
        for &i in kept {
            y_t[i] = self.y[i];
            total += self.y[i];
        }
        let mut rescale_fallback = false;
        if total > 0.0 {
            for yi in &mut y_t {
                *yi /= total;
            }
        } else {
            // not covered by the construction: concentrate on the top component
            y_t = vec![0.0; k];
            y_t[0] = 1.0;
            rescale_fallback = true;
        }

        let dist2: f64 = self
            .x
            .iter()
            .zip(&x_t)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            + self
                .y
                .iter()
                .zip(&y_t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();

        let dx = Matrix::from_fn(k, k, |i, j| if i == j { x_t[i] } else { 0.0 });
        let dy = Matrix::from_fn(k, k, |i, j| if i == j { y_t[i] } else { 0.0 });
        let x_mat = self.u.transpose().matmul(&dx).matmul(&self.u);
        let y_mat = self.u.transpose().matmul(&dy).matmul(&self.u);
        let projected = SpectralPoint {
            k,
            x_packed: pack_upper(&x_mat),
            y_packed: pack_upper(&y_mat),
            u: self.u.clone(),
            x: x_t,
            y: y_t,
        };

        Ok(SpectralProjection {
            distance: sqrt(dist2),
            projected,
            rescale_fallback,
        })
    }
}

/// Draw a random point of the subdifferential graph (deterministic in `rng`).
pub fn sample_graph_point(k: usize, rng: &mut Rng) -> SpectralPoint {
    // random orthogonal basis via QR of a Gaussian matrix
    let g = Matrix::from_fn(k, k, |_, _| rng.gauss());
    let q = PivotedQr::new(&g).q().clone();

    let mut x = rng.gauss_vec(k);
    x.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if rng.chance(0.5) && k > 1 {
        let p = 1 + rng.below(k);
        let top = x[0];
        for xi in x[..p].iter_mut() {
            *xi = top;
        }
    }
    let p = {
        let top = x[0];
        x.iter()
            .take_while(|&&xi| (top - xi).abs() <= MULTIPLICITY_GAP_TOL)
            .count()
    };

    let support = 1 + rng.below(p);
    let weights = rng.simplex(support);
    let mut y = vec![0.0; k];
    // random subset of the top block of size `support`
    let mut idx: Vec<usize> = (0..p).collect();
    for i in (1..idx.len()).rev() {
        let j = rng.below(i + 1);
        idx.swap(i, j);
    }
    for (w, &i) in weights.iter().zip(idx.iter()) {
        y[i] = *w;
    }

    let dx = Matrix::from_fn(k, k, |i, j| if i == j { x[i] } else { 0.0 });
    let dy = Matrix::from_fn(k, k, |i, j| if i == j { y[i] } else { 0.0 });
    let x_mat = q.transpose().matmul(&dx).matmul(&q);
    let y_mat = q.transpose().matmul(&dy).matmul(&q);
    SpectralPoint::try_new(&x_mat, &y_mat).expect("constructed point lies on the graph")
}
