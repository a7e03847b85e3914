//! Dense convex quadratic programming by a primal active-set method, plus
//! the stationarity and multiplier-boundedness queries built on it.
//!
//! Equality-constrained subproblems are solved with a nullspace method:
//! anti-cycling uses Bland's lowest-index rule for both the blocking
//! constraint and the dropped constraint, and degenerate KKT systems fall
//! back to pivoted-QR least squares. Phase 1 runs the same loop on an
//! auxiliary slack QP.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, dot, norm2, norm_inf, sub, Matrix, PivotedQr};
use crate::polytope::{standard_form_vertices, PolytopeError};

pub const FEAS_TOL: f64 = 1e-9;
pub const DUAL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub enum QpError {
    DimensionMismatch,
    NotSymmetric,
    /// Objective has negative curvature on the feasible subspace.
    NotConvex,
    /// Certified by the phase-1 slack QP: the returned multipliers combine
    /// the constraints into an inconsistency witness.
    Infeasible {
        max_violation: f64,
        farkas: Vec<f64>,
    },
    Unbounded,
    IterationLimit,
    Enumeration(PolytopeError),
}

impl core::fmt::Display for QpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            QpError::DimensionMismatch => write!(f, "inconsistent dimensions"),
            QpError::NotSymmetric => write!(f, "quadratic term is not symmetric"),
            QpError::NotConvex => write!(f, "quadratic term is not positive semidefinite"),
            QpError::Infeasible { max_violation, .. } => {
                write!(f, "infeasible constraints (residual {max_violation:.3e})")
            }
            QpError::Unbounded => write!(f, "objective is unbounded below"),
            QpError::IterationLimit => write!(f, "active-set iteration limit reached"),
            QpError::Enumeration(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for QpError {}

impl From<PolytopeError> for QpError {
    fn from(e: PolytopeError) -> Self {
        QpError::Enumeration(e)
    }
}

/// `min 1/2 d' H d + g' d` subject to `Aeq d = beq`, `Ain d <= bin`.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub h: Matrix,
    pub g: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub a_in: Matrix,
    pub b_in: Vec<f64>,
}

impl QpProblem {
    pub fn unconstrained(h: Matrix, g: Vec<f64>) -> Self {
        let n = g.len();
        QpProblem {
            h,
            g,
            a_eq: Matrix::zeros(0, n),
            b_eq: Vec::new(),
            a_in: Matrix::zeros(0, n),
            b_in: Vec::new(),
        }
    }

    pub fn objective(&self, d: &[f64]) -> f64 {
        0.5 * dot(d, &self.h.matvec(d)) + dot(&self.g, d)
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.g.len();
        if self.h.nrows() != n
            || self.h.ncols() != n
            || self.a_eq.ncols() != n && self.a_eq.nrows() > 0
            || self.a_in.ncols() != n && self.a_in.nrows() > 0
            || self.a_eq.nrows() != self.b_eq.len()
            || self.a_in.nrows() != self.b_in.len()
        {
            return Err(QpError::DimensionMismatch);
        }
        if !self.h.is_symmetric(1e-12 * (1.0 + self.h.max_abs())) {
            return Err(QpError::NotSymmetric);
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub d: Vec<f64>,
    pub lambda_eq: Vec<f64>,
    pub mu_in: Vec<f64>,
    /// Inequality rows tight at the solution (0-based).
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
}

/// Solve a convex QP to a KKT point; the global minimizer when the reduced
/// Hessian is positive definite on the feasible subspace.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution, QpError> {
    p.validate()?;
    let n = p.g.len();
    let n_in = p.a_in.nrows();

    // phase 1: a feasible starting point
    let mut d0 = vec![0.0; n];
    if p.a_eq.nrows() > 0 {
        let qr = PivotedQr::new(&p.a_eq);
        d0 = qr.solve_lstsq(&p.b_eq);
        let resid = norm_inf(&sub(&p.a_eq.matvec(&d0), &p.b_eq));
        if resid > FEAS_TOL * (1.0 + norm_inf(&p.b_eq)) {
            return Err(QpError::Infeasible {
                max_violation: resid,
                farkas: Vec::new(),
            });
        }
    }
    let viol: Vec<f64> = if n_in > 0 {
        p.a_in
            .matvec(&d0)
            .iter()
            .zip(&p.b_in)
            .map(|(a, b)| (a - b).max(0.0))
            .collect()
    } else {
        Vec::new()
    };
    if viol.iter().any(|&v| v > FEAS_TOL * (1.0 + norm_inf(&p.b_in))) {
        d0 = phase1(p, &d0, &viol)?;
    }

    let (d, lambda_eq, mu_in) = active_set_loop(&p.h, &p.g, &p.a_eq, &p.b_eq, &p.a_in, &p.b_in, d0)?;

    // diagnostics
    let mut stat = p.h.matvec(&d);
    axpy(1.0, &p.g, &mut stat);
    for (i, li) in lambda_eq.iter().enumerate() {
        axpy(*li, p.a_eq.row(i), &mut stat);
    }
    for (j, mj) in mu_in.iter().enumerate() {
        axpy(*mj, p.a_in.row(j), &mut stat);
    }
    let mut kkt = norm2(&stat);
    let mut active_set = Vec::new();
    for j in 0..n_in {
        let slack = p.b_in[j] - dot(p.a_in.row(j), &d);
        kkt = kkt.max((-slack).max(0.0));
        kkt = kkt.max((-mu_in[j]).max(0.0));
        kkt = kkt.max((mu_in[j] * slack).abs());
        if slack.abs() <= 1e-8 * (1.0 + p.b_in[j].abs()) {
            active_set.push(j);
        }
    }
    for i in 0..p.a_eq.nrows() {
        kkt = kkt.max((dot(p.a_eq.row(i), &d) - p.b_eq[i]).abs());
    }

    Ok(QpSolution {
        d,
        lambda_eq,
        mu_in,
        active_set,
        kkt_residual: kkt,
    })
}

/// Auxiliary slack QP: `min 1/2 |s|^2` over `Aeq d = beq`, `Ain d - s <= bin`.
fn phase1(p: &QpProblem, d0: &[f64], viol: &[f64]) -> Result<Vec<f64>, QpError> {
    let n = p.g.len();
    let q = p.a_in.nrows();
    let nz = n + q;
    let h = Matrix::from_fn(nz, nz, |i, j| if i == j && i >= n { 1.0 } else { 0.0 });
    let g = vec![0.0; nz];
    let a_eq = Matrix::from_fn(p.a_eq.nrows(), nz, |i, j| {
        if j < n {
            p.a_eq[(i, j)]
        } else {
            0.0
        }
    });
    let a_in = Matrix::from_fn(q, nz, |i, j| {
        if j < n {
            p.a_in[(i, j)]
        } else if j - n == i {
            -1.0
        } else {
            0.0
        }
    });
    let mut z0 = d0.to_vec();
    z0.extend_from_slice(viol);

    let (z, _, mu) = active_set_loop(&h, &g, &a_eq, &p.b_eq, &a_in, &p.b_in, z0)?;
    let smax = norm_inf(&z[n..]);
    if smax > FEAS_TOL * (1.0 + norm_inf(&p.b_in)) {
        return Err(QpError::Infeasible {
            max_violation: smax,
            farkas: mu,
        });
    }
    Ok(z[..n].to_vec())
}

/// Primal active-set iteration from a feasible point.
#[allow(clippy::too_many_arguments)]
fn active_set_loop(
    h: &Matrix,
    g: &[f64],
    a_eq: &Matrix,
    _b_eq: &[f64],
    a_in: &Matrix,
    b_in: &[f64],
    mut z: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), QpError> {
    let n = g.len();
    let n_eq = a_eq.nrows();
    let n_in = a_in.nrows();
    let mut working: Vec<usize> = Vec::new();
    let scale = 1.0 + h.max_abs() + norm_inf(g);

    for _iter in 0..MAX_ITER {
        let mut grad = h.matvec(&z);
        axpy(1.0, g, &mut grad);

        // step on the working subspace
        let (p_step, unbounded_dir) = subspace_step(h, &grad, a_eq, a_in, &working, n, scale)?;
        let p_norm = norm2(&p_step);

        if !unbounded_dir && p_norm <= 1e-11 * (1.0 + norm2(&z)) {
            // stationary on the working set: check multipliers
            let ncols = n_eq + working.len();
            if ncols == 0 {
                return Ok((z, Vec::new(), vec![0.0; n_in]));
            }
            let at = Matrix::from_fn(n, ncols, |i, j| {
                if j < n_eq {
                    a_eq[(j, i)]
                } else {
                    a_in[(working[j - n_eq], i)]
                }
            });
            let neg_grad: Vec<f64> = grad.iter().map(|x| -x).collect();
            let y = PivotedQr::new(&at).solve_lstsq(&neg_grad);
            let lambda = y[..n_eq].to_vec();
            let mu_w = &y[n_eq..];

            // Bland: drop the lowest-index working constraint with negative dual
            let mut drop = None;
            for (slot, &j) in working.iter().enumerate() {
                if mu_w[slot] < -DUAL_TOL * scale {
                    drop = match drop {
                        None => Some((slot, j)),
                        Some((_, dj)) if j < dj => Some((slot, j)),
                        keep => keep,
                    };
                }
            }
            match drop {
                None => {
                    let mut mu = vec![0.0; n_in];
                    for (slot, &j) in working.iter().enumerate() {
                        mu[j] = mu_w[slot].max(0.0);
                    }
                    return Ok((z, lambda, mu));
                }
                Some((slot, _)) => {
                    working.remove(slot);
                    continue;
                }
            }
        }

        // ratio test against non-working constraints
        let alpha_cap = if unbounded_dir { f64::INFINITY } else { 1.0 };
        let mut alpha = alpha_cap;
        let mut blocking = None;
        for j in 0..n_in {
            if working.contains(&j) {
                continue;
            }
            let aj = a_in.row(j);
            let denom = dot(aj, &p_step);
            if denom <= 1e-13 * (1.0 + norm2(aj)) * (1.0 + p_norm) {
                continue;
            }
            let slack = (b_in[j] - dot(aj, &z)).max(0.0);
            let ratio = slack / denom;
            if ratio < alpha - 1e-14 * (1.0 + alpha.min(1e30)) {
                alpha = ratio;
                blocking = Some(j);
            }
        }

        if alpha.is_infinite() {
            return Err(QpError::Unbounded);
        }
        if alpha > 0.0 {
            axpy(alpha, &p_step, &mut z);
        }
        match blocking {
            Some(j) if alpha < alpha_cap => {
                let pos = working.partition_point(|&wj| wj < j);
                working.insert(pos, j);
            }
            _ => {}
        }
    }
    Err(QpError::IterationLimit)
}

/// Minimizer (or unbounded descent direction) of the quadratic model on the
/// nullspace of the working constraints. Returns `(step, is_direction)`.
fn subspace_step(
    h: &Matrix,
    grad: &[f64],
    a_eq: &Matrix,
    a_in: &Matrix,
    working: &[usize],
    n: usize,
    scale: f64,
) -> Result<(Vec<f64>, bool), QpError> {
    let n_rows = a_eq.nrows() + working.len();
    let zbasis = if n_rows == 0 {
        Matrix::identity(n)
    } else {
        let c = Matrix::from_fn(n_rows, n, |i, j| {
            if i < a_eq.nrows() {
                a_eq[(i, j)]
            } else {
                a_in[(working[i - a_eq.nrows()], j)]
            }
        });
        PivotedQr::nullspace_of(&c)
    };
    let k = zbasis.ncols();
    if k == 0 {
        return Ok((vec![0.0; n], false));
    }

    let hz = h.matmul(&zbasis);
    let hr = zbasis.transpose().matmul(&hz);
    let gr = zbasis.tr_matvec(grad);

    let (evals, evecs) = crate::linalg::jacobi_eigen_sym(&hr, 1e-12, 100);
    let emax = evals.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    let pos_tol = 1e-10 * emax.max(1.0);
    if evals.iter().any(|&e| e < -1e-7 * scale.max(emax)) {
        return Err(QpError::NotConvex);
    }

    // components of gr in the eigenbasis
    let mut u = vec![0.0; k];
    let mut gz = vec![0.0; k];
    for idx in 0..k {
        let vcol = evecs.col(idx);
        let coef = dot(&vcol, &gr);
        if evals[idx] > pos_tol {
            axpy(-coef / evals[idx], &vcol, &mut u);
        } else {
            axpy(coef, &vcol, &mut gz);
        }
    }

    let gz_norm = norm2(&gz);
    if gz_norm > 1e-10 * (1.0 + norm2(grad)) {
        // zero-curvature descent direction
        let dir: Vec<f64> = gz.iter().map(|x| -x / gz_norm).collect();
        return Ok((zbasis.matvec(&dir), true));
    }
    Ok((zbasis.matvec(&u), false))
}

/// Result of the restricted stationarity minimization.
#[derive(Clone, Debug)]
pub struct MinNormResult {
    /// `min |grad_f + sum lambda_i grad_p_i + sum_{j in J} mu_j grad_q_j|^2`.
    pub value: f64,
    pub lambda: Vec<f64>,
    /// Full-length `mu` with zeros off the allowed support.
    pub mu: Vec<f64>,
}

/// Minimize the squared stationarity residual over multipliers with `mu >= 0`
/// supported on the (1-based) index set `j_set`.
pub fn min_norm_stationarity(
    grad_f: &[f64],
    grad_p: &Matrix,
    grad_q: &Matrix,
    j_set: &[usize],
) -> Result<MinNormResult, QpError> {
    let n = grad_f.len();
    let s = grad_p.nrows();
    let t = grad_q.nrows();
    debug_assert!(j_set.iter().all(|&j| 1 <= j && j <= t));
    let nv = s + j_set.len();

    if nv == 0 {
        return Ok(MinNormResult {
            value: dot(grad_f, grad_f),
            lambda: Vec::new(),
            mu: vec![0.0; t],
        });
    }

    // columns of G: equality gradients then the allowed inequality gradients
    let gmat = Matrix::from_fn(n, nv, |i, j| {
        if j < s {
            grad_p[(j, i)]
        } else {
            grad_q[(j_set[j - s] - 1, i)]
        }
    });
    let h = {
        let gt = gmat.transpose();
        gt.matmul(&gmat)
    };
    let g_lin = gmat.tr_matvec(grad_f);
    // mu >= 0 bounds
    let a_in = Matrix::from_fn(j_set.len(), nv, |i, j| if j == s + i { -1.0 } else { 0.0 });
    let b_in = vec![0.0; j_set.len()];
    let qp = QpProblem {
        h,
        g: g_lin,
        a_eq: Matrix::zeros(0, nv),
        b_eq: Vec::new(),
        a_in,
        b_in,
    };
    let sol = solve_qp(&qp)?;

    let mut resid = grad_f.to_vec();
    let gz = gmat.matvec(&sol.d);
    axpy(1.0, &gz, &mut resid);
    let mut mu = vec![0.0; t];
    for (slot, &j) in j_set.iter().enumerate() {
        mu[j - 1] = sol.d[s + slot].max(0.0);
    }
    Ok(MinNormResult {
        value: dot(&resid, &resid),
        lambda: sol.d[..s].to_vec(),
        mu,
    })
}

/// Decide whether the homogeneous multiplier system only has the zero
/// solution: `lambda` free on the rows of `grad_p`, `mu >= 0` on the rows of
/// `grad_q_active`, `sum_i lambda_i grad_p_i + sum_j mu_j grad_q_j = 0`.
///
/// Nonzero solutions are detected through the vertices of the system
/// normalized by `sum |lambda| + sum mu = 1` (every nonzero solution scales
/// into that polytope, and a polytope with a nonzero point has a vertex with
/// `(lambda, mu) != 0` since both are linear in the enumeration variables).
pub fn lp_feasibility_bounded(grad_p: &Matrix, grad_q_active: &Matrix) -> Result<bool, QpError> {
    let s = grad_p.nrows();
    let t = grad_q_active.nrows();
    if s + t == 0 {
        return Ok(true);
    }
    let n = if s > 0 {
        grad_p.ncols()
    } else {
        grad_q_active.ncols()
    };
    let ncols = 2 * s + t;
    // rows: the n stationarity equations, then the normalization row
    let e = Matrix::from_fn(n + 1, ncols, |i, j| {
        if i < n {
            if j < s {
                grad_p[(j, i)]
            } else if j < 2 * s {
                -grad_p[(j - s, i)]
            } else {
                grad_q_active[(j - 2 * s, i)]
            }
        } else {
            1.0
        }
    });
    let mut f = vec![0.0; n + 1];
    f[n] = 1.0;
    let vertices = standard_form_vertices(&e, &f, 1e-9)?;
    for vtx in &vertices {
        let lambda_nonzero = (0..s).any(|i| (vtx[i] - vtx[s + i]).abs() > 1e-9);
        let mu_nonzero = (0..t).any(|j| vtx[2 * s + j] > 1e-9);
        if lambda_nonzero || mu_nonzero {
            return Ok(false);
        }
    }
    Ok(true)
}
