//! Identification drivers: reveal graph pieces along approximate critical
//! sequences, certify active sufficiency, compute NLP index sets, and
//! enumerate the multiplier polytope.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath::sqrt;
use crate::graph::{BoxRegion, GraphDecomposition, GraphError, GraphPiece};
#[cfg(test)]
use crate::graph::PieceSet;
use crate::linalg::{dot, norm2, norm_inf, sub, Matrix, PivotedQr};
use crate::map::MapError;
use crate::outer::{HorizonCone, OuterError};
use crate::problem::{criticality_residual, CompositeProblem, CriticalityResidual, ProblemError};
use crate::prox::{ProxRun, ProxStep};
use crate::qp::{lp_feasibility_bounded, min_norm_stationarity, solve_qp, QpError, QpProblem};

pub const MEMBERSHIP_TOL: f64 = 1e-8;
pub const SUFFICIENCY_TOL: f64 = 1e-8;
const ACTIVE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum IdentifyError {
    MissingReference,
    /// The reference point violates the problem constraints.
    InfeasibleReference,
    UnsupportedKind(String),
    /// Without the constraint qualification the multiplier polytope may be
    /// unbounded, so vertex enumeration is refused.
    UnboundedMultiplierSet,
    BadParams(String),
    Problem(ProblemError),
    Outer(OuterError),
    Graph(GraphError),
    Map(MapError),
    Qp(QpError),
}

impl core::fmt::Display for IdentifyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            IdentifyError::MissingReference => {
                write!(f, "a reference critical point is required")
            }
            IdentifyError::InfeasibleReference => {
                write!(f, "reference point is infeasible for the outer function")
            }
            IdentifyError::UnsupportedKind(k) => write!(f, "unsupported outer kind {k}"),
            IdentifyError::UnboundedMultiplierSet => write!(
                f,
                "constraint qualification fails: multiplier set may be unbounded"
            ),
            IdentifyError::BadParams(msg) => write!(f, "{msg}"),
            IdentifyError::Problem(e) => write!(f, "{e}"),
            IdentifyError::Outer(e) => write!(f, "{e}"),
            IdentifyError::Graph(e) => write!(f, "{e}"),
            IdentifyError::Map(e) => write!(f, "{e}"),
            IdentifyError::Qp(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for IdentifyError {}

impl From<ProblemError> for IdentifyError {
    fn from(e: ProblemError) -> Self {
        IdentifyError::Problem(e)
    }
}
impl From<OuterError> for IdentifyError {
    fn from(e: OuterError) -> Self {
        IdentifyError::Outer(e)
    }
}
impl From<GraphError> for IdentifyError {
    fn from(e: GraphError) -> Self {
        IdentifyError::Graph(e)
    }
}
impl From<MapError> for IdentifyError {
    fn from(e: MapError) -> Self {
        IdentifyError::Map(e)
    }
}
impl From<QpError> for IdentifyError {
    fn from(e: QpError) -> Self {
        IdentifyError::Qp(e)
    }
}

/// Thresholds controlling what counts as revealed.
#[derive(Clone, Copy, Debug)]
pub struct RevealParams {
    /// Distance threshold to a piece.
    pub eps_reveal: f64,
    /// Residual threshold for the approximate first-order gates.
    pub delta_crit: f64,
    /// Number of trailing iterates that must agree for the summary.
    pub tail_window: usize,
}

impl RevealParams {
    pub fn new(eps_reveal: f64, delta_crit: f64, tail_window: usize) -> Result<Self, IdentifyError> {
        if !(eps_reveal > 0.0) || !(delta_crit > 0.0) || tail_window == 0 {
            return Err(IdentifyError::BadParams(
                "reveal parameters must be positive".to_string(),
            ));
        }
        Ok(RevealParams {
            eps_reveal,
            delta_crit,
            tail_window,
        })
    }
}

/// One iterate of an approximate critical sequence.
#[derive(Clone, Debug)]
pub struct IterateRecord {
    pub index: usize,
    /// Schedule parameter `eps_r` when known.
    pub eps: Option<f64>,
    pub x: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub v: Vec<f64>,
    pub step_norm: Option<f64>,
}

impl IterateRecord {
    pub fn raw(index: usize, x: Vec<f64>, c_hat: Vec<f64>, v: Vec<f64>) -> Self {
        IterateRecord {
            index,
            eps: None,
            x,
            c_hat,
            v,
            step_norm: None,
        }
    }

    pub fn from_step(index: usize, eps: Option<f64>, step: &ProxStep) -> Self {
        IterateRecord {
            index,
            eps,
            x: step.x.clone(),
            c_hat: step.c_hat.clone(),
            v: step.v.clone(),
            step_norm: Some(step.step_norm()),
        }
    }

    pub fn from_run(run: &ProxRun) -> Vec<Self> {
        run.steps
            .iter()
            .enumerate()
            .map(|(r, step)| IterateRecord::from_step(r, run.eps[r], step))
            .collect()
    }
}

/// Verdict for one graph piece at the reference point.
#[derive(Clone, Debug)]
pub struct PieceCertificate {
    pub piece_id: String,
    pub actively_sufficient: bool,
    /// A verified multiplier with `(c(ref), v)` in the piece.
    pub witness: Option<Vec<f64>>,
    /// For insufficient pieces: the separation
    /// `min over multipliers of dist((c(ref), v), piece)`.
    pub margin: Option<f64>,
    /// Set when the verdict came from the projection-based search rather
    /// than the exact polyhedral certification.
    pub best_effort: bool,
}

#[derive(Clone, Debug)]
pub struct IterateAssessment {
    pub index: usize,
    pub eps: Option<f64>,
    pub step_norm: Option<f64>,
    pub residual: CriticalityResidual,
    pub subdiff_member: bool,
    pub gates_pass: bool,
    /// Distance to every piece; NaN when the query is off-graph for a piece
    /// whose distance oracle is graph-restricted.
    pub distances: Vec<f64>,
    pub revealed: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct IdentificationReport {
    pub piece_ids: Vec<String>,
    pub iterates: Vec<IterateAssessment>,
    /// Pieces revealed at every iterate of the tail window.
    pub tail_revealed: Vec<String>,
    /// Certification per piece; empty when no reference point is available.
    pub certificates: Vec<PieceCertificate>,
    /// Cleared when the problem has no reference point, in which case the
    /// value gate is skipped (degraded mode).
    pub value_gate_active: bool,
}

/// Assess a sequence against a decomposition: a piece is revealed at an
/// iterate when the first-order gates pass and the pair `(c_hat, v)` lies
/// within `eps_reveal` of the piece.
pub fn reveal(
    problem: &CompositeProblem,
    decomposition: &GraphDecomposition,
    records: &[IterateRecord],
    params: &RevealParams,
) -> Result<IdentificationReport, IdentifyError> {
    let piece_ids = decomposition.piece_ids();
    let mut iterates = Vec::with_capacity(records.len());

    for rec in records {
        let residual = criticality_residual(problem, &rec.x, &rec.c_hat, &rec.v)?;
        let member = problem
            .outer()
            .subdiff_membership(&rec.c_hat, &rec.v, MEMBERSHIP_TOL)?;
        let gates_pass = member
            && residual.subproblem_gap < params.delta_crit
            && residual.stationarity < params.delta_crit
            && residual.value_gap.map_or(true, |g| g < params.delta_crit);

        let mut pair = rec.c_hat.clone();
        pair.extend_from_slice(&rec.v);
        let mut distances = Vec::with_capacity(decomposition.len());
        for piece in decomposition.pieces() {
            match piece.distance(&pair) {
                Ok(d) => distances.push(d),
                Err(GraphError::OffGraphQuery(_)) => distances.push(f64::NAN),
                Err(e) => return Err(e.into()),
            }
        }
        let revealed: Vec<bool> = distances
            .iter()
            .map(|d| gates_pass && d.is_finite() && *d <= params.eps_reveal)
            .collect();

        iterates.push(IterateAssessment {
            index: rec.index,
            eps: rec.eps,
            step_norm: rec.step_norm,
            residual,
            subdiff_member: member,
            gates_pass,
            distances,
            revealed,
        });
    }

    // summary: intersection over the tail window
    let tail = params.tail_window.min(iterates.len());
    let mut tail_revealed = Vec::new();
    if tail > 0 {
        let start = iterates.len() - tail;
        for (pi, id) in piece_ids.iter().enumerate() {
            if iterates[start..].iter().all(|a| a.revealed[pi]) {
                tail_revealed.push(id.clone());
            }
        }
    }

    let certificates = match problem.reference() {
        None => Vec::new(),
        Some(xb) => {
            let xb = xb.to_vec();
            let mut certs = Vec::with_capacity(decomposition.len());
            for piece in decomposition.pieces() {
                certs.push(certify_piece(problem, piece, &xb)?);
            }
            certs
        }
    };

    Ok(IdentificationReport {
        piece_ids,
        iterates,
        tail_revealed,
        certificates,
        value_gate_active: problem.reference().is_some(),
    })
}

/// Decide whether `piece` contains `(c(x_bar), v)` for some multiplier `v`.
///
/// Box pieces are certified exactly: the multiplier search restricted to the
/// piece is a convex QP over the intersection of the piece's `v`-section with
/// the subdifferential box. Non-polyhedral pieces use a projection-based
/// alternating search and flag the verdict as best effort when negative.
pub fn certify_piece(
    problem: &CompositeProblem,
    piece: &GraphPiece,
    x_bar: &[f64],
) -> Result<PieceCertificate, IdentifyError> {
    let c_bar = problem.map().eval(x_bar)?;
    let jac = problem.map().jacobian(x_bar)?;
    let m = problem.output_dim();
    if problem.outer().value_with_tol(&c_bar, ACTIVE_TOL)?.is_infinite() {
        return Err(IdentifyError::InfeasibleReference);
    }

    if let Some(region) = piece.box_region() {
        let sub_box = match problem.outer().subdiff_box(&c_bar) {
            Ok(Some(b)) => Some(b),
            Ok(None) => None,
            Err(OuterError::EmptySubdifferential) => {
                return Err(IdentifyError::InfeasibleReference)
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(sub_box) = sub_box {
            return certify_box_piece(piece, &region, &sub_box, &c_bar, &jac);
        }
    }
    certify_best_effort(problem, piece, &c_bar, &jac, m)
}

fn certify_box_piece(
    piece: &GraphPiece,
    region: &BoxRegion,
    sub_box: &BoxRegion,
    c_bar: &[f64],
    jac: &Matrix,
) -> Result<PieceCertificate, IdentifyError> {
    let m = c_bar.len();
    let c_intervals = &region.intervals[..m];
    let v_intervals = &region.intervals[m..];

    let c_contained = c_intervals
        .iter()
        .zip(c_bar)
        .all(|(iv, &ci)| iv.contains(ci, ACTIVE_TOL));

    // feasible multiplier directions inside the piece's v-section
    let mut feasible: Option<Vec<crate::graph::Interval>> = Some(Vec::with_capacity(m));
    for (piece_iv, sub_iv) in v_intervals.iter().zip(&sub_box.intervals) {
        match piece_iv.intersect(sub_iv) {
            Some(iv) => {
                if let Some(list) = feasible.as_mut() {
                    list.push(iv)
                }
            }
            None => {
                feasible = None;
                break;
            }
        }
    }

    if c_contained {
        if let Some(intervals) = &feasible {
            // min |J^T v|^2 over the feasible box
            let h = {
                let jt = jac.transpose();
                jac.matmul(&jt)
            };
            let mut eq_rows = Vec::new();
            let mut eq_rhs = Vec::new();
            let mut in_rows = Vec::new();
            let mut in_rhs = Vec::new();
            for (i, iv) in intervals.iter().enumerate() {
                let unit = |sign: f64| {
                    let mut r = vec![0.0; m];
                    r[i] = sign;
                    r
                };
                if iv.lo == iv.hi {
                    eq_rows.push(unit(1.0));
                    eq_rhs.push(iv.lo);
                } else {
                    if iv.hi.is_finite() {
                        in_rows.push(unit(1.0));
                        in_rhs.push(iv.hi);
                    }
                    if iv.lo.is_finite() {
                        in_rows.push(unit(-1.0));
                        in_rhs.push(-iv.lo);
                    }
                }
            }
            let qp = QpProblem {
                h,
                g: vec![0.0; m],
                a_eq: if eq_rows.is_empty() {
                    Matrix::zeros(0, m)
                } else {
                    Matrix::from_rows(&eq_rows)
                },
                b_eq: eq_rhs,
                a_in: if in_rows.is_empty() {
                    Matrix::zeros(0, m)
                } else {
                    Matrix::from_rows(&in_rows)
                },
                b_in: in_rhs,
            };
            match solve_qp(&qp) {
                Ok(sol) => {
                    let value = {
                        let r = jac.tr_matvec(&sol.d);
                        dot(&r, &r)
                    };
                    if value <= SUFFICIENCY_TOL * SUFFICIENCY_TOL {
                        return Ok(PieceCertificate {
                            piece_id: piece.id().to_string(),
                            actively_sufficient: true,
                            witness: Some(sol.d),
                            margin: None,
                            best_effort: false,
                        });
                    }
                }
                Err(QpError::Infeasible { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    // insufficient: measure the separation from the multiplier set
    let margin = multiplier_separation_qp(piece, region, sub_box, c_bar, jac)?;
    Ok(PieceCertificate {
        piece_id: piece.id().to_string(),
        actively_sufficient: false,
        witness: None,
        margin,
        best_effort: false,
    })
}

/// `min dist((c_bar, v), piece)` over multipliers `v`, as one convex QP in
/// `(v, z)` with `z` ranging over the piece box. `None` when the problem has
/// no multipliers at all.
fn multiplier_separation_qp(
    _piece: &GraphPiece,
    region: &BoxRegion,
    sub_box: &BoxRegion,
    c_bar: &[f64],
    jac: &Matrix,
) -> Result<Option<f64>, IdentifyError> {
    let m = c_bar.len();
    let nz = 3 * m; // v, then z = (z_c, z_v)
    let mut h = Matrix::zeros(nz, nz);
    let mut g = vec![0.0; nz];
    // |c_bar - z_c|^2 + |v - z_v|^2
    for i in 0..m {
        let zc = m + i;
        h[(zc, zc)] = 2.0;
        g[zc] = -2.0 * c_bar[i];
        let (vi, zv) = (i, 2 * m + i);
        h[(vi, vi)] = 2.0;
        h[(zv, zv)] = 2.0;
        h[(vi, zv)] = -2.0;
        h[(zv, vi)] = -2.0;
    }

    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut in_rows = Vec::new();
    let mut in_rhs = Vec::new();
    // stationarity: J^T v = 0
    for col in 0..jac.ncols() {
        let mut row = vec![0.0; nz];
        for i in 0..m {
            row[i] = jac[(i, col)];
        }
        eq_rows.push(row);
        eq_rhs.push(0.0);
    }
    // v in the subdifferential box
    for (i, iv) in sub_box.intervals.iter().enumerate() {
        push_interval_rows(&mut eq_rows, &mut eq_rhs, &mut in_rows, &mut in_rhs, nz, i, iv);
    }
    // z in the piece box
    for (off, iv) in region.intervals.iter().enumerate() {
        push_interval_rows(
            &mut eq_rows,
            &mut eq_rhs,
            &mut in_rows,
            &mut in_rhs,
            nz,
            m + off,
            iv,
        );
    }

    let qp = QpProblem {
        h,
        g,
        a_eq: if eq_rows.is_empty() {
            Matrix::zeros(0, nz)
        } else {
            Matrix::from_rows(&eq_rows)
        },
        b_eq: eq_rhs,
        a_in: if in_rows.is_empty() {
            Matrix::zeros(0, nz)
        } else {
            Matrix::from_rows(&in_rows)
        },
        b_in: in_rhs,
    };
    match solve_qp(&qp) {
        Ok(sol) => {
            let cc: f64 = dot(c_bar, c_bar);
            let val = qp.objective(&sol.d) + cc;
            Ok(Some(sqrt(val.max(0.0))))
        }
        Err(QpError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn push_interval_rows(
    eq_rows: &mut Vec<Vec<f64>>,
    eq_rhs: &mut Vec<f64>,
    in_rows: &mut Vec<Vec<f64>>,
    in_rhs: &mut Vec<f64>,
    nz: usize,
    coord: usize,
    iv: &crate::graph::Interval,
) {
    let unit = |sign: f64| {
        let mut r = vec![0.0; nz];
        r[coord] = sign;
        r
    };
    if iv.lo == iv.hi {
        eq_rows.push(unit(1.0));
        eq_rhs.push(iv.lo);
    } else {
        if iv.hi.is_finite() {
            in_rows.push(unit(1.0));
            in_rhs.push(iv.hi);
        }
        if iv.lo.is_finite() {
            in_rows.push(unit(-1.0));
            in_rhs.push(-iv.lo);
        }
    }
}

/// Alternating-projection witness search for non-polyhedral pieces.
fn certify_best_effort(
    problem: &CompositeProblem,
    piece: &GraphPiece,
    c_bar: &[f64],
    jac: &Matrix,
    m: usize,
) -> Result<PieceCertificate, IdentifyError> {
    // orthonormal basis of {v : J^T v = 0}
    let jt = jac.transpose(); // n x m
    let nullbasis = PivotedQr::nullspace_of(&jt); // m x k

    let project_multiplier = |v0: &[f64]| -> Result<Vec<f64>, IdentifyError> {
        // alternating projections between subdiff h(c_bar) and null(J^T)
        let mut v = v0.to_vec();
        for _ in 0..120 {
            let a = problem.outer().project_subdiff(c_bar, &v)?;
            let coeffs = nullbasis.tr_matvec(&a);
            let b = nullbasis.matvec(&coeffs);
            if norm2(&sub(&a, &b)) <= 1e-12 {
                return Ok(b);
            }
            v = b;
        }
        Ok(v)
    };

    let mut v = project_multiplier(&vec![0.0; m])?;
    let mut gap = f64::INFINITY;
    for _ in 0..200 {
        let mut pair = c_bar.to_vec();
        pair.extend_from_slice(&v);
        let proj = match piece.project(&pair) {
            Ok(pt) => pt,
            Err(GraphError::OffGraphQuery(_)) => break,
            Err(e) => return Err(e.into()),
        };
        let new_gap = norm2(&sub(&pair, &proj));
        v = project_multiplier(&proj[m..])?;
        if (gap - new_gap).abs() <= 1e-14 {
            gap = new_gap;
            break;
        }
        gap = new_gap;
    }

    // verify the candidate
    let mut pair = c_bar.to_vec();
    pair.extend_from_slice(&v);
    let resid = norm2(&jac.tr_matvec(&v));
    let member = problem.outer().subdiff_membership(c_bar, &v, MEMBERSHIP_TOL)?;
    let dist = piece.distance(&pair).unwrap_or(f64::INFINITY);
    if member && resid <= SUFFICIENCY_TOL && dist <= SUFFICIENCY_TOL {
        return Ok(PieceCertificate {
            piece_id: piece.id().to_string(),
            actively_sufficient: true,
            witness: Some(v),
            margin: None,
            best_effort: false,
        });
    }
    Ok(PieceCertificate {
        piece_id: piece.id().to_string(),
        actively_sufficient: false,
        witness: None,
        margin: if gap.is_finite() { Some(gap) } else { None },
        best_effort: true,
    })
}

/// Componentwise truncation: keep `q_i` when `q_i < -delta`, else zero.
pub fn q_delta(q: &[f64], delta: f64) -> Vec<f64> {
    assert!(delta >= 0.0, "delta must be nonnegative");
    q.iter()
        .map(|&qi| if qi < -delta { qi } else { 0.0 })
        .collect()
}

/// `J(r) = { j : q_lin_j >= -eps_r }` with 1-based indices.
pub fn nlp_index_set(q_lin: &[f64], eps_r: f64) -> Vec<usize> {
    assert!(eps_r > 0.0, "index-set tolerance must be positive");
    q_lin
        .iter()
        .enumerate()
        .filter(|(_, &qj)| qj >= -eps_r)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Verdict on an index set `J` for the NLP encoding.
#[derive(Clone, Debug)]
pub struct SufficientIndexVerdict {
    pub j_set: Vec<usize>,
    /// Whether `J` is contained in the active set at the reference point.
    pub contained_in_active: bool,
    /// The minimum squared stationarity residual over multipliers
    /// supported on `J`.
    pub multiplier_value: f64,
    pub sufficient: bool,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

/// NLP gradient data split out of a composite problem at a point.
struct NlpGradients {
    grad_f: Vec<f64>,
    grad_p: Matrix,
    grad_q: Matrix,
    p_vals: Vec<f64>,
    q_vals: Vec<f64>,
}

fn nlp_gradients(problem: &CompositeProblem, x: &[f64]) -> Result<NlpGradients, IdentifyError> {
    let data = problem
        .outer()
        .nlp_data()
        .ok_or_else(|| IdentifyError::UnsupportedKind(problem.outer().name()))?;
    let c = problem.map().eval(x)?;
    let jac = problem.map().jacobian(x)?;
    let n = jac.ncols();
    let grad_f = jac.row(0).to_vec();
    let grad_p = Matrix::from_fn(data.s, n, |i, j| jac[(1 + i, j)]);
    let grad_q = Matrix::from_fn(data.t, n, |i, j| jac[(1 + data.s + i, j)]);
    Ok(NlpGradients {
        grad_f,
        grad_p,
        grad_q,
        p_vals: c[1..1 + data.s].to_vec(),
        q_vals: c[1 + data.s..].to_vec(),
    })
}

fn check_feasible(g: &NlpGradients) -> Result<(), IdentifyError> {
    if g.p_vals.iter().any(|p| p.abs() > ACTIVE_TOL)
        || g.q_vals.iter().any(|&q| q > ACTIVE_TOL)
    {
        return Err(IdentifyError::InfeasibleReference);
    }
    Ok(())
}

fn active_set(q_vals: &[f64]) -> Vec<usize> {
    q_vals
        .iter()
        .enumerate()
        .filter(|(_, &qj)| qj >= -ACTIVE_TOL)
        .map(|(j, _)| j + 1)
        .collect()
}

/// Decide whether an index set is sufficient at the reference point:
/// `J` must be contained in the active set and admit multipliers supported
/// on `J` with stationarity residual at most `tol`.
pub fn certify_sufficient_index(
    problem: &CompositeProblem,
    j_set: &[usize],
    tol: f64,
) -> Result<SufficientIndexVerdict, IdentifyError> {
    let x_bar = problem
        .reference()
        .ok_or(IdentifyError::MissingReference)?
        .to_vec();
    let g = nlp_gradients(problem, &x_bar)?;
    check_feasible(&g)?;
    let j_bar = active_set(&g.q_vals);
    let contained = j_set.iter().all(|j| j_bar.contains(j));
    let mn = min_norm_stationarity(&g.grad_f, &g.grad_p, &g.grad_q, j_set)?;
    Ok(SufficientIndexVerdict {
        j_set: j_set.to_vec(),
        contained_in_active: contained,
        multiplier_value: mn.value,
        sufficient: contained && mn.value <= tol * tol,
        lambda: mn.lambda,
        mu: mn.mu,
    })
}

/// The transversality condition at `x_bar`:
/// `horizon subdiff h(c(x_bar))` meets `null(grad c(x_bar)^*)` only at zero.
pub fn check_transversality(
    problem: &CompositeProblem,
    x_bar: &[f64],
) -> Result<bool, IdentifyError> {
    let c_bar = problem.map().eval(x_bar)?;
    match problem.outer().horizon(&c_bar) {
        Err(OuterError::InfiniteValue) => Err(IdentifyError::InfeasibleReference),
        Err(e) => Err(e.into()),
        Ok(HorizonCone::Trivial) => Ok(true),
        Ok(HorizonCone::NonnegBoundary) => {
            // cone (-inf, 0] in R^1: only v = 0 maps to zero iff grad != 0
            let jac = problem.map().jacobian(x_bar)?;
            Ok(norm2(jac.row(0)) > ACTIVE_TOL)
        }
        Ok(HorizonCone::Nlp { active, .. }) => {
            let g = nlp_gradients(problem, x_bar)?;
            let grad_q_active = Matrix::from_fn(active.len(), g.grad_q.ncols(), |i, j| {
                g.grad_q[(active[i] - 1, j)]
            });
            Ok(lp_feasibility_bounded(&g.grad_p, &grad_q_active)?)
        }
    }
}

/// Enumerate the vertices of the multiplier polytope
/// `{(lambda, mu) : stationarity holds, mu >= 0 supported on the active set}`
/// for the NLP encoding, returned as full vectors `(1, lambda, mu)`.
///
/// Requires the constraint qualification; without it the set may be
/// unbounded and enumeration is refused.
pub fn multiplier_set_vertices(
    problem: &CompositeProblem,
    x_bar: &[f64],
) -> Result<Vec<Vec<f64>>, IdentifyError> {
    let data = problem
        .outer()
        .nlp_data()
        .ok_or_else(|| IdentifyError::UnsupportedKind(problem.outer().name()))?;
    let g = nlp_gradients(problem, x_bar)?;
    check_feasible(&g)?;
    if !check_transversality(problem, x_bar)? {
        return Err(IdentifyError::UnboundedMultiplierSet);
    }
    let j_bar = active_set(&g.q_vals);
    let n = g.grad_f.len();
    let scale = 1.0 + norm2(&g.grad_f);

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    // enumerate supports S within the active set
    for mask in 0..(1usize << j_bar.len()) {
        let support: Vec<usize> = j_bar
            .iter()
            .enumerate()
            .filter(|(slot, _)| mask & (1 << slot) != 0)
            .map(|(_, &j)| j)
            .collect();
        let ncols = data.s + support.len();
        let cols = Matrix::from_fn(n, ncols, |i, j| {
            if j < data.s {
                g.grad_p[(j, i)]
            } else {
                g.grad_q[(support[j - data.s] - 1, i)]
            }
        });
        let neg_f: Vec<f64> = g.grad_f.iter().map(|x| -x).collect();
        if ncols == 0 {
            if norm2(&neg_f) <= ACTIVE_TOL * scale {
                push_vertex(&mut vertices, data, &[], &[], &[]);
            }
            continue;
        }
        let qr = PivotedQr::new(&cols);
        if qr.rank() < ncols {
            continue; // not a basis: solution not unique
        }
        let z = qr.solve_lstsq(&neg_f);
        let resid = norm2(&sub(&cols.matvec(&z), &neg_f));
        if resid > ACTIVE_TOL * scale {
            continue;
        }
        let mu_s = &z[data.s..];
        if mu_s.iter().any(|&mj| mj < -1e-9) {
            continue;
        }
        push_vertex(&mut vertices, data, &z[..data.s], &support, mu_s);
    }

    vertices.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            match x.partial_cmp(y) {
                Some(core::cmp::Ordering::Equal) | None => continue,
                Some(ord) => return ord,
            }
        }
        core::cmp::Ordering::Equal
    });
    Ok(vertices)
}

fn push_vertex(
    vertices: &mut Vec<Vec<f64>>,
    data: crate::outer::NlpData,
    lambda: &[f64],
    support: &[usize],
    mu_s: &[f64],
) {
    let mut v = vec![0.0; 1 + data.s + data.t];
    v[0] = 1.0;
    v[1..1 + data.s].copy_from_slice(lambda);
    for (slot, &j) in support.iter().enumerate() {
        v[data.s + j] = mu_s[slot].max(0.0);
    }
    if !vertices.iter().any(|u| norm_inf(&sub(u, &v)) <= 1e-9) {
        vertices.push(v);
    }
}

#[derive(Clone, Debug)]
pub struct ManifoldReveal {
    pub per_iterate: Vec<bool>,
    /// All iterates of the tail window lie on the manifold.
    pub tail_identified: bool,
}

/// For catalog functions with a designated identification manifold, check
/// whether the linearized points lie on it.
pub fn manifold_reveal(
    problem: &CompositeProblem,
    records: &[IterateRecord],
    tail_window: usize,
    tol: f64,
) -> Result<ManifoldReveal, IdentifyError> {
    let per_iterate: Vec<bool> = records
        .iter()
        .map(|r| {
            problem
                .outer()
                .manifold_membership(&r.c_hat, tol)
                .ok_or_else(|| IdentifyError::UnsupportedKind(problem.outer().name()))
        })
        .collect::<Result<_, _>>()?;
    let tail = tail_window.min(per_iterate.len());
    let tail_identified = tail > 0 && per_iterate[per_iterate.len() - tail..].iter().all(|&b| b);
    Ok(ManifoldReveal {
        per_iterate,
        tail_identified,
    })
}
