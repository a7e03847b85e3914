//! The proximal linearized subproblem
//! `min_d h(c(x) + grad c(x) d) + (mu/2) |d|^2`
//! for the convex catalog kinds, with multiplier recovery from the
//! subproblem duals.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, norm2, sub, Matrix};
use crate::map::MapError;
use crate::outer::{OuterError, OuterKind};
use crate::problem::CompositeProblem;
use crate::qp::{solve_qp, QpError, QpProblem};

#[derive(Clone, Debug, PartialEq)]
pub enum ProxError {
    NonPositiveMu,
    /// Subproblem not defined for this outer kind (nonconvex or matrix case).
    UnsupportedKind(String),
    /// Linearized constraints are inconsistent; the l1 exact-penalty
    /// formulation of the same program always has a feasible subproblem.
    InfeasibleLinearization { max_violation: f64 },
    Map(MapError),
    Outer(OuterError),
    Qp(QpError),
    EmptySchedule,
    DimensionMismatch { expected: usize, got: usize },
}

impl core::fmt::Display for ProxError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ProxError::NonPositiveMu => write!(f, "proximal parameter must be positive"),
            ProxError::UnsupportedKind(k) => {
                write!(f, "prox-linear subproblem unsupported for outer kind {k}")
            }
            ProxError::InfeasibleLinearization { max_violation } => write!(
                f,
                "linearized constraints are infeasible (violation {max_violation:.3e}); \
                 consider the l1 exact-penalty formulation"
            ),
            ProxError::Map(e) => write!(f, "{e}"),
            ProxError::Outer(e) => write!(f, "{e}"),
            ProxError::Qp(e) => write!(f, "{e}"),
            ProxError::EmptySchedule => write!(f, "schedule is empty"),
            ProxError::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} coordinates, got {got}")
            }
        }
    }
}

impl core::error::Error for ProxError {}

impl From<MapError> for ProxError {
    fn from(e: MapError) -> Self {
        ProxError::Map(e)
    }
}

impl From<OuterError> for ProxError {
    fn from(e: OuterError) -> Self {
        ProxError::Outer(e)
    }
}

/// One solved subproblem instance.
#[derive(Clone, Debug)]
pub struct ProxStep {
    pub x: Vec<f64>,
    pub mu_prox: f64,
    pub d: Vec<f64>,
    /// `c(x) + grad c(x) d`.
    pub c_hat: Vec<f64>,
    /// Recovered multiplier with `v in subdiff h(c_hat)` and
    /// `grad c(x)^* v + mu d = 0`.
    pub v: Vec<f64>,
    /// `|grad c(x)^* v + mu d|`.
    pub stationarity_residual: f64,
    pub h_value_at_chat: f64,
    /// `|d| / |x - reference|` when the problem has a reference point.
    pub ratio_to_reference: Option<f64>,
}

impl ProxStep {
    pub fn step_norm(&self) -> f64 {
        norm2(&self.d)
    }
}

/// Per-coordinate structure of the subproblem objective.
enum CoordTerm {
    /// `weight * c_lin` added to the objective.
    Linear(f64),
    /// `weight * |c_lin|`, split into nonnegative slacks.
    Abs(f64),
    /// `weight * max(c_lin, 0)` via one slack.
    Pos(f64),
    /// Hard constraint `c_lin = 0`.
    EqZero,
    /// Hard constraint `c_lin <= 0`.
    LeqZero,
    /// Hard constraint `c_lin >= 0`.
    GeqZero,
}

fn coordinate_terms(kind: &OuterKind) -> Option<Vec<CoordTerm>> {
    match kind {
        OuterKind::IndicatorNonneg => Some(vec![CoordTerm::GeqZero]),
        OuterKind::Abs => Some(vec![CoordTerm::Abs(1.0)]),
        OuterKind::Pos => Some(vec![CoordTerm::Pos(1.0)]),
        OuterKind::L1Two => Some(vec![CoordTerm::Abs(1.0), CoordTerm::Pos(1.0)]),
        OuterKind::Nlp { s, t } => {
            let mut terms = vec![CoordTerm::Linear(1.0)];
            terms.extend((0..*s).map(|_| CoordTerm::EqZero));
            terms.extend((0..*t).map(|_| CoordTerm::LeqZero));
            Some(terms)
        }
        OuterKind::L1ExactPenalty { s, t, nu } => {
            let mut terms = vec![CoordTerm::Linear(1.0)];
            terms.extend((0..*s).map(|_| CoordTerm::Abs(*nu)));
            terms.extend((0..*t).map(|_| CoordTerm::Pos(*nu)));
            Some(terms)
        }
        _ => None,
    }
}

/// Solve the subproblem at `x` with proximal parameter `mu_prox > 0`.
///
/// Supported kinds are the convex catalog entries: the NLP encoding (a QP
/// with hard linearized constraints), the scalar and l1-type kinds (QPs
/// after slack splitting), and the Euclidean norm (a scalar dual search).
/// The nonconvex exponential penalty and the max-eigenvalue function are
/// rejected.
pub fn solve_prox_subproblem(
    problem: &CompositeProblem,
    x: &[f64],
    mu_prox: f64,
) -> Result<ProxStep, ProxError> {
    if !(mu_prox > 0.0) {
        return Err(ProxError::NonPositiveMu);
    }
    if x.len() != problem.input_dim() {
        return Err(ProxError::DimensionMismatch {
            expected: problem.input_dim(),
            got: x.len(),
        });
    }
    let c = problem.map().eval(x)?;
    let jac = problem.map().jacobian(x)?;

    let (d, v) = match problem.outer().kind() {
        OuterKind::EuclidNorm { .. } => euclid_norm_step(&c, &jac, mu_prox),
        kind => match coordinate_terms(kind) {
            None => {
                return Err(ProxError::UnsupportedKind(problem.outer().name()));
            }
            Some(terms) => split_qp_step(&c, &jac, mu_prox, &terms, kind)?,
        },
    };

    finish_step(problem, x, &c, &jac, mu_prox, d, v)
}

fn finish_step(
    problem: &CompositeProblem,
    x: &[f64],
    c: &[f64],
    jac: &Matrix,
    mu_prox: f64,
    d: Vec<f64>,
    v: Vec<f64>,
) -> Result<ProxStep, ProxError> {
    let mut c_hat = c.to_vec();
    let jd = jac.matvec(&d);
    axpy(1.0, &jd, &mut c_hat);

    let mut stat = jac.tr_matvec(&v);
    axpy(mu_prox, &d, &mut stat);

    let h_value_at_chat = problem.outer().value_with_tol(&c_hat, 1e-9)?;
    let ratio_to_reference = problem.reference().and_then(|r| {
        let gap = norm2(&sub(x, r));
        if gap > 0.0 {
            Some(norm2(&d) / gap)
        } else {
            None
        }
    });

    Ok(ProxStep {
        x: x.to_vec(),
        mu_prox,
        d,
        c_hat,
        v,
        stationarity_residual: norm2(&stat),
        h_value_at_chat,
        ratio_to_reference,
    })
}

/// Assemble and solve the slack-split QP; returns `(d, v)`.
fn split_qp_step(
    c: &[f64],
    jac: &Matrix,
    mu_prox: f64,
    terms: &[CoordTerm],
    kind: &OuterKind,
) -> Result<(Vec<f64>, Vec<f64>), ProxError> {
    let n = jac.ncols();
    let m = terms.len();
    debug_assert_eq!(c.len(), m);

    // variable layout: d, then per-coordinate slacks
    let mut nz = n;
    let mut slack_at = vec![usize::MAX; m];
    for (i, term) in terms.iter().enumerate() {
        match term {
            CoordTerm::Abs(_) => {
                slack_at[i] = nz;
                nz += 2; // a+, a-
            }
            CoordTerm::Pos(_) => {
                slack_at[i] = nz;
                nz += 1; // b
            }
            _ => {}
        }
    }

    let h = Matrix::from_fn(nz, nz, |i, j| {
        if i == j && i < n {
            mu_prox
        } else {
            0.0
        }
    });
    let mut g = vec![0.0; nz];
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    let mut eq_rhs: Vec<f64> = Vec::new();
    let mut in_rows: Vec<Vec<f64>> = Vec::new();
    let mut in_rhs: Vec<f64> = Vec::new();
    // which dual recovers v_i: (equality row, +) | (inequality row, sign)
    enum DualRef {
        Fixed(f64),
        Eq(usize),
        In(usize, f64),
    }
    let mut dual_refs: Vec<DualRef> = Vec::with_capacity(m);

    for (i, term) in terms.iter().enumerate() {
        let gi = jac.row(i);
        match term {
            CoordTerm::Linear(w) => {
                for j in 0..n {
                    g[j] += w * gi[j];
                }
                dual_refs.push(DualRef::Fixed(*w));
            }
            CoordTerm::Abs(w) => {
                let sa = slack_at[i];
                // c_lin - a+ + a- = 0
                let mut row = vec![0.0; nz];
                row[..n].copy_from_slice(gi);
                row[sa] = -1.0;
                row[sa + 1] = 1.0;
                eq_rows.push(row);
                eq_rhs.push(-c[i]);
                g[sa] += w;
                g[sa + 1] += w;
                // a+, a- >= 0
                for off in 0..2 {
                    let mut r = vec![0.0; nz];
                    r[sa + off] = -1.0;
                    in_rows.push(r);
                    in_rhs.push(0.0);
                }
                dual_refs.push(DualRef::Eq(eq_rows.len() - 1));
            }
            CoordTerm::Pos(w) => {
                let sb = slack_at[i];
                // c_lin - b <= 0
                let mut row = vec![0.0; nz];
                row[..n].copy_from_slice(gi);
                row[sb] = -1.0;
                in_rows.push(row);
                in_rhs.push(-c[i]);
                let pos_row = in_rows.len() - 1;
                // b >= 0
                let mut r = vec![0.0; nz];
                r[sb] = -1.0;
                in_rows.push(r);
                in_rhs.push(0.0);
                g[sb] += w;
                dual_refs.push(DualRef::In(pos_row, 1.0));
            }
            CoordTerm::EqZero => {
                let mut row = vec![0.0; nz];
                row[..n].copy_from_slice(gi);
                eq_rows.push(row);
                eq_rhs.push(-c[i]);
                dual_refs.push(DualRef::Eq(eq_rows.len() - 1));
            }
            CoordTerm::LeqZero => {
                let mut row = vec![0.0; nz];
                row[..n].copy_from_slice(gi);
                in_rows.push(row);
                in_rhs.push(-c[i]);
                dual_refs.push(DualRef::In(in_rows.len() - 1, 1.0));
            }
            CoordTerm::GeqZero => {
                let mut row = vec![0.0; nz];
                for j in 0..n {
                    row[j] = -gi[j];
                }
                in_rows.push(row);
                in_rhs.push(c[i]);
                dual_refs.push(DualRef::In(in_rows.len() - 1, -1.0));
            }
        }
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

    let sol = solve_qp(&qp).map_err(|e| match e {
        QpError::Infeasible { max_violation, .. }
            if matches!(kind, OuterKind::Nlp { .. } | OuterKind::IndicatorNonneg) =>
        {
            ProxError::InfeasibleLinearization { max_violation }
        }
        other => ProxError::Qp(other),
    })?;

    let v: Vec<f64> = dual_refs
        .iter()
        .map(|r| match r {
            DualRef::Fixed(w) => *w,
            DualRef::Eq(row) => sol.lambda_eq[*row],
            DualRef::In(row, sign) => sign * sol.mu_in[*row],
        })
        .collect();
    Ok((sol.d[..n].to_vec(), v))
}

/// Specialized solver for `min |c + G d| + (mu/2)|d|^2`.
///
/// For a solution with `|c_hat| = s > 0` the optimality condition collapses
/// to the linear system `(mu s I + G^T G) d = -G^T c`, and the scalar
/// equation `|c + G d(s)| = s` is solved by bisection on `[0, |c|]` to
/// tolerance 1e-12. The root `s = 0` corresponds to the kink `c_hat = 0`,
/// where `d` is the least-norm solution of `G d = -c` and the dual lies in
/// the unit ball.
fn euclid_norm_step(c: &[f64], jac: &Matrix, mu_prox: f64) -> (Vec<f64>, Vec<f64>) {
    let n = jac.ncols();
    let m = jac.nrows();
    let c_norm = norm2(c);
    if c_norm <= 1e-15 {
        return (vec![0.0; n], vec![0.0; m]);
    }

    let gtg = jac.transpose().matmul(jac);
    let gtc = jac.tr_matvec(c);

    let d_of_s = |s: f64| -> Vec<f64> {
        if s <= 0.0 {
            // least-norm d with G d = -c (via the regularized limit)
            let reg = 1e-13 * (1.0 + gtg.max_abs());
            let a = Matrix::from_fn(n, n, |i, j| {
                gtg[(i, j)] + if i == j { reg } else { 0.0 }
            });
            let neg = gtc.iter().map(|x| -x).collect::<Vec<f64>>();
            crate::linalg::lstsq(&a, &neg).0
        } else {
            let a = Matrix::from_fn(n, n, |i, j| {
                gtg[(i, j)] + if i == j { mu_prox * s } else { 0.0 }
            });
            let neg = gtc.iter().map(|x| -x).collect::<Vec<f64>>();
            crate::linalg::lstsq(&a, &neg).0
        }
    };
    let chat_of = |d: &[f64]| -> Vec<f64> {
        let mut ch = c.to_vec();
        axpy(1.0, &jac.matvec(d), &mut ch);
        ch
    };
    let psi = |s: f64| -> f64 { norm2(&chat_of(&d_of_s(s))) - s };

    // kink candidate c_hat = 0: valid only when the least-norm dual with
    // G^T v = -mu d stays in the unit ball
    if psi(0.0) <= 1e-12 * (1.0 + c_norm) {
        let d0 = d_of_s(0.0);
        let neg_mu_d: Vec<f64> = d0.iter().map(|x| -mu_prox * x).collect();
        // minimum-norm dual: v = G z with G^T G z = -mu d
        let (z, _) = crate::linalg::lstsq(&gtg, &neg_mu_d);
        let v0 = jac.matvec(&z);
        if norm2(&v0) <= 1.0 + 1e-9 {
            return (d0, v0);
        }
    }

    // smooth root |c_hat(s)| = s with s > 0: bracket a positive value of psi
    let mut lo = 0.0;
    let mut probe = 1e-12 * (1.0 + c_norm);
    while probe < c_norm && psi(probe) <= 0.0 {
        probe *= 4.0;
    }
    if probe < c_norm {
        lo = probe / 4.0;
    }
    let mut hi = c_norm;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * (1.0 + c_norm) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if psi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let d = d_of_s(s);
    let ch = chat_of(&d);
    let cn = norm2(&ch);
    let v = if cn > 0.0 {
        ch.iter().map(|x| x / cn).collect()
    } else {
        vec![0.0; m]
    };
    (d, v)
}

/// How base points are generated along a run.
#[derive(Clone, Debug)]
pub enum Schedule {
    /// Explicit iterates.
    Points(Vec<Vec<f64>>),
    /// `x_r = base + eps_r * direction` with `eps_r = eps0 * shrink^r`.
    Radial {
        base: Vec<f64>,
        direction: Vec<f64>,
        eps0: f64,
        shrink: f64,
        steps: usize,
    },
}

impl Schedule {
    pub fn len(&self) -> usize {
        match self {
            Schedule::Points(p) => p.len(),
            Schedule::Radial { steps, .. } => *steps,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, r: usize) -> Vec<f64> {
        match self {
            Schedule::Points(p) => p[r].clone(),
            Schedule::Radial {
                base,
                direction,
                eps0,
                shrink,
                ..
            } => {
                let eps = eps0 * crate::fmath::powi(*shrink, r as i32);
                let mut x = base.clone();
                axpy(eps, direction, &mut x);
                x
            }
        }
    }

    /// The shrink parameter `eps_r` when the schedule defines one.
    pub fn eps(&self, r: usize) -> Option<f64> {
        match self {
            Schedule::Points(_) => None,
            Schedule::Radial { eps0, shrink, .. } => {
                Some(eps0 * crate::fmath::powi(*shrink, r as i32))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum MuSchedule {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl MuSchedule {
    pub fn at(&self, r: usize) -> f64 {
        match self {
            MuSchedule::Constant(m) => *m,
            MuSchedule::PerStep(v) => v[r.min(v.len().saturating_sub(1))],
        }
    }
}

/// A solved sequence of subproblems.
#[derive(Clone, Debug)]
pub struct ProxRun {
    pub steps: Vec<ProxStep>,
    /// `eps_r` when the schedule defines it, else `|x_r - reference|`.
    pub eps: Vec<Option<f64>>,
    /// Set when `mu_r |x_r - reference|` fails to be nonincreasing; the
    /// identification guarantee needs this product to tend to zero.
    pub hypothesis_warning: bool,
}

/// Run the subproblem along a schedule. Steps are independent given the
/// schedule; errors from any solve abort the run.
pub fn run_prox_sequence(
    problem: &CompositeProblem,
    schedule: &Schedule,
    mu: &MuSchedule,
) -> Result<ProxRun, ProxError> {
    let mut steps = Vec::with_capacity(schedule.len());
    let mut eps = Vec::with_capacity(schedule.len());
    let mut gaps: Vec<f64> = Vec::new();

    for r in 0..schedule.len() {
        let x = schedule.point(r);
        let mu_r = mu.at(r);
        let step = solve_prox_subproblem(problem, &x, mu_r)?;
        eps.push(schedule.eps(r).or_else(|| {
            problem.reference().map(|xb| norm2(&sub(&x, xb)))
        }));
        if let Some(xb) = problem.reference() {
            gaps.push(mu_r * norm2(&sub(&x, xb)));
        }
        steps.push(step);
    }

    let hypothesis_warning = gaps.windows(2).any(|w| w[1] > w[0] + 1e-15);
    Ok(ProxRun {
        steps,
        eps,
        hypothesis_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::ExprMap;
    use crate::outer::OuterFunction;
    use crate::problem::CompositeProblem;
    use alloc::boxed::Box;
    use approx::assert_abs_diff_eq;

    fn two_circle() -> CompositeProblem {
        let map = ExprMap::parse(&["-x1", "x1^2+x2^2-1", "(x1+1)^2+x2^2-4"], 2).unwrap();
        CompositeProblem::new(
            Box::new(map),
            OuterFunction::nlp(0, 2),
            Some(vec![1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn two_circle_step_at_099() {
        let p = two_circle();
        let step = solve_prox_subproblem(&p, &[0.99, 0.0], 1.0).unwrap();
        // derived from the active second constraint: d1 = 2/1.99 - 0.995
        let d1 = 2.0f64 / 1.99 - 0.995;
        assert_abs_diff_eq!(step.d[0], d1, epsilon = 1e-10);
        assert_abs_diff_eq!(step.d[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(step.c_hat[0], -0.99 - d1, epsilon = 1e-10);
        assert_abs_diff_eq!(step.c_hat[1], 0.99 * 0.99 - 1.0 + 1.98 * d1, epsilon = 1e-10);
        assert_abs_diff_eq!(step.c_hat[2], 0.0, epsilon = 1e-10);
        // multiplier v = (1, 0, (1 - d1)/3.98)
        assert_abs_diff_eq!(step.v[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(step.v[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(step.v[2], (1.0 - d1) / 3.98, epsilon = 1e-10);
        assert!(step.stationarity_residual <= 1e-10);
        // spec'd rounded values
        assert_abs_diff_eq!(step.d[0], 0.01002513, epsilon = 1e-8);
        assert_abs_diff_eq!(step.v[2], 0.248737, epsilon = 1e-6);
        assert_abs_diff_eq!(step.c_hat[1], -5.025e-5, epsilon = 1e-8);
        // membership of the recovered multiplier
        assert!(p
            .outer()
            .subdiff_membership(&step.c_hat, &step.v, 1e-8)
            .unwrap());
        // stationarity residual of the pair equals mu |d|
        let r = crate::problem::criticality_residual(&p, &[0.99, 0.0], &step.c_hat, &step.v)
            .unwrap();
        assert_abs_diff_eq!(r.stationarity, step.step_norm(), epsilon = 1e-10);
        assert_abs_diff_eq!(r.stationarity, 1.0025e-2, epsilon = 1e-6);
    }

    #[test]
    fn critical_point_is_fixed() {
        let p = two_circle();
        let step = solve_prox_subproblem(&p, &[1.0, 0.0], 1.0).unwrap();
        assert!(step.step_norm() <= 1e-10, "step norm {}", step.step_norm());
        assert!(step.stationarity_residual <= 1e-9);
    }

    #[test]
    fn scalar_abs_soft_threshold() {
        // h = |.|, c(x) = x, x = 0.3, mu = 1: d = -0.3 reaches c_hat = 0,
        // v = 0.3 satisfies v + mu d = 0 via grad c = 1
        let map = ExprMap::parse(&["x1"], 1).unwrap();
        let p = CompositeProblem::new(Box::new(map), OuterFunction::abs(), None).unwrap();
        let step = solve_prox_subproblem(&p, &[0.3], 1.0).unwrap();
        assert_abs_diff_eq!(step.d[0], -0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(step.c_hat[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(step.v[0], 0.3, epsilon = 1e-10);
        assert!(step.stationarity_residual <= 1e-10);
    }

    #[test]
    fn euclid_norm_matches_block_soft_threshold() {
        // c(x) = x (identity in R^2): prox of the norm has a closed form
        let map = ExprMap::parse(&["x1", "x2"], 2).unwrap();
        let p = CompositeProblem::new(Box::new(map), OuterFunction::euclid_norm(2), None).unwrap();
        for (x, mu) in [([3.0, 4.0], 1.0), ([0.3, 0.4], 1.0), ([3.0, 4.0], 0.1)] {
            let step = solve_prox_subproblem(&p, &x, mu).unwrap();
            let cn = norm2(&x);
            let expected: Vec<f64> = if cn <= 1.0 / mu {
                x.iter().map(|&xi| -xi).collect()
            } else {
                x.iter().map(|&xi| -xi / (mu * cn)).collect()
            };
            for i in 0..2 {
                assert_abs_diff_eq!(step.d[i], expected[i], epsilon = 1e-9);
            }
            assert!(step.stationarity_residual <= 1e-9);
            assert!(p
                .outer()
                .subdiff_membership(&step.c_hat, &step.v, 1e-8)
                .unwrap());
        }
    }

    #[test]
    fn l1_two_subproblem_duals_are_members() {
        let map = ExprMap::parse(&["x1+x2-1", "x1-x2"], 2).unwrap();
        let p = CompositeProblem::new(Box::new(map), OuterFunction::l1_two(), None).unwrap();
        let step = solve_prox_subproblem(&p, &[0.7, 0.2], 1.0).unwrap();
        assert!(step.stationarity_residual <= 1e-9);
        assert!(p
            .outer()
            .subdiff_membership(&step.c_hat, &step.v, 1e-8)
            .unwrap());
        // objective descent against the null step
        let c = p.map().eval(&[0.7, 0.2]).unwrap();
        let h0 = p.outer().value(&c).unwrap();
        let obj = step.h_value_at_chat + 0.5 * step.mu_prox * step.step_norm().powi(2);
        assert!(obj <= h0 + 1e-12);
    }

    #[test]
    fn l1_penalty_subproblem_always_feasible() {
        // infeasible linearization for the NLP kind errs with advice ...
        let map = ExprMap::parse(&["-x1", "x1-x1+1"], 1).unwrap(); // q(x) = 1 > 0 constant
        let p = CompositeProblem::new(Box::new(map), OuterFunction::nlp(0, 1), None).unwrap();
        assert!(matches!(
            solve_prox_subproblem(&p, &[0.0], 1.0),
            Err(ProxError::InfeasibleLinearization { .. })
        ));
        // ... while the penalty form of the same data solves fine
        let map = ExprMap::parse(&["-x1", "x1-x1+1"], 1).unwrap();
        let p = CompositeProblem::new(
            Box::new(map),
            OuterFunction::l1_exact_penalty(0, 1, 2.0),
            None,
        )
        .unwrap();
        let step = solve_prox_subproblem(&p, &[0.0], 1.0).unwrap();
        assert!(step.stationarity_residual <= 1e-9);
        assert!(p
            .outer()
            .subdiff_membership(&step.c_hat, &step.v, 1e-8)
            .unwrap());
    }

    #[test]
    fn nlp_equality_constraints_in_subproblem() {
        // min x1^2 s.t. x1 + x2 - 1 = 0, critical at (0, 1) with lambda = 0
        let map = ExprMap::parse(&["x1^2", "x1+x2-1"], 2).unwrap();
        let p = CompositeProblem::new(
            Box::new(map),
            OuterFunction::nlp(1, 0),
            Some(vec![0.0, 1.0]),
        )
        .unwrap();
        let step = solve_prox_subproblem(&p, &[0.1, 0.85], 1.0).unwrap();
        // the linearized equality holds at c_hat
        assert_abs_diff_eq!(step.c_hat[1], 0.0, epsilon = 1e-10);
        assert!(step.stationarity_residual <= 1e-9);
        assert!(p
            .outer()
            .subdiff_membership(&step.c_hat, &step.v, 1e-8)
            .unwrap());
        // at the critical point the step vanishes
        let fixed = solve_prox_subproblem(&p, &[0.0, 1.0], 1.0).unwrap();
        assert!(fixed.step_norm() <= 1e-10);
    }

    #[test]
    fn unsupported_kinds_rejected() {
        let map = ExprMap::parse(&["x1"], 1).unwrap();
        let p =
            CompositeProblem::new(Box::new(map), OuterFunction::exp_penalty(1.0), None).unwrap();
        assert!(matches!(
            solve_prox_subproblem(&p, &[0.5], 1.0),
            Err(ProxError::UnsupportedKind(_))
        ));
        let p2 = two_circle();
        assert!(matches!(
            solve_prox_subproblem(&p2, &[1.0, 0.0], 0.0),
            Err(ProxError::NonPositiveMu)
        ));
    }

    #[test]
    fn sequence_bounds_and_value_convergence() {
        let p = two_circle();
        let schedule = Schedule::Radial {
            base: vec![1.0, 0.0],
            direction: vec![-1.0, 0.0],
            eps0: 0.1,
            shrink: 0.5,
            steps: 16,
        };
        let run = run_prox_sequence(&p, &schedule, &MuSchedule::Constant(1.0)).unwrap();
        assert_eq!(run.steps.len(), 16);
        assert!(!run.hypothesis_warning);
        for (r, step) in run.steps.iter().enumerate() {
            let eps = 0.1 * 0.5f64.powi(r as i32);
            assert!(step.step_norm() <= 1.2 * eps, "r={r}");
            assert!((step.h_value_at_chat + 1.0).abs() <= 3.0 * eps, "r={r}");
            assert!(step.ratio_to_reference.unwrap() <= 1.2);
        }
    }

    #[test]
    fn empty_and_degenerate_schedules() {
        let p = two_circle();
        let run = run_prox_sequence(
            &p,
            &Schedule::Points(Vec::new()),
            &MuSchedule::Constant(1.0),
        )
        .unwrap();
        assert!(run.steps.is_empty());

        let run = run_prox_sequence(
            &p,
            &Schedule::Points(vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
            &MuSchedule::Constant(1.0),
        )
        .unwrap();
        for s in &run.steps {
            assert!(s.step_norm() <= 1e-10);
        }
    }

    #[test]
    fn warning_when_mu_gap_not_decreasing() {
        let p = two_circle();
        let schedule = Schedule::Points(vec![vec![0.99, 0.0], vec![0.9, 0.0]]);
        let run = run_prox_sequence(&p, &schedule, &MuSchedule::Constant(1.0)).unwrap();
        assert!(run.hypothesis_warning);
    }
}
