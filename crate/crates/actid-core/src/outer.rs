//! The catalog of outer functions `h`: values, subdifferential membership,
//! horizon cones, and canonical graph decompositions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath::exp;
use crate::graph::{
    product_decomposition, BoxRegion, CurveBranch, GraphDecomposition, GraphError, GraphPiece,
    Interval, PieceSet,
};
use crate::linalg::{jacobi_eigen_sym, norm2, Matrix};
use crate::rng::Rng;
use crate::spectral::{self, packed_len, SpectralPoint};

/// Feasibility/activity tolerance used where the formulas are exact.
pub const ACTIVE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum OuterError {
    DimensionMismatch { expected: usize, got: usize },
    /// `h` is `+inf` at the queried point but finiteness is required.
    InfiniteValue,
    Graph(GraphError),
    EmptySubdifferential,
}

impl core::fmt::Display for OuterError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OuterError::DimensionMismatch { expected, got } => {
                write!(f, "vector has {got} coordinates, outer function expects {expected}")
            }
            OuterError::InfiniteValue => write!(f, "outer function is +inf at this point"),
            OuterError::Graph(e) => write!(f, "{e}"),
            OuterError::EmptySubdifferential => {
                write!(f, "subdifferential is empty at this point")
            }
        }
    }
}

impl core::error::Error for OuterError {}

impl From<GraphError> for OuterError {
    fn from(e: GraphError) -> Self {
        OuterError::Graph(e)
    }
}

/// Composite encoding of a nonlinear program: ambient coordinates
/// `c = (u, y, w)` with `s` equality slots `y` and `t` inequality slots `w`;
/// multiplier coordinates `v = (theta, lambda, mu)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NlpData {
    pub s: usize,
    pub t: usize,
}

impl NlpData {
    pub fn ambient(&self) -> usize {
        1 + self.s + self.t
    }

    pub fn split<'a>(&self, c: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        (c[0], &c[1..1 + self.s], &c[1 + self.s..])
    }

    /// 1-based piece index of `G^J`: subsets are numbered `1..=2^t` in
    /// binary order, `G^{}` first.
    pub fn piece_index(&self, j_set: &[usize]) -> usize {
        1 + j_set.iter().map(|j| 1usize << (j - 1)).sum::<usize>()
    }

    /// The polyhedral piece `G^J` in `(c, v)`-space: `y = 0`, `w <= 0`,
    /// `theta = 1`, `mu >= 0`, with `w_j = 0` on `J` and `mu_j = 0` off `J`.
    pub fn gj_piece(&self, j_set: &[usize]) -> GraphPiece {
        debug_assert!(j_set.iter().all(|&j| 1 <= j && j <= self.t));
        let m = self.ambient();
        let mut iv = Vec::with_capacity(2 * m);
        iv.push(Interval::FREE); // u
        for _ in 0..self.s {
            iv.push(Interval::fixed(0.0)); // y
        }
        for j in 1..=self.t {
            if j_set.contains(&j) {
                iv.push(Interval::fixed(0.0)); // w_j = 0
            } else {
                iv.push(Interval::at_most(0.0)); // w_j <= 0
            }
        }
        iv.push(Interval::fixed(1.0)); // theta
        for _ in 0..self.s {
            iv.push(Interval::FREE); // lambda
        }
        for j in 1..=self.t {
            if j_set.contains(&j) {
                iv.push(Interval::at_least(0.0)); // mu_j >= 0
            } else {
                iv.push(Interval::fixed(0.0)); // mu_j = 0
            }
        }
        let mut sorted = j_set.to_vec();
        sorted.sort_unstable();
        GraphPiece::new(
            format!("G{}", self.piece_index(j_set)),
            2 * m,
            PieceSet::Box(BoxRegion { intervals: iv }),
        )
        .with_nlp_index_set(sorted)
    }
}

/// Horizon subdifferential description at a point where `h` is finite.
#[derive(Clone, Debug, PartialEq)]
pub enum HorizonCone {
    /// `{0}`: the transversality condition holds automatically.
    Trivial,
    /// Indicator of the nonnegative reals at the boundary: `(-inf, 0]`.
    NonnegBoundary,
    /// NLP kind: `{0} x R^s x {mu >= 0 : mu_j = 0 for j inactive}`;
    /// `active` holds the 1-based indices with `w_j = 0`.
    Nlp { s: usize, active: Vec<usize> },
}

impl HorizonCone {
    pub fn is_trivial(&self) -> bool {
        match self {
            HorizonCone::Trivial => true,
            HorizonCone::NonnegBoundary => false,
            HorizonCone::Nlp { s, active } => *s == 0 && active.is_empty(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OuterKind {
    /// Indicator of `[0, inf)` on the line.
    IndicatorNonneg,
    Abs,
    Pos,
    /// `1 - e^{-alpha |c|}` (nonconvex, Lipschitz).
    ExpPenalty { alpha: f64 },
    /// `|c1| + max(c2, 0)`.
    L1Two,
    /// Euclidean norm on `R^n`.
    EuclidNorm { n: usize },
    /// Maximum eigenvalue on symmetric `k x k` matrices (svec embedding).
    MaxEig { k: usize },
    /// `h(u, y, w) = u` when `y = 0, w <= 0`, else `+inf`.
    Nlp { s: usize, t: usize },
    /// `h(u, y, w) = u + nu (sum |y_i| + sum max(w_j, 0))`.
    L1ExactPenalty { s: usize, t: usize, nu: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterFunction {
    kind: OuterKind,
}

impl OuterFunction {
    pub fn new(kind: OuterKind) -> Self {
        OuterFunction { kind }
    }

    pub fn indicator_nonneg() -> Self {
        Self::new(OuterKind::IndicatorNonneg)
    }
    pub fn abs() -> Self {
        Self::new(OuterKind::Abs)
    }
    pub fn pos() -> Self {
        Self::new(OuterKind::Pos)
    }
    pub fn exp_penalty(alpha: f64) -> Self {
        Self::new(OuterKind::ExpPenalty { alpha })
    }
    pub fn l1_two() -> Self {
        Self::new(OuterKind::L1Two)
    }
    pub fn euclid_norm(n: usize) -> Self {
        Self::new(OuterKind::EuclidNorm { n })
    }
    pub fn max_eig(k: usize) -> Self {
        Self::new(OuterKind::MaxEig { k })
    }
    pub fn nlp(s: usize, t: usize) -> Self {
        Self::new(OuterKind::Nlp { s, t })
    }
    pub fn l1_exact_penalty(s: usize, t: usize, nu: f64) -> Self {
        Self::new(OuterKind::L1ExactPenalty { s, t, nu })
    }

    pub fn kind(&self) -> &OuterKind {
        &self.kind
    }

    pub fn nlp_data(&self) -> Option<NlpData> {
        match self.kind {
            OuterKind::Nlp { s, t } => Some(NlpData { s, t }),
            _ => None,
        }
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            OuterKind::IndicatorNonneg
            | OuterKind::Abs
            | OuterKind::Pos
            | OuterKind::ExpPenalty { .. } => 1,
            OuterKind::L1Two => 2,
            OuterKind::EuclidNorm { n } => *n,
            OuterKind::MaxEig { k } => packed_len(*k),
            OuterKind::Nlp { s, t } | OuterKind::L1ExactPenalty { s, t, .. } => 1 + s + t,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            OuterKind::IndicatorNonneg => "indicator".to_string(),
            OuterKind::Abs => "abs".to_string(),
            OuterKind::Pos => "pos".to_string(),
            OuterKind::ExpPenalty { alpha } => format!("exp_penalty(alpha={alpha})"),
            OuterKind::L1Two => "l1_two".to_string(),
            OuterKind::EuclidNorm { n } => format!("euclid_norm(n={n})"),
            OuterKind::MaxEig { k } => format!("max_eig(k={k})"),
            OuterKind::Nlp { s, t } => format!("nlp(s={s},t={t})"),
            OuterKind::L1ExactPenalty { s, t, nu } => format!("l1_exact_penalty(s={s},t={t},nu={nu})"),
        }
    }

    fn check_dim(&self, c: &[f64]) -> Result<(), OuterError> {
        if c.len() != self.dim() {
            return Err(OuterError::DimensionMismatch {
                expected: self.dim(),
                got: c.len(),
            });
        }
        Ok(())
    }

    /// `h(c)`, finite or `+inf`. Exact constraint semantics.
    pub fn value(&self, c: &[f64]) -> Result<f64, OuterError> {
        self.value_with_tol(c, 0.0)
    }

    /// `h(c)` treating constraint violations up to `feas_tol` as feasible.
    /// Used by residual gates, where linearized points carry rounding noise.
    pub fn value_with_tol(&self, c: &[f64], feas_tol: f64) -> Result<f64, OuterError> {
        self.check_dim(c)?;
        Ok(match &self.kind {
            OuterKind::IndicatorNonneg => {
                if c[0] >= -feas_tol {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            OuterKind::Abs => c[0].abs(),
            OuterKind::Pos => c[0].max(0.0),
            OuterKind::ExpPenalty { alpha } => 1.0 - exp(-alpha * c[0].abs()),
            OuterKind::L1Two => c[0].abs() + c[1].max(0.0),
            OuterKind::EuclidNorm { .. } => norm2(c),
            OuterKind::MaxEig { k } => {
                let x = spectral::unsvec(c, *k);
                let (w, _) = jacobi_eigen_sym(&x, 1e-13, 100);
                w[0]
            }
            OuterKind::Nlp { s, t } => {
                let data = NlpData { s: *s, t: *t };
                let (u, y, w) = data.split(c);
                let feasible = y.iter().all(|yi| yi.abs() <= feas_tol)
                    && w.iter().all(|&wj| wj <= feas_tol);
                if feasible {
                    u
                } else {
                    f64::INFINITY
                }
            }
            OuterKind::L1ExactPenalty { s, t, nu } => {
                let data = NlpData { s: *s, t: *t };
                let (u, y, w) = data.split(c);
                u + nu
                    * (y.iter().map(|yi| yi.abs()).sum::<f64>()
                        + w.iter().map(|wj| wj.max(0.0)).sum::<f64>())
            }
        })
    }

    /// Closed-form test for `v in subdiff h(c)` within `tol`.
    pub fn subdiff_membership(&self, c: &[f64], v: &[f64], tol: f64) -> Result<bool, OuterError> {
        self.check_dim(c)?;
        self.check_dim(v)?;
        Ok(match &self.kind {
            OuterKind::IndicatorNonneg => {
                if c[0] < -tol {
                    false
                } else if c[0] <= tol {
                    v[0] <= tol
                } else {
                    v[0].abs() <= tol
                }
            }
            OuterKind::Abs => scalar_abs_member(c[0], v[0], 1.0, tol),
            OuterKind::Pos => scalar_pos_member(c[0], v[0], 1.0, tol),
            OuterKind::ExpPenalty { alpha } => {
                if c[0] > tol {
                    (v[0] - alpha * exp(-alpha * c[0])).abs() <= tol
                } else if c[0] < -tol {
                    (v[0] + alpha * exp(alpha * c[0])).abs() <= tol
                } else {
                    v[0].abs() <= alpha + tol
                }
            }
            OuterKind::L1Two => {
                scalar_abs_member(c[0], v[0], 1.0, tol) && scalar_pos_member(c[1], v[1], 1.0, tol)
            }
            OuterKind::EuclidNorm { .. } => {
                let cn = norm2(c);
                if cn > tol {
                    let diff: f64 = c
                        .iter()
                        .zip(v)
                        .map(|(ci, vi)| {
                            let g = ci / cn;
                            (vi - g) * (vi - g)
                        })
                        .sum();
                    crate::fmath::sqrt(diff) <= tol
                } else {
                    norm2(v) <= 1.0 + tol
                }
            }
            OuterKind::MaxEig { k } => {
                let mut pair = c.to_vec();
                pair.extend_from_slice(v);
                SpectralPoint::from_svec_pair(&pair, *k).is_ok()
            }
            OuterKind::Nlp { s, t } => {
                let data = NlpData { s: *s, t: *t };
                let (_, y, w) = data.split(c);
                let (theta, _, mu) = data.split(v);
                (theta - 1.0).abs() <= tol
                    && y.iter().all(|yi| yi.abs() <= tol)
                    && w.iter().all(|&wj| wj <= tol)
                    && mu.iter().all(|&mj| mj >= -tol)
                    && mu
                        .iter()
                        .zip(w)
                        .all(|(&mj, &wj)| mj <= tol || wj >= -tol)
            }
            OuterKind::L1ExactPenalty { s, t, nu } => {
                let data = NlpData { s: *s, t: *t };
                let (_, y, w) = data.split(c);
                let (theta, lambda, mu) = data.split(v);
                (theta - 1.0).abs() <= tol
                    && y
                        .iter()
                        .zip(lambda)
                        .all(|(&yi, &li)| scalar_abs_member(yi, li, *nu, tol))
                    && w
                        .iter()
                        .zip(mu)
                        .all(|(&wj, &mj)| scalar_pos_member(wj, mj, *nu, tol))
            }
        })
    }

    /// Horizon subdifferential at a point with `h(c)` finite.
    pub fn horizon(&self, c: &[f64]) -> Result<HorizonCone, OuterError> {
        self.check_dim(c)?;
        match &self.kind {
            OuterKind::IndicatorNonneg => {
                if c[0] < -ACTIVE_TOL {
                    Err(OuterError::InfiniteValue)
                } else if c[0] <= ACTIVE_TOL {
                    Ok(HorizonCone::NonnegBoundary)
                } else {
                    Ok(HorizonCone::Trivial)
                }
            }
            OuterKind::Nlp { s, t } => {
                let data = NlpData { s: *s, t: *t };
                let (_, y, w) = data.split(c);
                if y.iter().any(|yi| yi.abs() > ACTIVE_TOL)
                    || w.iter().any(|&wj| wj > ACTIVE_TOL)
                {
                    return Err(OuterError::InfiniteValue);
                }
                let active: Vec<usize> = w
                    .iter()
                    .enumerate()
                    .filter(|(_, &wj)| wj >= -ACTIVE_TOL)
                    .map(|(i, _)| i + 1)
                    .collect();
                Ok(HorizonCone::Nlp { s: *s, active })
            }
            // finite locally Lipschitz functions have trivial horizon cones
            _ => Ok(HorizonCone::Trivial),
        }
    }

    /// `true` iff the horizon subdifferential at `c` is `{0}`.
    pub fn horizon_trivial(&self, c: &[f64]) -> Result<bool, OuterError> {
        Ok(self.horizon(c)?.is_trivial())
    }

    /// The canonical finite decomposition of `gph(subdiff h)`.
    pub fn decomposition(&self) -> Result<GraphDecomposition, OuterError> {
        Ok(match &self.kind {
            OuterKind::IndicatorNonneg => GraphDecomposition::new(vec![
                box_piece("G1", Interval::fixed(0.0), Interval::at_most(0.0)),
                box_piece("G2", Interval::fixed(0.0), Interval::fixed(0.0)),
                box_piece("G3", Interval::at_least(0.0), Interval::fixed(0.0)),
            ]),
            OuterKind::Abs => GraphDecomposition::new(abs_pieces(1.0)),
            OuterKind::Pos => GraphDecomposition::new(pos_pieces(1.0)),
            OuterKind::ExpPenalty { alpha } => GraphDecomposition::new(vec![
                GraphPiece::new(
                    "G1",
                    2,
                    PieceSet::ExpCurve {
                        alpha: *alpha,
                        branch: CurveBranch::Negative,
                    },
                ),
                box_piece("G2", Interval::fixed(0.0), Interval::new(-alpha, *alpha)),
                GraphPiece::new(
                    "G3",
                    2,
                    PieceSet::ExpCurve {
                        alpha: *alpha,
                        branch: CurveBranch::Positive,
                    },
                ),
            ]),
            OuterKind::L1Two => {
                let abs = GraphDecomposition::new(abs_pieces(1.0));
                let pos = GraphDecomposition::new(pos_pieces(1.0));
                product_decomposition(&[abs, pos])?
            }
            OuterKind::EuclidNorm { n } => GraphDecomposition::new(vec![
                GraphPiece::new("G1", 2 * n, PieceSet::NormBall { n: *n }),
                GraphPiece::new("G2", 2 * n, PieceSet::NormRays { n: *n }),
            ]),
            OuterKind::MaxEig { k } => {
                let mut pieces = Vec::new();
                for m in 1..=*k {
                    for r in 1..=m {
                        pieces.push(GraphPiece::new(
                            format!("Gm{m}r{r}"),
                            2 * packed_len(*k),
                            PieceSet::Spectral { k: *k, mult: m, rank: r },
                        ));
                    }
                }
                GraphDecomposition::new(pieces)
            }
            OuterKind::Nlp { s, t } => {
                if *t > 20 {
                    let count = 1usize << (*t).min(63);
                    return Err(OuterError::Graph(GraphError::TooManyPieces(count)));
                }
                let data = NlpData { s: *s, t: *t };
                // masks enumerate subsets in piece-index order, G^{} first
                let pieces = (0..(1usize << t))
                    .map(|mask| {
                        let j_set: Vec<usize> =
                            (1..=*t).filter(|j| mask & (1 << (j - 1)) != 0).collect();
                        data.gj_piece(&j_set)
                    })
                    .collect();
                GraphDecomposition::new(pieces)
            }
            OuterKind::L1ExactPenalty { s, t, nu } => {
                let u_factor = GraphDecomposition::new(vec![box_piece(
                    "U",
                    Interval::FREE,
                    Interval::fixed(1.0),
                )]);
                let mut factors = vec![u_factor];
                for _ in 0..*s {
                    factors.push(GraphDecomposition::new(relabel(abs_pieces(*nu), "A")));
                }
                for _ in 0..*t {
                    factors.push(GraphDecomposition::new(relabel(pos_pieces(*nu), "P")));
                }
                product_decomposition(&factors)?
            }
        })
    }

    /// One random point of `gph(subdiff h)` (deterministic in `rng`).
    pub fn sample_graph_point(&self, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        const R: f64 = 3.0;
        match &self.kind {
            OuterKind::IndicatorNonneg => match rng.below(3) {
                0 => (vec![0.0], vec![-rng.range(0.0, R)]),
                1 => (vec![0.0], vec![0.0]),
                _ => (vec![rng.range(0.0, R)], vec![0.0]),
            },
            OuterKind::Abs => {
                let (c, v) = sample_scalar_abs(rng, 1.0, R);
                (vec![c], vec![v])
            }
            OuterKind::Pos => {
                let (c, v) = sample_scalar_pos(rng, 1.0, R);
                (vec![c], vec![v])
            }
            OuterKind::ExpPenalty { alpha } => match rng.below(3) {
                0 => {
                    let c = -rng.range(0.0, R);
                    (vec![c], vec![-alpha * exp(alpha * c)])
                }
                1 => (vec![0.0], vec![rng.range(-alpha, *alpha)]),
                _ => {
                    let c = rng.range(0.0, R);
                    (vec![c], vec![alpha * exp(-alpha * c)])
                }
            },
            OuterKind::L1Two => {
                let (c1, v1) = sample_scalar_abs(rng, 1.0, R);
                let (c2, v2) = sample_scalar_pos(rng, 1.0, R);
                (vec![c1, c2], vec![v1, v2])
            }
            OuterKind::EuclidNorm { n } => {
                if rng.chance(0.5) {
                    // {0} x ball
                    let u = rng.unit_vector(*n);
                    let radius = libm_pow(rng.uniform(), 1.0 / *n as f64);
                    (vec![0.0; *n], u.iter().map(|x| radius * x).collect())
                } else {
                    let u = rng.unit_vector(*n);
                    let t = rng.range(0.0, R);
                    (u.iter().map(|x| t * x).collect(), u)
                }
            }
            OuterKind::MaxEig { k } => {
                let pt = spectral::sample_graph_point(*k, rng);
                let pair = pt.to_svec_pair();
                let m = packed_len(*k);
                (pair[..m].to_vec(), pair[m..].to_vec())
            }
            OuterKind::Nlp { s, t } => {
                let mut c = Vec::with_capacity(1 + s + t);
                let mut v = Vec::with_capacity(1 + s + t);
                c.push(rng.range(-R, R)); // u
                v.push(1.0); // theta
                for _ in 0..*s {
                    c.push(0.0);
                }
                let mut vs = Vec::new();
                for _ in 0..*s {
                    vs.push(rng.range(-R, R));
                }
                let mut ws = Vec::new();
                let mut mus = Vec::new();
                for _ in 0..*t {
                    if rng.chance(0.5) {
                        ws.push(0.0);
                        mus.push(rng.range(0.0, R));
                    } else {
                        ws.push(-rng.range(0.0, R));
                        mus.push(0.0);
                    }
                }
                c.extend(ws);
                v.extend(vs);
                v.extend(mus);
                (c, v)
            }
            OuterKind::L1ExactPenalty { s, t, nu } => {
                let mut c = vec![rng.range(-R, R)];
                let mut v = vec![1.0];
                let mut lambdas = Vec::new();
                let mut mus = Vec::new();
                for _ in 0..*s {
                    let (ci, li) = sample_scalar_abs(rng, *nu, R);
                    c.push(ci);
                    lambdas.push(li);
                }
                for _ in 0..*t {
                    let (cj, mj) = sample_scalar_pos(rng, *nu, R);
                    c.push(cj);
                    mus.push(mj);
                }
                v.extend(lambdas);
                v.extend(mus);
                (c, v)
            }
        }
    }

    /// `subdiff h(c)` as a box when it is one (polyhedral kinds and the
    /// smooth points of the others).
    pub fn subdiff_box(&self, c: &[f64]) -> Result<Option<BoxRegion>, OuterError> {
        self.check_dim(c)?;
        let iv = |i: Interval| -> Option<BoxRegion> {
            Some(BoxRegion { intervals: vec![i] })
        };
        Ok(match &self.kind {
            OuterKind::IndicatorNonneg => {
                if c[0] < -ACTIVE_TOL {
                    return Err(OuterError::EmptySubdifferential);
                } else if c[0] <= ACTIVE_TOL {
                    iv(Interval::at_most(0.0))
                } else {
                    iv(Interval::fixed(0.0))
                }
            }
            OuterKind::Abs => iv(scalar_abs_interval(c[0], 1.0)),
            OuterKind::Pos => iv(scalar_pos_interval(c[0], 1.0)),
            OuterKind::ExpPenalty { alpha } => {
                if c[0] > ACTIVE_TOL {
                    iv(Interval::fixed(alpha * exp(-alpha * c[0])))
                } else if c[0] < -ACTIVE_TOL {
                    iv(Interval::fixed(-alpha * exp(alpha * c[0])))
                } else {
                    iv(Interval::new(-alpha, *alpha))
                }
            }
            OuterKind::L1Two => Some(BoxRegion {
                intervals: vec![
                    scalar_abs_interval(c[0], 1.0),
                    scalar_pos_interval(c[1], 1.0),
                ],
            }),
            OuterKind::EuclidNorm { .. } => {
                let cn = norm2(c);
                if cn > ACTIVE_TOL {
                    Some(BoxRegion {
                        intervals: c.iter().map(|ci| Interval::fixed(ci / cn)).collect(),
                    })
                } else {
                    None // unit ball, not a box for n >= 2
                }
            }
            OuterKind::MaxEig { .. } => None,
            OuterKind::Nlp { s, t } => {
                let data = NlpData { s: *s, t: *t };
                let (_, y, w) = data.split(c);
                if y.iter().any(|yi| yi.abs() > ACTIVE_TOL)
                    || w.iter().any(|&wj| wj > ACTIVE_TOL)
                {
                    return Err(OuterError::EmptySubdifferential);
                }
                let mut intervals = vec![Interval::fixed(1.0)];
                intervals.extend((0..*s).map(|_| Interval::FREE));
                intervals.extend(w.iter().map(|&wj| {
                    if wj >= -ACTIVE_TOL {
                        Interval::at_least(0.0)
                    } else {
                        Interval::fixed(0.0)
                    }
                }));
                Some(BoxRegion { intervals })
            }
            OuterKind::L1ExactPenalty { s, t, nu } => {
                let data = NlpData { s: *s, t: *t };
                let (_, y, w) = data.split(c);
                let mut intervals = vec![Interval::fixed(1.0)];
                intervals.extend(y.iter().map(|&yi| scalar_abs_interval(yi, *nu)));
                intervals.extend(w.iter().map(|&wj| scalar_pos_interval(wj, *nu)));
                Some(BoxRegion { intervals })
            }
        })
    }

    /// Euclidean projection of `v` onto `subdiff h(c)`.
    pub fn project_subdiff(&self, c: &[f64], v: &[f64]) -> Result<Vec<f64>, OuterError> {
        self.check_dim(c)?;
        self.check_dim(v)?;
        if let Some(b) = self.subdiff_box(c)? {
            return Ok(b.project(v));
        }
        match &self.kind {
            OuterKind::EuclidNorm { .. } => {
                let vn = norm2(v);
                let scalef = if vn > 1.0 { 1.0 / vn } else { 1.0 };
                Ok(v.iter().map(|x| x * scalef).collect())
            }
            OuterKind::MaxEig { k } => {
                let x = spectral::unsvec(c, *k);
                let y = spectral::unsvec(v, *k);
                let (xw, xv) = jacobi_eigen_sym(&x, 1e-13, 100);
                let p = xw
                    .iter()
                    .take_while(|&&xi| (xw[0] - xi).abs() <= spectral::MULTIPLICITY_GAP_TOL)
                    .count();
                // basis of the top eigenspace: first p columns of xv
                let u1 = Matrix::from_fn(*k, p, |i, j| xv[(i, j)]);
                let b = u1.transpose().matmul(&y).matmul(&u1);
                let bsym = Matrix::from_fn(p, p, |i, j| 0.5 * (b[(i, j)] + b[(j, i)]));
                let (bw, bv) = jacobi_eigen_sym(&bsym, 1e-13, 100);
                let z = project_simplex(&bw);
                let d = Matrix::from_fn(p, p, |i, j| if i == j { z[i] } else { 0.0 });
                let s = bv.matmul(&d).matmul(&bv.transpose());
                let proj = u1.matmul(&s).matmul(&u1.transpose());
                Ok(spectral::svec(&proj))
            }
            _ => unreachable!("all box-free kinds handled above"),
        }
    }

    /// Membership of `c` in the designated identification manifold, when the
    /// kind has one (`abs`/`pos`: `{0}`; Euclidean norm: `{0}^n`).
    pub fn manifold_membership(&self, c: &[f64], tol: f64) -> Option<bool> {
        match &self.kind {
            OuterKind::Abs | OuterKind::Pos => Some(c[0].abs() <= tol),
            OuterKind::EuclidNorm { .. } => Some(norm2(c) <= tol),
            _ => None,
        }
    }
}

fn libm_pow(base: f64, e: f64) -> f64 {
    libm::pow(base, e)
}

fn box_piece(id: &str, c: Interval, v: Interval) -> GraphPiece {
    GraphPiece::new(
        id,
        2,
        PieceSet::Box(BoxRegion {
            intervals: vec![c, v],
        }),
    )
}

fn abs_pieces(weight: f64) -> Vec<GraphPiece> {
    vec![
        box_piece("G1", Interval::at_most(0.0), Interval::fixed(-weight)),
        box_piece("G2", Interval::fixed(0.0), Interval::new(-weight, weight)),
        box_piece("G3", Interval::at_least(0.0), Interval::fixed(weight)),
    ]
}

fn pos_pieces(weight: f64) -> Vec<GraphPiece> {
    vec![
        box_piece("G4", Interval::at_most(0.0), Interval::fixed(0.0)),
        box_piece("G5", Interval::fixed(0.0), Interval::new(0.0, weight)),
        box_piece("G6", Interval::at_least(0.0), Interval::fixed(weight)),
    ]
}

fn relabel(pieces: Vec<GraphPiece>, prefix: &str) -> Vec<GraphPiece> {
    pieces
        .into_iter()
        .map(|p| {
            let digits: String = p.id().chars().filter(|c| c.is_ascii_digit()).collect();
            let dim = p.dim();
            let set = p.set().clone();
            GraphPiece::new(format!("{prefix}{digits}"), dim, set)
        })
        .collect()
}

fn scalar_abs_member(c: f64, v: f64, weight: f64, tol: f64) -> bool {
    if c > tol {
        (v - weight).abs() <= tol
    } else if c < -tol {
        (v + weight).abs() <= tol
    } else {
        v.abs() <= weight + tol
    }
}

fn scalar_pos_member(c: f64, v: f64, weight: f64, tol: f64) -> bool {
    if c > tol {
        (v - weight).abs() <= tol
    } else if c < -tol {
        v.abs() <= tol
    } else {
        v >= -tol && v <= weight + tol
    }
}

fn scalar_abs_interval(c: f64, weight: f64) -> Interval {
    if c > ACTIVE_TOL {
        Interval::fixed(weight)
    } else if c < -ACTIVE_TOL {
        Interval::fixed(-weight)
    } else {
        Interval::new(-weight, weight)
    }
}

fn scalar_pos_interval(c: f64, weight: f64) -> Interval {
    if c > ACTIVE_TOL {
        Interval::fixed(weight)
    } else if c < -ACTIVE_TOL {
        Interval::fixed(0.0)
    } else {
        Interval::new(0.0, weight)
    }
}

fn sample_scalar_abs(rng: &mut Rng, weight: f64, reach: f64) -> (f64, f64) {
    match rng.below(3) {
        0 => (-rng.range(0.0, reach), -weight),
        1 => (0.0, rng.range(-weight, weight)),
        _ => (rng.range(0.0, reach), weight),
    }
}

fn sample_scalar_pos(rng: &mut Rng, weight: f64, reach: f64) -> (f64, f64) {
    match rng.below(3) {
        0 => (-rng.range(0.0, reach), 0.0),
        1 => (0.0, rng.range(0.0, weight)),
        _ => (rng.range(0.0, reach), weight),
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(z: &[f64]) -> Vec<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, &zi) in sorted.iter().enumerate() {
        acc += zi;
        let t = (acc - 1.0) / (i + 1) as f64;
        if zi - t > 0.0 {
            tau = t;
        }
    }
    z.iter().map(|&zi| (zi - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nlp_value_feasible_returns_objective() {
        let h = OuterFunction::nlp(0, 2);
        assert_abs_diff_eq!(h.value(&[5.0, -1.0, 0.0]).unwrap(), 5.0);
        assert!(h.value(&[5.0, -1.0, 0.1]).unwrap().is_infinite());
    }

    #[test]
    fn l1_two_value() {
        let h = OuterFunction::l1_two();
        assert_abs_diff_eq!(h.value(&[-2.0, 3.0]).unwrap(), 5.0);
    }

    #[test]
    fn exp_penalty_value_at_zero() {
        let h = OuterFunction::exp_penalty(1.0);
        assert_abs_diff_eq!(h.value(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn pos_membership_at_kink() {
        let h = OuterFunction::pos();
        assert!(h.subdiff_membership(&[0.0], &[0.3], 1e-10).unwrap());
        assert!(!h.subdiff_membership(&[0.0], &[1.3], 1e-10).unwrap());
    }

    #[test]
    fn nlp_membership_by_complementarity() {
        let h = OuterFunction::nlp(0, 2);
        // mu_1 = 0 pairs with w_1 < 0; mu_2 >= 0 with w_2 = 0
        assert!(h
            .subdiff_membership(&[5.0, -1.0, 0.0], &[1.0, 0.0, 2.0], 1e-10)
            .unwrap());
        assert!(!h
            .subdiff_membership(&[5.0, -1.0, 0.0], &[1.0, 2.0, 0.0], 1e-10)
            .unwrap());
    }

    #[test]
    fn abs_membership_off_kink() {
        let h = OuterFunction::abs();
        assert!(!h.subdiff_membership(&[0.5], &[-1.0], 1e-10).unwrap());
        assert!(h.subdiff_membership(&[0.5], &[1.0], 1e-10).unwrap());
    }

    #[test]
    fn horizon_cases() {
        let h = OuterFunction::euclid_norm(3);
        assert!(h.horizon_trivial(&[0.3, 0.0, -2.0]).unwrap());

        let h = OuterFunction::nlp(0, 2);
        match h.horizon(&[5.0, -1.0, 0.0]).unwrap() {
            HorizonCone::Nlp { s, active } => {
                assert_eq!(s, 0);
                assert_eq!(active, vec![2]);
            }
            other => panic!("unexpected cone {other:?}"),
        }
        assert!(!h.horizon_trivial(&[5.0, -1.0, 0.0]).unwrap());

        let h = OuterFunction::abs();
        assert!(h.horizon_trivial(&[0.0]).unwrap());

        let h = OuterFunction::indicator_nonneg();
        assert!(!h.horizon_trivial(&[0.0]).unwrap());
        assert!(h.horizon_trivial(&[1.0]).unwrap());
        assert!(h.horizon(&[-1.0]).is_err());
    }

    #[test]
    fn decomposition_piece_counts() {
        assert_eq!(OuterFunction::abs().decomposition().unwrap().len(), 3);
        assert_eq!(OuterFunction::pos().decomposition().unwrap().len(), 3);
        assert_eq!(OuterFunction::l1_two().decomposition().unwrap().len(), 9);
        assert_eq!(OuterFunction::nlp(0, 2).decomposition().unwrap().len(), 4);
        assert_eq!(OuterFunction::max_eig(3).decomposition().unwrap().len(), 6);
        assert_eq!(
            OuterFunction::euclid_norm(2).decomposition().unwrap().len(),
            2
        );
    }

    #[test]
    fn abs_first_piece_matches_catalog() {
        let d = OuterFunction::abs().decomposition().unwrap();
        let g1 = &d.pieces()[0];
        assert_eq!(g1.id(), "G1");
        assert_abs_diff_eq!(g1.distance(&[-5.0, -1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(g1.distance(&[0.0, -1.0]).unwrap(), 0.0);
        assert!(g1.distance(&[1.0, -1.0]).unwrap() > 0.9);
    }

    #[test]
    fn nlp_gj_piece_ids_binary_order() {
        let d = OuterFunction::nlp(0, 2).decomposition().unwrap();
        let ids = d.piece_ids();
        assert_eq!(ids, vec!["G1", "G2", "G3", "G4"]);
        assert_eq!(d.pieces()[1].nlp_index_set(), Some(&[1usize][..]));
        assert_eq!(d.pieces()[2].nlp_index_set(), Some(&[2usize][..]));
        assert_eq!(d.pieces()[3].nlp_index_set(), Some(&[1usize, 2][..]));
    }

    #[test]
    fn gj_piece_distances_match_coordinate_projection() {
        // t = 1: query ((u, -0.1), (1, 0.2))
        let data = NlpData { s: 0, t: 1 };
        let g_empty = data.gj_piece(&[]);
        let g_one = data.gj_piece(&[1]);
        let q = [0.7, -0.1, 1.0, 0.2];
        assert_abs_diff_eq!(g_empty.distance(&q).unwrap(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(g_one.distance(&q).unwrap(), 0.1, epsilon = 1e-12);
        let on_piece = [0.7, 0.0, 1.0, 0.2];
        assert_abs_diff_eq!(g_one.distance(&on_piece).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gj_distance_matches_grid_oracle() {
        let data = NlpData { s: 0, t: 1 };
        let g_empty = data.gj_piece(&[]);
        let q = [0.7, -0.1, 1.0, 0.2];
        // dense sample of the piece section
        let mut best = f64::INFINITY;
        for wi in 0..=400 {
            let w = -2.0 + 2.0 * wi as f64 / 400.0;
            if w > 0.0 {
                continue;
            }
            let p = [q[0], w, 1.0, 0.0];
            let d: f64 = q
                .iter()
                .zip(&p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            best = best.min(libm::sqrt(d));
        }
        assert_abs_diff_eq!(g_empty.distance(&q).unwrap(), best, epsilon = 1e-6);
    }

    #[test]
    fn coverage_smoke_all_kinds() {
        let catalog = [
            OuterFunction::indicator_nonneg(),
            OuterFunction::abs(),
            OuterFunction::pos(),
            OuterFunction::exp_penalty(1.0),
            OuterFunction::l1_two(),
            OuterFunction::euclid_norm(2),
            OuterFunction::nlp(1, 2),
            OuterFunction::l1_exact_penalty(1, 1, 0.5),
            OuterFunction::max_eig(2),
        ];
        let mut rng = Rng::new(2024);
        for h in &catalog {
            let d = h.decomposition().unwrap();
            for _ in 0..50 {
                let (c, v) = h.sample_graph_point(&mut rng);
                assert!(
                    h.subdiff_membership(&c, &v, 1e-8).unwrap(),
                    "sampled point off graph for {}",
                    h.name()
                );
                let mut p = c.clone();
                p.extend_from_slice(&v);
                let (dist, _) = d.min_distance(&p).unwrap();
                assert!(dist <= 1e-8, "{}: coverage distance {dist}", h.name());
            }
        }
    }

    #[test]
    fn non_closed_graph_has_no_closed_decomposition() {
        // h(c) = 0 for c <= 0, 1 - c for c > 0 is lower semicontinuous but
        // kept out of the catalog: subgradients (1/r, -1) lie on its graph
        // and accumulate at (0, -1), which is off the graph since
        // subdiff h(0) = [0, inf). A finite union of closed pieces covering
        // the graph would have to contain that limit, so the decomposition
        // precondition cannot hold.
        let on_graph = |c: f64, v: f64| -> bool {
            if c < 0.0 {
                v == 0.0
            } else if c == 0.0 {
                v >= 0.0
            } else {
                v == -1.0
            }
        };
        let tail: alloc::vec::Vec<(f64, f64)> =
            (1..200).map(|r| (1.0 / r as f64, -1.0)).collect();
        assert!(tail.iter().all(|&(c, v)| on_graph(c, v)));
        assert!(!on_graph(0.0, -1.0));
    }

    #[test]
    fn simplex_projection() {
        let z = project_simplex(&[2.0, 0.0]);
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-12);
        let z = project_simplex(&[0.4, 0.4]);
        assert_abs_diff_eq!(z[0], 0.5, epsilon = 1e-12);
    }
}
