//! Closed pieces of subdifferential graphs with distance and projection
//! oracles, and finite decompositions built from them.
//!
//! A piece lives in `(c, v)`-space `R^m x R^m`; queries are points
//! `p = (c, v)` of length `2m` and all distances are Euclidean on the
//! product space.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath::{cos, exp, sin, sqrt};
use crate::linalg::norm2;
use crate::spectral::{SpectralError, SpectralPoint};

#[derive(Clone, Debug, PartialEq)]
pub enum GraphError {
    DimensionMismatch { expected: usize, got: usize },
    /// Spectral piece distances are defined for graph points only.
    OffGraphQuery(String),
    TooManyPieces(usize),
    EmptyProduct,
}

impl core::fmt::Display for GraphError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GraphError::DimensionMismatch { expected, got } => {
                write!(f, "query has {got} coordinates, piece expects {expected}")
            }
            GraphError::OffGraphQuery(why) => write!(f, "off-graph query: {why}"),
            GraphError::TooManyPieces(n) => write!(f, "decomposition would have {n} pieces"),
            GraphError::EmptyProduct => write!(f, "product of zero decompositions"),
        }
    }
}

impl core::error::Error for GraphError {}

impl From<SpectralError> for GraphError {
    fn from(e: SpectralError) -> Self {
        GraphError::OffGraphQuery(e.to_string())
    }
}

/// A closed interval of the extended line; `lo == hi` pins a coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FREE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn fixed(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn at_most(hi: f64) -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi,
        }
    }

    pub fn at_least(lo: f64) -> Self {
        Interval {
            lo,
            hi: f64::INFINITY,
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn dist(&self, v: f64) -> f64 {
        (v - self.clamp(v)).abs()
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Intersection, or `None` when empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }
}

impl core::fmt::Display for Interval {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.lo == self.hi {
            return write!(f, "{{{}}}", self.lo);
        }
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => write!(f, "[{}, {}]", self.lo, self.hi),
            (false, true) => write!(f, "(-inf, {}]", self.hi),
            (true, false) => write!(f, "[{}, +inf)", self.lo),
            (false, false) => write!(f, "(-inf, +inf)"),
        }
    }
}

/// Axis-aligned product of intervals in `(c, v)`-space.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub intervals: Vec<Interval>,
}

impl BoxRegion {
    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn distance(&self, p: &[f64]) -> f64 {
        sqrt(
            self.intervals
                .iter()
                .zip(p)
                .map(|(iv, &x)| {
                    let d = iv.dist(x);
                    d * d
                })
                .sum(),
        )
    }

    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.intervals
            .iter()
            .zip(p)
            .map(|(iv, &x)| iv.clamp(x))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveBranch {
    /// `{(s, -alpha e^{alpha s}) : s <= 0}`
    Negative,
    /// `{(s, alpha e^{-alpha s}) : s >= 0}`
    Positive,
}

/// The shape of a piece, with kind-specific data.
#[derive(Clone, Debug)]
pub enum PieceSet {
    Box(BoxRegion),
    /// One smooth branch of the graph of the exponential penalty derivative.
    ExpCurve { alpha: f64, branch: CurveBranch },
    /// `{0} x {|v| <= 1}` in `R^n x R^n`.
    NormBall { n: usize },
    /// `{(t u, u) : t >= 0, |u| = 1}`, the closure of the unit-gradient rays.
    NormRays { n: usize },
    /// Multiplicity-`mult` / rank-`rank` piece of the max-eigenvalue graph
    /// over symmetric `k x k` matrices (svec embedding).
    Spectral { k: usize, mult: usize, rank: usize },
    /// Cartesian product with `(c, v)` coordinates interleaved per factor.
    Product { factors: Vec<GraphPiece> },
}

/// Coarse classification used in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PieceKind {
    Polyhedral,
    Curve,
    Ball,
    Rays,
    Spectral,
    Product,
}

#[derive(Clone, Debug)]
pub struct GraphPiece {
    id: String,
    /// Ambient dimension `2m`.
    dim: usize,
    set: PieceSet,
    /// For NLP pieces `G^J`: the (1-based) index set `J`.
    nlp_index_set: Option<Vec<usize>>,
}

impl GraphPiece {
    pub fn new(id: impl Into<String>, dim: usize, set: PieceSet) -> Self {
        GraphPiece {
            id: id.into(),
            dim,
            set,
            nlp_index_set: None,
        }
    }

    pub fn with_nlp_index_set(mut self, j: Vec<usize>) -> Self {
        self.nlp_index_set = Some(j);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &PieceSet {
        &self.set
    }

    pub fn kind(&self) -> PieceKind {
        match self.set {
            PieceSet::Box(_) => PieceKind::Polyhedral,
            PieceSet::ExpCurve { .. } => PieceKind::Curve,
            PieceSet::NormBall { .. } => PieceKind::Ball,
            PieceSet::NormRays { .. } => PieceKind::Rays,
            PieceSet::Spectral { .. } => PieceKind::Spectral,
            PieceSet::Product { .. } => PieceKind::Product,
        }
    }

    pub fn nlp_index_set(&self) -> Option<&[usize]> {
        self.nlp_index_set.as_deref()
    }

    /// The piece as a product of intervals, when it is one: plain boxes,
    /// and products whose factors are all boxes (their `(c, v)` blocks
    /// interleave back into whole-space coordinates).
    pub fn box_region(&self) -> Option<BoxRegion> {
        match &self.set {
            PieceSet::Box(b) => Some(b.clone()),
            PieceSet::Product { factors } => {
                let m = self.dim / 2;
                let mut c_iv = Vec::with_capacity(m);
                let mut v_iv = Vec::with_capacity(m);
                for factor in factors {
                    let fb = factor.box_region()?;
                    let fm = factor.dim() / 2;
                    c_iv.extend_from_slice(&fb.intervals[..fm]);
                    v_iv.extend_from_slice(&fb.intervals[fm..]);
                }
                c_iv.append(&mut v_iv);
                Some(BoxRegion { intervals: c_iv })
            }
            _ => None,
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<(), GraphError> {
        if p.len() != self.dim {
            return Err(GraphError::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Euclidean distance from `p = (c, v)` to the piece.
    pub fn distance(&self, p: &[f64]) -> Result<f64, GraphError> {
        self.check_dim(p)?;
        match &self.set {
            PieceSet::Box(b) => Ok(b.distance(p)),
            PieceSet::ExpCurve { alpha, branch } => {
                Ok(curve_project(*alpha, *branch, p[0], p[1]).0)
            }
            PieceSet::NormBall { n } => {
                let (c, v) = p.split_at(*n);
                let vn = norm2(v);
                let excess = (vn - 1.0).max(0.0);
                Ok(sqrt(crate::linalg::dot(c, c) + excess * excess))
            }
            PieceSet::NormRays { n } => Ok(rays_project(*n, p).0),
            PieceSet::Spectral { k, mult, rank } => {
                let pt = SpectralPoint::from_svec_pair(p, *k)?;
                Ok(pt.piece_distance(*mult, *rank)?.distance)
            }
            PieceSet::Product { factors } => {
                let mut acc = 0.0;
                for (factor, fp) in factor_queries(factors, p) {
                    let d = factor.distance(&fp)?;
                    acc += d * d;
                }
                Ok(sqrt(acc))
            }
        }
    }

    /// Nearest point of the piece (exact for boxes, balls and spectral
    /// pieces; solved to high accuracy for curves and ray bundles).
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>, GraphError> {
        self.check_dim(p)?;
        match &self.set {
            PieceSet::Box(b) => Ok(b.project(p)),
            PieceSet::ExpCurve { alpha, branch } => {
                let (_, s) = curve_project(*alpha, *branch, p[0], p[1]);
                Ok(vec![s, curve_value(*alpha, *branch, s)])
            }
            PieceSet::NormBall { n } => {
                let (_, v) = p.split_at(*n);
                let vn = norm2(v);
                let scale = if vn > 1.0 { 1.0 / vn } else { 1.0 };
                let mut out = vec![0.0; *n];
                out.extend(v.iter().map(|x| x * scale));
                Ok(out)
            }
            PieceSet::NormRays { n } => {
                let (_, point) = rays_project(*n, p);
                Ok(point)
            }
            PieceSet::Spectral { k, mult, rank } => {
                let pt = SpectralPoint::from_svec_pair(p, *k)?;
                Ok(pt.piece_distance(*mult, *rank)?.projected.to_svec_pair())
            }
            PieceSet::Product { factors } => {
                let m = self.dim / 2;
                let mut out = vec![0.0; self.dim];
                let mut offset = 0;
                for factor in factors {
                    let fm = factor.dim() / 2;
                    let mut fp = Vec::with_capacity(2 * fm);
                    fp.extend_from_slice(&p[offset..offset + fm]);
                    fp.extend_from_slice(&p[m + offset..m + offset + fm]);
                    let proj = factor.project(&fp)?;
                    out[offset..offset + fm].copy_from_slice(&proj[..fm]);
                    out[m + offset..m + offset + fm].copy_from_slice(&proj[fm..]);
                    offset += fm;
                }
                Ok(out)
            }
        }
    }

    pub fn membership(&self, p: &[f64], tol: f64) -> Result<bool, GraphError> {
        Ok(self.distance(p)? <= tol)
    }

    /// Human-readable description of the set, used by demo listings.
    pub fn describe(&self) -> String {
        match &self.set {
            PieceSet::Box(b) => {
                let m = self.dim / 2;
                let cs: Vec<String> = b.intervals[..m].iter().map(|iv| iv.to_string()).collect();
                let vs: Vec<String> = b.intervals[m..].iter().map(|iv| iv.to_string()).collect();
                format!("c in {} , v in {}", cs.join(" x "), vs.join(" x "))
            }
            PieceSet::ExpCurve { alpha, branch } => match branch {
                CurveBranch::Negative => {
                    format!("{{(c, -{alpha}*exp({alpha}*c)) : c <= 0}}")
                }
                CurveBranch::Positive => {
                    format!("{{(c, {alpha}*exp(-{alpha}*c)) : c >= 0}}")
                }
            },
            PieceSet::NormBall { .. } => "{0} x {|v| <= 1}".to_string(),
            PieceSet::NormRays { .. } => "{(t*u, u) : t >= 0, |u| = 1}".to_string(),
            PieceSet::Spectral { mult, rank, .. } => format!(
                "graph points with top-eigenvalue multiplicity >= {mult} and subgradient rank <= {rank}"
            ),
            PieceSet::Product { factors } => {
                let parts: Vec<String> =
                    factors.iter().map(|f| format!("[{}]", f.describe())).collect();
                parts.join(" (x) ")
            }
        }
    }
}

fn factor_queries<'a>(
    factors: &'a [GraphPiece],
    p: &[f64],
) -> impl Iterator<Item = (&'a GraphPiece, Vec<f64>)> {
    let m = p.len() / 2;
    let mut out = Vec::with_capacity(factors.len());
    let mut offset = 0;
    for factor in factors {
        let fm = factor.dim() / 2;
        let mut fp = Vec::with_capacity(2 * fm);
        fp.extend_from_slice(&p[offset..offset + fm]);
        fp.extend_from_slice(&p[m + offset..m + offset + fm]);
        out.push((factor, fp));
        offset += fm;
    }
    out.into_iter()
}

fn curve_value(alpha: f64, branch: CurveBranch, s: f64) -> f64 {
    match branch {
        CurveBranch::Negative => -alpha * exp(alpha * s),
        CurveBranch::Positive => alpha * exp(-alpha * s),
    }
}

fn curve_slope(alpha: f64, branch: CurveBranch, s: f64) -> f64 {
    match branch {
        CurveBranch::Negative => -alpha * alpha * exp(alpha * s),
        CurveBranch::Positive => -alpha * alpha * exp(-alpha * s),
    }
}

/// Distance and argmin parameter for the 1-D projection onto a curve branch:
/// 64-point grid seeding plus safeguarded Newton on the stationarity
/// equation, tolerance 1e-10 on the parameter.
fn curve_project(alpha: f64, branch: CurveBranch, c: f64, v: f64) -> (f64, f64) {
    // domain and search window
    let (lo, hi) = match branch {
        CurveBranch::Negative => {
            let reach = v.abs() + alpha + 1.0;
            ((c.min(0.0) - reach), 0.0)
        }
        CurveBranch::Positive => {
            let reach = v.abs() + alpha + 1.0;
            (0.0, c.max(0.0) + reach)
        }
    };

    let phi = |s: f64| -> f64 {
        let dv = curve_value(alpha, branch, s) - v;
        (s - c) * (s - c) + dv * dv
    };
    let dphi = |s: f64| -> f64 {
        2.0 * (s - c) + 2.0 * (curve_value(alpha, branch, s) - v) * curve_slope(alpha, branch, s)
    };

    const GRID: usize = 64;
    let grid: Vec<f64> = (0..=GRID)
        .map(|i| lo + (hi - lo) * i as f64 / GRID as f64)
        .collect();
    let slopes: Vec<f64> = grid.iter().map(|&s| dphi(s)).collect();

    let mut s = grid[0];
    let mut best = phi(s);
    for &g in &grid[1..] {
        let f = phi(g);
        if f < best {
            best = f;
            s = g;
        }
    }

    // polish every bracketed stationary point with safeguarded Newton
    for w in 0..GRID {
        if !(slopes[w] <= 0.0 && slopes[w + 1] >= 0.0) {
            continue;
        }
        let (mut a, mut b) = (grid[w], grid[w + 1]);
        let mut t = 0.5 * (a + b);
        for _ in 0..300 {
            if b - a <= 1e-14 * (1.0 + t.abs()) {
                break;
            }
            let ds = dphi(t);
            if ds == 0.0 {
                break;
            }
            // curvature by central difference of the stationarity residual
            let eps = 1e-6 * (1.0 + t.abs());
            let dd = (dphi(t + eps) - dphi(t - eps)) / (2.0 * eps);
            let mut next = if dd > 0.0 { t - ds / dd } else { f64::NAN };
            if !next.is_finite() || next <= a || next >= b {
                next = 0.5 * (a + b);
            }
            if dphi(next) > 0.0 {
                b = next;
            } else {
                a = next;
            }
            t = next;
        }
        for cand in [t, 0.5 * (a + b)] {
            let f = phi(cand);
            if f < best {
                best = f;
                s = cand;
            }
        }
    }
    (sqrt(best), s)
}

/// Distance and nearest point of the ray bundle `{(t u, u)}`.
///
/// For `n == 1` the bundle is the union of two boxes. Otherwise the optimal
/// `u` lies on the unit circle of `span{c, v}` (the objective is convex in
/// the span coordinates, so the spherical maximum is attained there), and a
/// dense angular grid plus local refinement locates it.
fn rays_project(n: usize, p: &[f64]) -> (f64, Vec<f64>) {
    let (c, v) = p.split_at(n);
    if n == 1 {
        // (-inf, 0] x {-1}  union  [0, inf) x {1}
        let neg = (c[0].min(0.0), -1.0);
        let pos = (c[0].max(0.0), 1.0);
        let d_neg = sqrt((c[0] - neg.0) * (c[0] - neg.0) + (v[0] + 1.0) * (v[0] + 1.0));
        let d_pos = sqrt((c[0] - pos.0) * (c[0] - pos.0) + (v[0] - 1.0) * (v[0] - 1.0));
        return if d_neg <= d_pos {
            (d_neg, vec![neg.0, neg.1])
        } else {
            (d_pos, vec![pos.0, pos.1])
        };
    }

    // orthonormal basis of span{c, v}
    let cn = norm2(c);
    let e1: Vec<f64> = if cn > 1e-14 {
        c.iter().map(|x| x / cn).collect()
    } else {
        let vn = norm2(v);
        if vn > 1e-14 {
            v.iter().map(|x| x / vn).collect()
        } else {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }
    };
    let ve1 = crate::linalg::dot(v, &e1);
    let mut w: Vec<f64> = v.iter().zip(&e1).map(|(x, e)| x - ve1 * e).collect();
    let wn = norm2(&w);
    let e2: Vec<f64> = if wn > 1e-12 {
        w.iter().map(|x| x / wn).collect()
    } else {
        // any unit vector orthogonal to e1
        let mut pick = 0;
        for i in 1..n {
            if e1[i].abs() < e1[pick].abs() {
                pick = i;
            }
        }
        w = vec![0.0; n];
        w[pick] = 1.0;
        let pe1 = e1[pick];
        for i in 0..n {
            w[i] -= pe1 * e1[i];
        }
        let nn = norm2(&w);
        w.iter().map(|x| x / nn).collect()
    };

    let a = crate::linalg::dot(c, &e1);
    let b = crate::linalg::dot(c, &e2);
    let pq = (crate::linalg::dot(v, &e1), crate::linalg::dot(v, &e2));

    // maximize max(a cos + b sin, 0)^2 + 2 (p cos + q sin)
    let score = |theta: f64| -> f64 {
        let (ct, st) = (cos(theta), sin(theta));
        let proj = (a * ct + b * st).max(0.0);
        proj * proj + 2.0 * (pq.0 * ct + pq.1 * st)
    };
    let dscore = |theta: f64| -> f64 {
        let (ct, st) = (cos(theta), sin(theta));
        let proj = a * ct + b * st;
        let dproj = -a * st + b * ct;
        let kink = if proj > 0.0 { 2.0 * proj * dproj } else { 0.0 };
        kink + 2.0 * (-pq.0 * st + pq.1 * ct)
    };

    const GRID: usize = 128;
    let mut best_t = 0.0;
    let mut best = score(0.0);
    for i in 1..GRID {
        let t = core::f64::consts::TAU * i as f64 / GRID as f64;
        let s = score(t);
        if s > best {
            best = s;
            best_t = t;
        }
    }
    // polish stationary points near the best grid point: scan the widened
    // window for sign changes of the derivative (+ to -) and bisect each
    let h = core::f64::consts::TAU / GRID as f64;
    let (w_lo, w_hi) = (best_t - h, best_t + h);
    const SUB: usize = 32;
    let mut theta = best_t;
    let mut prev_t = w_lo;
    let mut prev_d = dscore(w_lo);
    for i in 1..=SUB {
        let t = w_lo + (w_hi - w_lo) * i as f64 / SUB as f64;
        let d = dscore(t);
        if prev_d >= 0.0 && d <= 0.0 {
            let (mut aa, mut bb) = (prev_t, t);
            for _ in 0..200 {
                if bb - aa <= 1e-15 {
                    break;
                }
                let mid = 0.5 * (aa + bb);
                if dscore(mid) >= 0.0 {
                    aa = mid;
                } else {
                    bb = mid;
                }
            }
            let cand = 0.5 * (aa + bb);
            if score(cand) > best {
                best = score(cand);
                theta = cand;
            }
        }
        prev_t = t;
        prev_d = d;
    }

    let (ct, st) = (cos(theta), sin(theta));
    let u: Vec<f64> = e1
        .iter()
        .zip(&e2)
        .map(|(x1v, x2v)| ct * x1v + st * x2v)
        .collect();
    let t = crate::linalg::dot(c, &u).max(0.0);
    let mut point: Vec<f64> = u.iter().map(|ui| t * ui).collect();
    point.extend_from_slice(&u);
    let mut dist2 = 0.0;
    for i in 0..n {
        dist2 += (c[i] - point[i]) * (c[i] - point[i]);
        dist2 += (v[i] - point[n + i]) * (v[i] - point[n + i]);
    }
    (sqrt(dist2), point)
}

/// A finite family of closed pieces covering a subdifferential graph.
#[derive(Clone, Debug)]
pub struct GraphDecomposition {
    pieces: Vec<GraphPiece>,
}

impl GraphDecomposition {
    pub fn new(pieces: Vec<GraphPiece>) -> Self {
        GraphDecomposition { pieces }
    }

    pub fn pieces(&self) -> &[GraphPiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece_ids(&self) -> Vec<String> {
        self.pieces.iter().map(|p| p.id().to_string()).collect()
    }

    pub fn piece_by_id(&self, id: &str) -> Option<&GraphPiece> {
        self.pieces.iter().find(|p| p.id() == id)
    }

    pub fn distances(&self, p: &[f64]) -> Result<Vec<f64>, GraphError> {
        self.pieces.iter().map(|g| g.distance(p)).collect()
    }

    /// Minimum distance over pieces and the id of the best piece.
    pub fn min_distance(&self, p: &[f64]) -> Result<(f64, String), GraphError> {
        let mut best = f64::INFINITY;
        let mut best_id = String::new();
        for piece in &self.pieces {
            let d = piece.distance(p)?;
            if d < best {
                best = d;
                best_id = piece.id().to_string();
            }
        }
        Ok((best, best_id))
    }
}

const MAX_PRODUCT_PIECES: usize = 10_000;

/// Cartesian product of decompositions with interleaved coordinates:
/// the result's pieces are all cross products of factor pieces and the
/// squared distance adds over factors.
pub fn product_decomposition(
    factors: &[GraphDecomposition],
) -> Result<GraphDecomposition, GraphError> {
    if factors.is_empty() {
        return Err(GraphError::EmptyProduct);
    }
    if factors.len() == 1 {
        return Ok(factors[0].clone());
    }
    let count: usize = factors.iter().map(|f| f.len()).product();
    if count > MAX_PRODUCT_PIECES {
        return Err(GraphError::TooManyPieces(count));
    }
    let total_dim: usize = factors.iter().map(|f| f.pieces()[0].dim()).sum();

    let mut pieces: Vec<Vec<&GraphPiece>> = vec![Vec::new()];
    for f in factors {
        let mut next = Vec::with_capacity(pieces.len() * f.len());
        for combo in &pieces {
            for piece in f.pieces() {
                let mut c = combo.clone();
                c.push(piece);
                next.push(c);
            }
        }
        pieces = next;
    }

    let out = pieces
        .into_iter()
        .map(|combo| {
            let id = combo
                .iter()
                .map(|p| p.id().to_string())
                .collect::<Vec<_>>()
                .join("x");
            GraphPiece::new(
                id,
                total_dim,
                PieceSet::Product {
                    factors: combo.into_iter().cloned().collect(),
                },
            )
        })
        .collect();
    Ok(GraphDecomposition::new(out))
}
