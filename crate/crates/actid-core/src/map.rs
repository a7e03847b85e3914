//! Smooth inner maps `c : R^n -> R^m` with exact Jacobians.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{EvalError, Expression};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub enum MapError {
    DimensionMismatch { expected: usize, got: usize },
    Eval(EvalError),
    NonFinitePoint,
}

impl core::fmt::Display for MapError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MapError::DimensionMismatch { expected, got } => {
                write!(f, "point has {got} coordinates, map expects {expected}")
            }
            MapError::Eval(e) => write!(f, "map evaluation failed: {e}"),
            MapError::NonFinitePoint => write!(f, "point has non-finite coordinates"),
        }
    }
}

impl core::error::Error for MapError {}

impl From<EvalError> for MapError {
    fn from(e: EvalError) -> Self {
        MapError::Eval(e)
    }
}

/// A continuously differentiable map with value and Jacobian oracles.
///
/// The Jacobian is the `m x n` matrix whose rows are the component
/// gradients, so the adjoint applied to `v` is `J^T v`.
pub trait SmoothMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, MapError>;
    fn jacobian(&self, x: &[f64]) -> Result<Matrix, MapError>;

    /// `grad c(x)^* v = J(x)^T v`.
    fn adjoint_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, MapError> {
        if v.len() != self.output_dim() {
            return Err(MapError::DimensionMismatch {
                expected: self.output_dim(),
                got: v.len(),
            });
        }
        Ok(self.jacobian(x)?.tr_matvec(v))
    }
}

fn check_point(x: &[f64], n: usize) -> Result<(), MapError> {
    if x.len() != n {
        return Err(MapError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(MapError::NonFinitePoint);
    }
    Ok(())
}

/// An inner map assembled from one parsed expression per component.
#[derive(Clone, Debug)]
pub struct ExprMap {
    components: Vec<Expression>,
    nvars: usize,
}

impl ExprMap {
    pub fn new(components: Vec<Expression>) -> Self {
        let nvars = components.first().map_or(0, |e| e.nvars());
        assert!(
            components.iter().all(|e| e.nvars() == nvars),
            "all components must share the variable count"
        );
        ExprMap { components, nvars }
    }

    /// Parse each source string over `x1..x{nvars}`.
    pub fn parse(sources: &[&str], nvars: usize) -> Result<Self, crate::expr::ParseError> {
        let components = sources
            .iter()
            .map(|s| crate::expr::parse_expression(s, nvars))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExprMap { components, nvars })
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn describe(&self) -> Vec<String> {
        self.components.iter().map(|e| format!("{e}")).collect()
    }
}

impl SmoothMap for ExprMap {
    fn input_dim(&self) -> usize {
        self.nvars
    }

    fn output_dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, MapError> {
        check_point(x, self.nvars)?;
        self.components
            .iter()
            .map(|e| e.eval(x).map_err(MapError::from))
            .collect()
    }

    fn jacobian(&self, x: &[f64]) -> Result<Matrix, MapError> {
        check_point(x, self.nvars)?;
        let mut rows = Vec::with_capacity(self.components.len());
        for e in &self.components {
            let (_, g) = e.eval_with_gradient(x)?;
            rows.push(g);
        }
        Ok(Matrix::from_rows(&rows))
    }
}

impl SmoothMap for Box<dyn SmoothMap> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, MapError> {
        (**self).eval(x)
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix, MapError> {
        (**self).jacobian(x)
    }
}

/// Maximum relative disagreement between the analytic Jacobian and central
/// finite differences with step `1e-6`, entries scaled by `1 + |entry|`.
pub fn jacobian_fd_check(map: &dyn SmoothMap, x: &[f64]) -> Result<f64, MapError> {
    check_point(x, map.input_dim())?;
    let jac = map.jacobian(x)?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for j in 0..map.input_dim() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let cp = map.eval(&xp)?;
        let cm = map.eval(&xm)?;
        for i in 0..map.output_dim() {
            let fd = (cp[i] - cm[i]) / (2.0 * h);
            let ad = jac[(i, j)];
            let rel = (ad - fd).abs() / (1.0 + ad.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_map_fd_error_tiny() {
        let m = ExprMap::parse(&["x1", "x2", "x3"], 3).unwrap();
        // at the origin the step is applied to exact zeros, so the quotient
        // is exact up to the rounding of the step itself
        let err = jacobian_fd_check(&m, &[0.0, 0.0, 0.0]).unwrap();
        assert!(err <= 1e-12, "identity FD error at origin {err}");
        // away from the origin, cancellation in x+h - (x-h) caps the
        // attainable accuracy near eps*|x|/h
        let err = jacobian_fd_check(&m, &[0.3, -1.2, 5.0]).unwrap();
        assert!(err <= 1e-9, "identity FD error {err}");
    }

    #[test]
    fn two_circle_fd_error_small() {
        let m = ExprMap::parse(&["-x1", "x1^2+x2^2-1", "(x1+1)^2+x2^2-4"], 2).unwrap();
        let err = jacobian_fd_check(&m, &[0.5, 0.5]).unwrap();
        assert!(err <= 1e-5, "two-circle FD error {err}");
    }

    #[test]
    fn polynomial_gradient_exact() {
        let m = ExprMap::parse(&["x1^2+x2^2-1"], 2).unwrap();
        let j = m.jacobian(&[1.0, 0.0]).unwrap();
        assert_eq!(j.row(0), &[2.0, 0.0]);
        let err = jacobian_fd_check(&m, &[1.0, 0.0]).unwrap();
        assert!(err <= 1e-7, "polynomial FD error {err}");
    }

    #[test]
    fn dimension_mismatch_detected() {
        let m = ExprMap::parse(&["x1"], 1).unwrap();
        assert!(matches!(
            m.eval(&[1.0, 2.0]),
            Err(MapError::DimensionMismatch { .. })
        ));
        assert!(matches!(m.eval(&[f64::NAN]), Err(MapError::NonFinitePoint)));
        let _ = vec![0.0];
    }
}
