//! Composite problems `min_x h(c(x))` and first-order residual quantities.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::linalg::{norm2, sub};
use crate::map::{MapError, SmoothMap};
use crate::outer::{OuterError, OuterFunction};

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemError {
    DimensionMismatch { expected: usize, got: usize },
    OuterDimension { outer: usize, map: usize },
    Map(MapError),
    Outer(OuterError),
    MissingReference,
}

impl core::fmt::Display for ProblemError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ProblemError::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} coordinates, got {got}")
            }
            ProblemError::OuterDimension { outer, map } => write!(
                f,
                "outer function dimension {outer} does not match map output dimension {map}"
            ),
            ProblemError::Map(e) => write!(f, "{e}"),
            ProblemError::Outer(e) => write!(f, "{e}"),
            ProblemError::MissingReference => {
                write!(f, "operation needs a reference point but none is set")
            }
        }
    }
}

impl core::error::Error for ProblemError {}

impl From<MapError> for ProblemError {
    fn from(e: MapError) -> Self {
        ProblemError::Map(e)
    }
}

impl From<OuterError> for ProblemError {
    fn from(e: OuterError) -> Self {
        ProblemError::Outer(e)
    }
}

/// The pair `(h, c)` plus an optional known critical point used by tests
/// and certification.
pub struct CompositeProblem {
    map: Box<dyn SmoothMap>,
    outer: OuterFunction,
    reference: Option<Vec<f64>>,
}

impl core::fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("n", &self.map.input_dim())
            .field("m", &self.map.output_dim())
            .field("outer", &self.outer.name())
            .field("reference", &self.reference)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        map: Box<dyn SmoothMap>,
        outer: OuterFunction,
        reference: Option<Vec<f64>>,
    ) -> Result<Self, ProblemError> {
        if outer.dim() != map.output_dim() {
            return Err(ProblemError::OuterDimension {
                outer: outer.dim(),
                map: map.output_dim(),
            });
        }
        if let Some(r) = &reference {
            if r.len() != map.input_dim() {
                return Err(ProblemError::DimensionMismatch {
                    expected: map.input_dim(),
                    got: r.len(),
                });
            }
        }
        Ok(CompositeProblem {
            map,
            outer,
            reference,
        })
    }

    pub fn map(&self) -> &dyn SmoothMap {
        &*self.map
    }

    pub fn outer(&self) -> &OuterFunction {
        &self.outer
    }

    pub fn reference(&self) -> Option<&[f64]> {
        self.reference.as_deref()
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.map.output_dim()
    }

    /// `h(c(reference))`, when a reference point is set.
    pub fn reference_value(&self) -> Result<Option<f64>, ProblemError> {
        match &self.reference {
            None => Ok(None),
            Some(r) => {
                let c = self.map.eval(r)?;
                Ok(Some(self.outer.value_with_tol(&c, 1e-9)?))
            }
        }
    }
}

/// A candidate multiplier vector with its diagnostics.
#[derive(Clone, Debug)]
pub struct MultiplierVector {
    pub v: Vec<f64>,
    /// `|grad c(x)^* v|`.
    pub residual: f64,
    pub subdiff_member: bool,
}

impl MultiplierVector {
    /// Assess `v` as a multiplier for the point `x`.
    pub fn assess(
        problem: &CompositeProblem,
        x: &[f64],
        v: &[f64],
        tol: f64,
    ) -> Result<Self, ProblemError> {
        let c = problem.map().eval(x)?;
        let adj = problem.map().adjoint_apply(x, v)?;
        let member = problem.outer().subdiff_membership(&c, v, tol)?;
        Ok(MultiplierVector {
            v: v.to_vec(),
            residual: norm2(&adj),
            subdiff_member: member,
        })
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.subdiff_member && self.residual <= tol
    }
}

/// The three gap quantities of the approximate first-order conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalityResidual {
    /// `|grad c(x)^* v|`.
    pub stationarity: f64,
    /// `|c_hat - c(x)|`.
    pub subproblem_gap: f64,
    /// `|h(c_hat) - h(c(reference))|` when a reference point is known.
    pub value_gap: Option<f64>,
}

/// Evaluate the residual gaps at `(x, c_hat, v)`.
///
/// Subdifferential membership of `v` at `c_hat` is reported separately by
/// [`OuterFunction::subdiff_membership`].
pub fn criticality_residual(
    problem: &CompositeProblem,
    x: &[f64],
    c_hat: &[f64],
    v: &[f64],
) -> Result<CriticalityResidual, ProblemError> {
    let m = problem.output_dim();
    if c_hat.len() != m {
        return Err(ProblemError::DimensionMismatch {
            expected: m,
            got: c_hat.len(),
        });
    }
    if v.len() != m {
        return Err(ProblemError::DimensionMismatch {
            expected: m,
            got: v.len(),
        });
    }
    let c = problem.map().eval(x)?;
    let adj = problem.map().adjoint_apply(x, v)?;
    let value_gap = match problem.reference_value()? {
        None => None,
        Some(ref_val) => {
            let h_hat = problem.outer().value_with_tol(c_hat, 1e-9)?;
            Some((h_hat - ref_val).abs())
        }
    };
    Ok(CriticalityResidual {
        stationarity: norm2(&adj),
        subproblem_gap: norm2(&sub(c_hat, &c)),
        value_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::ExprMap;
    use approx::assert_abs_diff_eq;

    fn two_circle() -> CompositeProblem {
        let map = ExprMap::parse(&["-x1", "x1^2+x2^2-1", "(x1+1)^2+x2^2-4"], 2).unwrap();
        CompositeProblem::new(
            Box::new(map),
            OuterFunction::nlp(0, 2),
            Some(alloc::vec![1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn residual_zero_at_reference_multiplier() {
        let p = two_circle();
        let x = [1.0, 0.0];
        let c = p.map().eval(&x).unwrap();
        assert_abs_diff_eq!(c[0], -1.0);
        assert_abs_diff_eq!(c[1], 0.0);
        assert_abs_diff_eq!(c[2], 0.0);
        let v = [1.0, 0.0, 0.25];
        let r = criticality_residual(&p, &x, &c, &v).unwrap();
        assert_abs_diff_eq!(r.stationarity, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.subproblem_gap, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.value_gap.unwrap(), 0.0, epsilon = 1e-12);
        assert!(MultiplierVector::assess(&p, &x, &v, 1e-8)
            .unwrap()
            .is_valid(1e-8));
    }

    #[test]
    fn zero_vector_is_trivially_stationary() {
        let p = two_circle();
        let x = [0.3, 0.4];
        let c = p.map().eval(&x).unwrap();
        let r = criticality_residual(&p, &x, &c, &[0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.stationarity, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.subproblem_gap, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = two_circle();
        let x = [1.0, 0.0];
        assert!(matches!(
            criticality_residual(&p, &x, &[0.0, 0.0], &[0.0, 0.0, 0.0]),
            Err(ProblemError::DimensionMismatch { .. })
        ));
        let map = ExprMap::parse(&["x1"], 1).unwrap();
        assert!(matches!(
            CompositeProblem::new(Box::new(map), OuterFunction::nlp(0, 2), None),
            Err(ProblemError::OuterDimension { .. })
        ));
    }
}
