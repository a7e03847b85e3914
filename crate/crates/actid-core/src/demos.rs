//! Built-in demonstration problems with known critical points.

use alloc::boxed::Box;
use alloc::vec;

use crate::map::ExprMap;
use crate::outer::OuterFunction;
use crate::problem::CompositeProblem;
use crate::prox::Schedule;

/// Maximize `x1` over the intersection of the unit disc and the disc of
/// radius 2 centered at `(-1, 0)`, encoded as an NLP composite. The unique
/// minimizer is `(1, 0)` and both constraints are active there with a
/// segment of multipliers.
pub fn two_circle() -> CompositeProblem {
    let map = ExprMap::parse(&["-x1", "x1^2+x2^2-1", "(x1+1)^2+x2^2-4"], 2).unwrap();
    CompositeProblem::new(
        Box::new(map),
        OuterFunction::nlp(0, 2),
        Some(vec![1.0, 0.0]),
    )
    .unwrap()
}

pub fn two_circle_schedule(steps: usize) -> Schedule {
    Schedule::Radial {
        base: vec![1.0, 0.0],
        direction: vec![-1.0, 0.0],
        eps0: 0.1,
        shrink: 0.5,
        steps,
    }
}

/// `min |x^2 - 1|` approached near the root `x = 1`; the prox step saturates
/// the kink, so linearized points sit exactly on the manifold `{0}`.
pub fn abs_1d() -> CompositeProblem {
    let map = ExprMap::parse(&["x1^2-1"], 1).unwrap();
    CompositeProblem::new(Box::new(map), OuterFunction::abs(), Some(vec![1.0])).unwrap()
}

pub fn abs_1d_schedule(steps: usize) -> Schedule {
    Schedule::Radial {
        base: vec![1.0],
        direction: vec![1.0],
        eps0: 0.1,
        shrink: 0.5,
        steps,
    }
}

/// Planar l1 penalty `|x1 + x2 - 1| + max(x1 - x2, 0)` with the critical
/// point `(1/2, 1/2)` where both terms sit at their kinks and the zero
/// multiplier certifies criticality.
pub fn l1_2d() -> CompositeProblem {
    let map = ExprMap::parse(&["x1+x2-1", "x1-x2"], 2).unwrap();
    CompositeProblem::new(Box::new(map), OuterFunction::l1_two(), Some(vec![0.5, 0.5])).unwrap()
}

pub fn l1_2d_schedule(steps: usize) -> Schedule {
    Schedule::Radial {
        base: vec![0.5, 0.5],
        direction: vec![1.0, 0.0],
        eps0: 0.1,
        shrink: 0.5,
        steps,
    }
}

/// Degenerate instance with opposing constraint gradients `q1 = x`,
/// `q2 = -x` at the feasible point `0`: the constraint qualification fails
/// and the multiplier set is an unbounded ray.
pub fn opposing_gradients() -> CompositeProblem {
    let map = ExprMap::parse(&["x1", "x1", "-x1"], 1).unwrap();
    CompositeProblem::new(Box::new(map), OuterFunction::nlp(0, 2), Some(vec![0.0])).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::jacobian_fd_check;

    #[test]
    fn demo_maps_pass_fd_check() {
        for (p, x) in [
            (two_circle(), vec![0.7, -0.3]),
            (abs_1d(), vec![1.3]),
            (l1_2d(), vec![0.2, 0.9]),
            (opposing_gradients(), vec![0.4]),
        ] {
            let err = jacobian_fd_check(p.map(), &x).unwrap();
            assert!(err <= 1e-5, "fd error {err}");
        }
    }
}
