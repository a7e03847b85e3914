//! Vertex enumeration for small polytopes in standard form
//! `{z : E z = f, z >= 0}` by exhaustive basis enumeration.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{norm2, norm_inf, sub, Matrix, PivotedQr};

#[derive(Clone, Debug, PartialEq)]
pub enum PolytopeError {
    /// The number of basis candidates exceeds the enumeration budget.
    TooManyBases { candidates: usize, limit: usize },
}

impl core::fmt::Display for PolytopeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PolytopeError::TooManyBases { candidates, limit } => write!(
                f,
                "basis enumeration would visit {candidates} column subsets (limit {limit})"
            ),
        }
    }
}

impl core::error::Error for PolytopeError {}

const BASIS_LIMIT: usize = 2_000_000;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Enumerate all vertices of `{z >= 0 : E z = f}`.
///
/// A vertex is a basic feasible solution: a column subset of size `rank(E)`
/// with independent columns whose unique solution is nonnegative and matches
/// `f`. Vertices are deduplicated at `1e-9` in the max norm and returned in
/// lexicographically increasing order.
pub fn standard_form_vertices(
    e: &Matrix,
    f: &[f64],
    feas_tol: f64,
) -> Result<Vec<Vec<f64>>, PolytopeError> {
    let ncols = e.ncols();
    let rank = PivotedQr::new(e).rank();

    // trivial cases
    if ncols == 0 || rank == 0 {
        if norm_inf(f) <= feas_tol && ncols > 0 {
            return Ok(vec![vec![0.0; ncols]]);
        }
        if norm_inf(f) <= feas_tol && ncols == 0 {
            return Ok(Vec::new());
        }
        return Ok(Vec::new());
    }

    let candidates = binomial(ncols, rank);
    if candidates > BASIS_LIMIT {
        return Err(PolytopeError::TooManyBases {
            candidates,
            limit: BASIS_LIMIT,
        });
    }

    let scale = 1.0 + norm_inf(f);
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut subset: Vec<usize> = (0..rank).collect();
    loop {
        // solve E_B z_B = f for this basis
        let eb = Matrix::from_fn(e.nrows(), rank, |i, j| e[(i, subset[j])]);
        let qr = PivotedQr::new(&eb);
        if qr.rank() == rank {
            let zb = qr.solve_lstsq(f);
            let resid = norm2(&sub(&eb.matvec(&zb), f));
            if resid <= feas_tol * scale && zb.iter().all(|&z| z >= -feas_tol) {
                let mut full = vec![0.0; ncols];
                for (slot, &col) in subset.iter().enumerate() {
                    full[col] = zb[slot].max(0.0);
                }
                if !vertices
                    .iter()
                    .any(|v| norm_inf(&sub(v, &full)) <= 1e-9 * scale)
                {
                    vertices.push(full);
                }
            }
        }

        // next k-subset in lexicographic order
        let mut i = rank;
        loop {
            if i == 0 {
                return finish(vertices);
            }
            i -= 1;
            if subset[i] != i + ncols - rank {
                break;
            }
        }
        subset[i] += 1;
        for j in (i + 1)..rank {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

fn finish(mut vertices: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, PolytopeError> {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_has_unit_vertices() {
        // {z >= 0 : z1 + z2 + z3 = 1}
        let e = Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]);
        let verts = standard_form_vertices(&e, &[1.0], 1e-9).unwrap();
        assert_eq!(verts.len(), 3);
        for v in &verts {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(v.iter().filter(|&&z| z > 0.5).count(), 1);
        }
    }

    #[test]
    fn infeasible_system_has_no_vertices() {
        // z >= 0, z1 + z2 = -1
        let e = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let verts = standard_form_vertices(&e, &[-1.0], 1e-9).unwrap();
        assert!(verts.is_empty());
    }

    #[test]
    fn segment_endpoints() {
        // 2 z1 + 4 z2 = 1, z >= 0: endpoints (1/2, 0) and (0, 1/4)
        let e = Matrix::from_rows(&[vec![2.0, 4.0]]);
        let verts = standard_form_vertices(&e, &[1.0], 1e-9).unwrap();
        assert_eq!(verts.len(), 2);
        assert!((verts[0][0] - 0.0).abs() < 1e-12 && (verts[0][1] - 0.25).abs() < 1e-12);
        assert!((verts[1][0] - 0.5).abs() < 1e-12 && (verts[1][1] - 0.0).abs() < 1e-12);
    }
}
