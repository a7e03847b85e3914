//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p actid-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::time::Instant;

use actid_core::demos;
use actid_core::identify::{
    certify_sufficient_index, check_transversality, manifold_reveal, multiplier_set_vertices,
    nlp_index_set, q_delta, reveal, IdentifyError, IterateRecord, RevealParams,
};
use actid_core::linalg::{dot, norm2, sub, Matrix, PivotedQr};
use actid_core::map::jacobian_fd_check;
use actid_core::outer::OuterFunction;
use actid_core::prox::{run_prox_sequence, MuSchedule};
use actid_core::qp::{solve_qp, QpProblem};
use actid_core::spectral::{svec, SpectralPoint};
use actid_core::Rng;

fn pass(n: usize, what: &str) {
    println!("acceptance: criterion {n} PASS - {what}");
}

// ---------------------------------------------------------------------------
// criterion 1: two-circle reveal
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_two_circle_reveal() {
    let started = Instant::now();
    let problem = demos::two_circle();
    let schedule = demos::two_circle_schedule(16);
    let run = run_prox_sequence(&problem, &schedule, &MuSchedule::Constant(1.0)).unwrap();
    let decomposition = problem.outer().decomposition().unwrap();
    let records = IterateRecord::from_run(&run);
    let params = RevealParams::new(0.05, 0.01, 5).unwrap();
    let report = reveal(&problem, &decomposition, &records, &params).unwrap();

    assert_eq!(
        report.tail_revealed,
        vec!["G3".to_string(), "G4".to_string()],
        "tail summary must be exactly {{G3, G4}}"
    );
    let g2 = report.piece_ids.iter().position(|id| id == "G2").unwrap();
    let tail_start = report.iterates.len() - 5;
    let min_g2 = report.iterates[tail_start..]
        .iter()
        .map(|a| a.distances[g2])
        .fold(f64::INFINITY, f64::min);
    assert!(min_g2 >= 0.2, "distance to G2 on the tail: {min_g2}");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    pass(1, "reveal = {G3, G4}, G2 separated by >= 0.2, under 1 second");
}

// ---------------------------------------------------------------------------
// criterion 2: multiplier segment endpoints
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_multiplier_segment_endpoints() {
    let problem = demos::two_circle();
    let vertices = multiplier_set_vertices(&problem, &[1.0, 0.0]).unwrap();
    assert_eq!(vertices.len(), 2);
    let expected = [vec![1.0, 0.0, 0.25], vec![1.0, 0.5, 0.0]];
    for want in &expected {
        let hit = vertices
            .iter()
            .any(|v| v.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-9));
        assert!(hit, "missing vertex {want:?} in {vertices:?}");
    }
    pass(2, "multiplier vertices are (1, 1/2, 0) and (1, 0, 1/4) to 1e-9");
}

// ---------------------------------------------------------------------------
// criterion 3: prox-step asymptotics
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_prox_step_asymptotics() {
    let problem = demos::two_circle();
    let schedule = demos::two_circle_schedule(16);
    let run = run_prox_sequence(&problem, &schedule, &MuSchedule::Constant(1.0)).unwrap();

    for (r, step) in run.steps.iter().enumerate() {
        let eps = 0.1 * 0.5f64.powi(r as i32);
        // d2 vanishes exactly: the subproblem decouples in the second coordinate
        assert_eq!(step.d[1], 0.0, "d2 at r={r}");
        // second-order coefficient 1/4 across the whole schedule
        let coeff = (step.d[0] - eps) / (eps * eps);
        assert!((coeff - 0.25).abs() <= 2e-2, "r={r}: (d1-eps)/eps^2 = {coeff}");
        // linearized second component carries the derived -eps^2/2 value
        let expect_c2 = -0.5 * eps * eps;
        assert!(
            (step.c_hat[1] - expect_c2).abs() <= 0.5 * eps * eps * eps + 1e-12,
            "r={r}: c_hat[1] = {} vs {expect_c2}",
            step.c_hat[1]
        );
    }
    // first-order ratio tends to one
    for (r, step) in run.steps.iter().enumerate().skip(12) {
        let eps = 0.1 * 0.5f64.powi(r as i32);
        assert!(
            (step.d[0] / eps - 1.0).abs() <= 1e-3,
            "r={r}: d1/eps = {}",
            step.d[0] / eps
        );
        assert!(
            (step.v[2] - 0.25).abs() <= 1e-3,
            "r={r}: recovered v3 = {}",
            step.v[2]
        );
    }
    pass(3, "d1 = eps + eps^2/4 + o(eps^2), d2 = 0, v3 -> 1/4, c_hat2 = -eps^2/2");
}

// ---------------------------------------------------------------------------
// criterion 4: QP oracle equivalence
// ---------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting, independent of the library's
/// QR path. Returns `None` on a (near-)singular system.
fn lu_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in (row + 1)..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Brute-force strictly convex QP: enumerate every active set, solve the
/// equality-constrained KKT system, filter primal/dual feasibility, and
/// take the best objective.
fn oracle_qp(p: &QpProblem) -> Option<(f64, Vec<f64>)> {
    let n = p.g.len();
    let n_eq = p.a_eq.nrows();
    let n_in = p.a_in.nrows();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for mask in 0..(1usize << n_in) {
        let active: Vec<usize> = (0..n_in).filter(|j| mask & (1 << j) != 0).collect();
        let rows = n + n_eq + active.len();
        let mut sys = vec![vec![0.0; rows]; rows];
        let mut rhs = vec![0.0; rows];
        for i in 0..n {
            for j in 0..n {
                sys[i][j] = p.h[(i, j)];
            }
            rhs[i] = -p.g[i];
        }
        for (slot, i) in (0..n_eq).enumerate() {
            for j in 0..n {
                sys[n + slot][j] = p.a_eq[(i, j)];
                sys[j][n + slot] = p.a_eq[(i, j)];
            }
            rhs[n + slot] = p.b_eq[i];
        }
        for (slot, &ji) in active.iter().enumerate() {
            let at = n + n_eq + slot;
            for j in 0..n {
                sys[at][j] = p.a_in[(ji, j)];
                sys[j][at] = p.a_in[(ji, j)];
            }
            rhs[at] = p.b_in[ji];
        }
        let Some(sol) = lu_solve(&sys, &rhs) else {
            continue;
        };
        let d = &sol[..n];
        // primal feasibility on inactive rows
        let feasible = (0..n_in).all(|j| {
            let val: f64 = (0..n).map(|k| p.a_in[(j, k)] * d[k]).sum();
            val <= p.b_in[j] + 1e-9
        });
        if !feasible {
            continue;
        }
        // dual feasibility on active rows
        let duals = &sol[n + n_eq..];
        if duals.iter().any(|&mu| mu < -1e-9) {
            continue;
        }
        let obj = p.objective(d);
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, d.to_vec()));
        }
    }
    best
}

#[test]
fn criterion_4_qp_oracle_equivalence() {
    let mut rng = Rng::new(20240816);
    let mut solved = 0usize;
    while solved < 200 {
        let n = 1 + rng.below(6);
        let n_in = rng.below(9).min(8);
        let n_eq = if n >= 2 && rng.chance(0.3) { 1 } else { 0 };

        // strictly convex H = B^T B + diag(0.5 + u)
        let b = Matrix::from_fn(n, n, |_, _| rng.gauss() * 0.5);
        let mut h = b.transpose().matmul(&b);
        for i in 0..n {
            h[(i, i)] += 0.5 + rng.uniform();
        }
        let g: Vec<f64> = rng.gauss_vec(n);
        let z0: Vec<f64> = rng.gauss_vec(n);
        let a_in = Matrix::from_fn(n_in, n, |_, _| rng.gauss());
        let b_in: Vec<f64> = (0..n_in)
            .map(|j| dot(a_in.row(j), &z0) + rng.uniform() * 2.0)
            .collect();
        let a_eq = Matrix::from_fn(n_eq, n, |_, _| rng.gauss());
        let b_eq: Vec<f64> = (0..n_eq).map(|i| dot(a_eq.row(i), &z0)).collect();

        let qp = QpProblem {
            h,
            g,
            a_eq,
            b_eq,
            a_in,
            b_in,
        };
        let Some((oracle_obj, _)) = oracle_qp(&qp) else {
            continue; // oracle hit a degenerate KKT system; draw another
        };
        let sol = solve_qp(&qp).expect("solver failed on a feasible strictly convex QP");
        let obj = qp.objective(&sol.d);
        assert!(
            (obj - oracle_obj).abs() <= 1e-8 * (1.0 + oracle_obj.abs()),
            "objective {obj} vs oracle {oracle_obj}"
        );
        assert!(sol.kkt_residual <= 1e-8, "KKT residual {}", sol.kkt_residual);
        solved += 1;
    }
    pass(4, "200 random strictly convex QPs match the active-set enumeration oracle");
}

// ---------------------------------------------------------------------------
// criterion 5: spectral distance exactness
// ---------------------------------------------------------------------------

fn random_orthogonal(k: usize, rng: &mut Rng) -> Matrix {
    let g = Matrix::from_fn(k, k, |_, _| rng.gauss());
    PivotedQr::new(&g).q().clone()
}

/// A random point of the piece `G_{m,r}`: multiplicity >= m, rank <= r.
fn sample_piece_point(k: usize, m: usize, r: usize, rng: &mut Rng) -> Vec<f64> {
    let u = random_orthogonal(k, rng);
    let mult = m + rng.below(k - m + 1);
    let mut x = rng.gauss_vec(k);
    x.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = x[0];
    for xi in x[..mult].iter_mut() {
        *xi = top;
    }
    let support = 1 + rng.below(r);
    let weights = rng.simplex(support);
    let mut y = vec![0.0; k];
    for (slot, w) in weights.iter().enumerate() {
        y[slot] = *w; // inside the top block since support <= r <= m <= mult
    }
    let dx = Matrix::from_fn(k, k, |i, j| if i == j { x[i] } else { 0.0 });
    let dy = Matrix::from_fn(k, k, |i, j| if i == j { y[i] } else { 0.0 });
    let xm = u.transpose().matmul(&dx).matmul(&u);
    let ym = u.transpose().matmul(&dy).matmul(&u);
    let mut pair = svec(&xm);
    pair.extend(svec(&ym));
    pair
}

#[test]
fn criterion_5_spectral_distance_exactness() {
    let k = 3;
    let mut rng = Rng::new(5);
    let h = OuterFunction::max_eig(k);
    for _case in 0..100 {
        let (c, v) = h.sample_graph_point(&mut rng);
        let mut pair = c.clone();
        pair.extend_from_slice(&v);
        let point = SpectralPoint::from_svec_pair(&pair, k).unwrap();
        for m in 1..=k {
            for r in 1..=m {
                let proj = point.piece_distance(m, r).unwrap();
                // the projected pair is a graph point of the piece
                let (xt, yt) = proj.projected.matrices();
                let reparsed = SpectralPoint::try_new(&xt, &yt)
                    .expect("projected pair lies on the graph");
                let re = reparsed.piece_distance(m, r).unwrap();
                assert!(
                    re.distance <= 1e-10,
                    "projected point misses G_{{{m},{r}}} by {}",
                    re.distance
                );
                // lower-bound sandwich against sampled piece points
                for _ in 0..500 {
                    let sample = sample_piece_point(k, m, r, &mut rng);
                    let gap = norm2(&sub(&pair, &sample));
                    assert!(
                        proj.distance <= gap + 1e-9,
                        "formula distance {} beats a real piece point at {gap}",
                        proj.distance
                    );
                }
            }
        }
    }
    pass(5, "spectral piece distance is a certified lower bound with on-piece projections");
}

// ---------------------------------------------------------------------------
// criterion 6: decomposition coverage
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_decomposition_coverage() {
    let catalog = vec![
        OuterFunction::indicator_nonneg(),
        OuterFunction::abs(),
        OuterFunction::pos(),
        OuterFunction::exp_penalty(1.0),
        OuterFunction::l1_two(),
        OuterFunction::euclid_norm(2),
        OuterFunction::euclid_norm(3),
        OuterFunction::nlp(0, 2),
        OuterFunction::nlp(1, 2),
        OuterFunction::l1_exact_penalty(1, 1, 0.75),
        OuterFunction::max_eig(2),
        OuterFunction::max_eig(3),
    ];
    let mut rng = Rng::new(6);
    for h in &catalog {
        let d = h.decomposition().unwrap();
        for _ in 0..1000 {
            let (c, v) = h.sample_graph_point(&mut rng);
            let mut p = c;
            p.extend_from_slice(&v);
            let (dist, _) = d.min_distance(&p).unwrap();
            assert!(dist <= 1e-8, "{}: coverage distance {dist}", h.name());
        }
    }
    assert_eq!(OuterFunction::abs().decomposition().unwrap().len(), 3);
    assert_eq!(OuterFunction::pos().decomposition().unwrap().len(), 3);
    assert_eq!(OuterFunction::l1_two().decomposition().unwrap().len(), 9);
    pass(6, "1000-sample coverage for every catalog h; piece counts 3/3/9");
}

// ---------------------------------------------------------------------------
// criterion 7: index-set identification along the prox run
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_index_set_identification() {
    let problem = demos::two_circle();
    let schedule = demos::two_circle_schedule(16);
    let run = run_prox_sequence(&problem, &schedule, &MuSchedule::Constant(1.0)).unwrap();

    for (r, step) in run.steps.iter().enumerate() {
        let eps_step = 0.1 * 0.5f64.powi(r as i32);
        let q_lin = &step.c_hat[1..]; // linearized inequality values

        // schedule eps_r = 10 * eps_step
        let j = nlp_index_set(q_lin, 10.0 * eps_step);
        if r >= 3 {
            let verdict = certify_sufficient_index(&problem, &j, 1e-8).unwrap();
            assert!(verdict.sufficient, "r={r}: J={j:?} not sufficient");
        }

        // fixed eps_r = 1e-6: the first circle drops out while
        // |c_hat_2| = eps^2/2 exceeds the tolerance
        if r <= 6 {
            let j = nlp_index_set(q_lin, 1e-6);
            assert_eq!(j, vec![2], "r={r}");
            let verdict = certify_sufficient_index(&problem, &j, 1e-8).unwrap();
            assert!(verdict.sufficient, "r={r}: J={{2}} not sufficient");
            assert!((verdict.mu[1] - 0.25).abs() <= 1e-9);
        }
    }
    pass(7, "J(r) certified sufficient (segment for 10*eps, {2} for 1e-6)");
}

// ---------------------------------------------------------------------------
// criterion 8: transversality / MFCQ
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_transversality_and_vertex_errors() {
    let two_circle = demos::two_circle();
    assert!(check_transversality(&two_circle, &[1.0, 0.0]).unwrap());

    let opposing = demos::opposing_gradients();
    assert!(!check_transversality(&opposing, &[0.0]).unwrap());

    // vertex enumeration errs exactly when the qualification fails
    assert!(multiplier_set_vertices(&two_circle, &[1.0, 0.0]).is_ok());
    assert!(matches!(
        multiplier_set_vertices(&opposing, &[0.0]),
        Err(IdentifyError::UnboundedMultiplierSet)
    ));
    pass(8, "transversality true/false as expected; enumeration errs without MFCQ");
}

// ---------------------------------------------------------------------------
// criterion 9: property suites
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_property_suites() {
    // q_delta idempotence
    let mut rng = Rng::new(9);
    for _ in 0..200 {
        let q: Vec<f64> = (0..4).map(|_| rng.range(-2.0, 2.0)).collect();
        let delta = rng.range(0.0, 1.0);
        let once = q_delta(&q, delta);
        assert_eq!(q_delta(&once, delta), once);
    }

    // sufficiency monotone under support enlargement (within the active set)
    let problem = demos::two_circle();
    for (small, large) in [(vec![2usize], vec![1usize, 2]), (vec![1], vec![1, 2])] {
        let a = certify_sufficient_index(&problem, &small, 1e-8).unwrap();
        let b = certify_sufficient_index(&problem, &large, 1e-8).unwrap();
        assert!(b.multiplier_value <= a.multiplier_value + 1e-12);
        if a.sufficient {
            assert!(b.sufficient);
        }
    }

    // Jacobian matches finite differences on every demo map
    let mut rng = Rng::new(99);
    for (p, dim) in [
        (demos::two_circle(), 2usize),
        (demos::abs_1d(), 1),
        (demos::l1_2d(), 2),
        (demos::opposing_gradients(), 1),
    ] {
        for _ in 0..5 {
            let x: Vec<f64> = (0..dim).map(|_| rng.range(-1.0, 1.0)).collect();
            let err = jacobian_fd_check(p.map(), &x).unwrap();
            assert!(err <= 1e-5, "FD error {err}");
        }
    }

    // the abs-1d demo identifies its manifold on the tail
    let p = demos::abs_1d();
    let run = run_prox_sequence(&p, &demos::abs_1d_schedule(12), &MuSchedule::Constant(1.0))
        .unwrap();
    let records = IterateRecord::from_run(&run);
    let m = manifold_reveal(&p, &records, 5, 1e-8).unwrap();
    assert!(m.tail_identified);

    pass(9, "q_delta idempotent, sufficiency monotone, FD <= 1e-5, manifold identified");
}
