//! Cross-module invariants: differentiation against finite differences,
//! parser round trips, piece distance duality, and decomposition coverage.

use actid_core::outer::OuterFunction;
use actid_core::prox::{run_prox_sequence, MuSchedule};
use actid_core::{demos, parse_expression, IterateRecord, RevealParams, Rng};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// random smooth expressions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum TExpr {
    Const(f64),
    Var(usize),
    Neg(Box<TExpr>),
    Add(Box<TExpr>, Box<TExpr>),
    Sub(Box<TExpr>, Box<TExpr>),
    Mul(Box<TExpr>, Box<TExpr>),
    DivSafe(Box<TExpr>, Box<TExpr>),
    Pow(Box<TExpr>, u8),
    ExpVar(usize),
}

impl TExpr {
    fn render(&self) -> String {
        match self {
            TExpr::Const(v) => format!("({v})"),
            TExpr::Var(i) => format!("x{}", i + 1),
            TExpr::Neg(a) => format!("(-{})", a.render()),
            TExpr::Add(a, b) => format!("({}+{})", a.render(), b.render()),
            TExpr::Sub(a, b) => format!("({}-{})", a.render(), b.render()),
            TExpr::Mul(a, b) => format!("({}*{})", a.render(), b.render()),
            // denominator bounded away from zero by construction
            TExpr::DivSafe(a, b) => format!("({}/(({})^2+1))", a.render(), b.render()),
            TExpr::Pow(a, k) => format!("({})^{k}", a.render()),
            TExpr::ExpVar(i) => format!("exp(0.3*x{})", i + 1),
        }
    }
}

fn texpr_strategy(nvars: usize) -> impl Strategy<Value = TExpr> {
    let leaf = prop_oneof![
        (-1.2f64..1.2).prop_map(TExpr::Const),
        (0..nvars).prop_map(TExpr::Var),
        (0..nvars).prop_map(TExpr::ExpVar),
    ];
    leaf.prop_recursive(4, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| TExpr::Neg(Box::new(a))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TExpr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TExpr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TExpr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TExpr::DivSafe(Box::new(a), Box::new(b))),
            (inner.clone(), 0u8..3).prop_map(|(a, k)| TExpr::Pow(Box::new(a), k)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(
        t in texpr_strategy(2),
        x0 in -1.0f64..1.0,
        x1 in -1.0f64..1.0,
    ) {
        let src = t.render();
        let e = parse_expression(&src, 2).unwrap();
        let x = [x0, x1];
        let (_, grad) = e.eval_with_gradient(&x).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / (1.0 + grad[j].abs());
            prop_assert!(rel <= 1e-5, "{src}: grad {} vs fd {fd}", grad[j]);
        }
    }

    #[test]
    fn print_reparse_round_trip(
        t in texpr_strategy(2),
        x0 in -1.0f64..1.0,
        x1 in -1.0f64..1.0,
    ) {
        let src = t.render();
        let e = parse_expression(&src, 2).unwrap();
        let printed = e.to_string();
        let e2 = parse_expression(&printed, 2).unwrap();
        let a = e.eval(&[x0, x1]).unwrap();
        let b = e2.eval(&[x0, x1]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{src} -> {printed}");
    }

    #[test]
    fn q_delta_idempotent(
        q in proptest::collection::vec(-2.0f64..2.0, 0..6),
        delta in 0.0f64..1.0,
    ) {
        let once = actid_core::q_delta(&q, delta);
        let twice = actid_core::q_delta(&once, delta);
        prop_assert_eq!(once, twice);
    }
}

// ---------------------------------------------------------------------------
// piece duality and decomposition coverage
// ---------------------------------------------------------------------------

fn catalog() -> Vec<OuterFunction> {
    vec![
        OuterFunction::indicator_nonneg(),
        OuterFunction::abs(),
        OuterFunction::pos(),
        OuterFunction::exp_penalty(1.0),
        OuterFunction::exp_penalty(2.5),
        OuterFunction::l1_two(),
        OuterFunction::euclid_norm(2),
        OuterFunction::euclid_norm(3),
        OuterFunction::nlp(0, 2),
        OuterFunction::nlp(1, 2),
        OuterFunction::l1_exact_penalty(1, 1, 0.75),
        OuterFunction::max_eig(2),
        OuterFunction::max_eig(3),
    ]
}

/// distance = 0 iff membership, and distance never exceeds the gap to any
/// sampled piece point (it is the exact infimum for every oracle here).
#[test]
fn piece_distance_membership_duality() {
    let mut rng = Rng::new(314159);
    for h in catalog() {
        let decomp = h.decomposition().unwrap();
        for piece in decomp.pieces() {
            for _ in 0..1000 {
                // a point of the piece, via projection of a graph sample
                let (c, v) = h.sample_graph_point(&mut rng);
                let mut p = c;
                p.extend_from_slice(&v);
                let q = match piece.project(&p) {
                    Ok(q) => q,
                    Err(_) => continue, // graph-restricted oracle off its domain
                };
                let dq = piece.distance(&q).unwrap();
                assert!(
                    dq <= 1e-10,
                    "{}: projected point off piece {} by {dq}",
                    h.name(),
                    piece.id()
                );
                assert!(piece.membership(&q, 1e-10).unwrap());
                // lower-bound property against the sampled piece point
                let d = piece.distance(&p).unwrap();
                let gap: f64 = p
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    d <= gap + 1e-9,
                    "{}: piece {} distance {d} exceeds sample gap {gap}",
                    h.name(),
                    piece.id()
                );
            }
        }
    }
}

#[test]
fn decomposition_coverage_on_graph_samples() {
    let mut rng = Rng::new(271828);
    for h in catalog() {
        let decomp = h.decomposition().unwrap();
        for _ in 0..300 {
            let (c, v) = h.sample_graph_point(&mut rng);
            assert!(h.subdiff_membership(&c, &v, 1e-8).unwrap(), "{}", h.name());
            let mut p = c;
            p.extend_from_slice(&v);
            let (d, _) = decomp.min_distance(&p).unwrap();
            assert!(d <= 1e-8, "{}: coverage distance {d}", h.name());
        }
    }
}

#[test]
fn membership_consistent_with_decomposition() {
    // subdiff membership implies min-piece distance ~ 0 for closed-graph kinds
    let mut rng = Rng::new(99);
    for h in catalog() {
        let decomp = h.decomposition().unwrap();
        for _ in 0..100 {
            let (c, v) = h.sample_graph_point(&mut rng);
            let member = h.subdiff_membership(&c, &v, 1e-10).unwrap();
            let mut p = c;
            p.extend_from_slice(&v);
            let (d, _) = decomp.min_distance(&p).unwrap();
            assert_eq!(member, d <= 1e-7, "{}: member={member} dist={d}", h.name());
        }
    }
}

// ---------------------------------------------------------------------------
// residuals and reveal extremes
// ---------------------------------------------------------------------------

#[test]
fn residual_zero_at_stored_reference_solutions() {
    // (problem, multiplier at the reference point)
    let cases: Vec<(actid_core::CompositeProblem, Vec<f64>)> = vec![
        (demos::two_circle(), vec![1.0, 0.0, 0.25]),
        (demos::two_circle(), vec![1.0, 0.5, 0.0]),
        (demos::abs_1d(), vec![0.0]),
        (demos::l1_2d(), vec![0.0, 0.0]),
    ];
    for (p, v) in cases {
        let x_bar = p.reference().unwrap().to_vec();
        let c_bar = p.map().eval(&x_bar).unwrap();
        let r = actid_core::criticality_residual(&p, &x_bar, &c_bar, &v).unwrap();
        assert!(r.stationarity <= 1e-12);
        assert!(r.subproblem_gap <= 1e-12);
        assert!(r.value_gap.unwrap() <= 1e-12);
        assert!(p.outer().subdiff_membership(&c_bar, &v, 1e-10).unwrap());
    }
}

#[test]
fn reveal_extreme_thresholds() {
    let p = demos::two_circle();
    let decomp = p.outer().decomposition().unwrap();
    let run = run_prox_sequence(&p, &demos::two_circle_schedule(8), &MuSchedule::Constant(1.0))
        .unwrap();
    let records = IterateRecord::from_run(&run);

    // eps large: everything within the threshold is revealed
    let all = actid_core::reveal(
        &p,
        &decomp,
        &records,
        &RevealParams::new(f64::MAX / 4.0, f64::MAX / 4.0, 1).unwrap(),
    )
    .unwrap();
    assert_eq!(all.tail_revealed.len(), decomp.len());

    // eps tiny: only pieces containing (c_hat, v) exactly
    let tight = actid_core::reveal(
        &p,
        &decomp,
        &records,
        &RevealParams::new(1e-12, 1.0, 1).unwrap(),
    )
    .unwrap();
    let last = tight.iterates.last().unwrap();
    for (pi, &rev) in last.revealed.iter().enumerate() {
        assert_eq!(rev, last.distances[pi] <= 1e-12);
    }
}
