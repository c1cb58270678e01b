use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use quarterwalk::compensation::run;
use quarterwalk::marginals::{ergodic_fayolle, ergodic_rho, marginal_m, marginal_n, MarginalError};
use quarterwalk::model::{balance_residuals, TransitionKernel, WalkSpec, DEFAULT_EPS};
use quarterwalk::oracle::{truncated_stationary, OracleMethod};
use quarterwalk::queueing::{
    alternating_service, closed_form_alternating, closed_form_simultaneous, complete_boundaries, delta_equation,
    simultaneous_arrivals, AlternatingParams, BatchGeometricParams,
};
use quarterwalk::spectral::Side;

type Q = BigRational;

fn r(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

/// Stable alternating-service parameters on a grid of step 1/den.
fn stable_alternating(den: i64) -> impl Strategy<Value = AlternatingParams<Q>> {
    (1..den).prop_flat_map(move |a| (Just(a), 1..a.max(2), 1..(den - a).max(2))).prop_filter_map(
        "unstable",
        move |(a, l1, l2)| {
            let p = AlternatingParams { a: r(a, den), lambda1: r(l1, den), lambda2: r(l2, den) };
            p.is_stable().then_some(p)
        },
    )
}

fn simultaneous_params() -> impl Strategy<Value = (Q, Q)> {
    (2i64..19, 1i64..19).prop_filter_map("unstable", |(a, l)| {
        let (a, l) = (r(a, 20), r(l, 20));
        (l < a && l < Q::one() - a.clone()).then_some((a, l))
    })
}

/// Flow balance across the edge `from -> from + step` with the interior rates.
fn flows_balance(spec: &WalkSpec<Q>, pi: &dyn Fn(usize, usize) -> Q, from: (usize, usize), step: (i32, i32)) -> bool {
    let to = ((from.0 as i32 + step.0) as usize, (from.1 as i32 + step.1) as usize);
    pi(from.0, from.1) * spec.q(step.0, step.1) == pi(to.0, to.1) * spec.q(-step.0, -step.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn alternating_terminates_with_matching_sides(p in stable_alternating(40)) {
        let spec = alternating_service(&p).unwrap();
        let sol = run(&spec).unwrap();
        prop_assert_eq!(sol.measure.interior_terms.len(), 3);
        for side in [Side::Horizontal, Side::Vertical] {
            let t = sol.trace(side);
            prop_assert!(t.terminated);
            prop_assert_eq!(t.final_companion(), Some(&Q::zero()));
        }
        prop_assert_eq!(&sol.measure, &closed_form_alternating(&p).unwrap().canonical());
        prop_assert!(sol.measure.total_mass().unwrap().is_one());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measures_solve_the_balance_equations(p in stable_alternating(30)) {
        let spec = alternating_service(&p).unwrap();
        let sol = run(&spec).unwrap();
        let res = balance_residuals(&spec, &|m, n| sol.measure.evaluate(m, n), 10).unwrap();
        prop_assert!(res.all_zero());
    }

    #[test]
    fn joint_measure_projects_onto_the_marginals(p in stable_alternating(30)) {
        let spec = alternating_service(&p).unwrap();
        let measure = run(&spec).unwrap().measure;
        let (mm, mn) = (marginal_m(&spec).unwrap(), marginal_n(&spec).unwrap());
        for k in 0..8 {
            prop_assert_eq!(measure.row_sum(k), mm.prob(k));
            prop_assert_eq!(measure.col_sum(k), mn.prob(k));
        }
    }

    #[test]
    fn float_mode_tracks_exact_mode(p in stable_alternating(20)) {
        let spec = alternating_service(&p).unwrap();
        let exact = run(&spec).unwrap().measure;
        let float = run(&spec.to_f64(DEFAULT_EPS)).unwrap().measure;
        for m in 0..10 {
            for n in 0..10 {
                let e = num_traits::ToPrimitive::to_f64(&exact.evaluate(m, n)).unwrap();
                prop_assert!((e - float.evaluate(m, n)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn simultaneous_arrivals_are_reversible((a, l) in simultaneous_params()) {
        let spec = simultaneous_arrivals(&a, &l).unwrap();
        let measure = run(&spec).unwrap().measure;
        prop_assert_eq!(&measure, &closed_form_simultaneous(&a, &l).unwrap().canonical());
        let pi = |m: usize, n: usize| measure.evaluate(m, n);
        for m in 0..6 {
            for n in 0..6 {
                for step in [(1, 0), (0, 1)] {
                    let off_axis_cross = (m == 0 && n > 0 && step == (1, 0)) || (n == 0 && m > 0 && step == (0, 1));
                    if !off_axis_cross {
                        prop_assert!(flows_balance(&spec, &pi, (m, n), step), "({m},{n}) {step:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn batch_delta_ratio_is_state_independent(
        a in 1i64..20, l1 in 1i64..20, l2 in 0i64..20, l in 0usize..8, k in 0usize..8,
    ) {
        let p = BatchGeometricParams { a: r(a, 20), lambda1: r(l1, 20), lambda2: r(l2, 20) };
        let expected = p.lambda2.clone() / (Q::one() - p.a.clone());
        prop_assert_eq!(delta_equation(&p, l, k).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn ergodicity_criteria_agree(weights in prop::collection::vec(0i64..12, 7)) {
        let displacements = [(0, 1), (1, 0), (-1, 1), (1, -1), (-1, 0), (0, -1), (0, 0)];
        let total: i64 = weights.iter().sum::<i64>() + 1;
        let interior = TransitionKernel::from_entries(
            displacements.iter().zip(&weights).map(|(&d, &w)| (d, r(w + i64::from(d == (0, 0)), total))),
        );
        let Ok(spec) = complete_boundaries(&interior) else { return Ok(()) };
        match ergodic_fayolle(&spec) {
            Ok(f) => prop_assert_eq!(f, ergodic_rho(&spec).unwrap()),
            Err(MarginalError::ZeroMeanDrift) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn truncated_grids_are_distributions((a, l) in simultaneous_params(), n in 5usize..12) {
        let spec = simultaneous_arrivals(&a, &l).unwrap();
        let exact = truncated_stationary(&spec, n, OracleMethod::LinearSolve).unwrap();
        prop_assert!(exact.total().is_one());
        let float = truncated_stationary(&spec.to_f64(DEFAULT_EPS), 30, OracleMethod::LinearSolve).unwrap();
        prop_assert!((float.total() - 1.0).abs() <= 1e-14);
        let power = truncated_stationary(&spec.to_f64(DEFAULT_EPS), 30, OracleMethod::PowerIteration).unwrap();
        for m in 0..=30 {
            for k in 0..=30 {
                prop_assert!((power.p[m][k] - float.p[m][k]).abs() <= 1e-10);
            }
        }
    }
}
