use num_rational::BigRational;
use num_traits::One;

use quarterwalk::compensation::run;
use quarterwalk::model::{build_spec, TransitionKernel, DEFAULT_EPS};
use quarterwalk::oracle::{
    compare, simulate, truncated_stationary, OracleError, OracleGrid, OracleMethod, DEFAULT_FLOOR,
};
use quarterwalk::queueing::{
    alternating_service, closed_form_alternating, closed_form_simultaneous, fig2_spec, simultaneous_arrivals,
    AlternatingParams,
};

type Q = BigRational;

fn r(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn alt_params() -> AlternatingParams<Q> {
    AlternatingParams { a: r(3, 5), lambda1: r(2, 5), lambda2: r(3, 20) }
}

#[test]
fn simultaneous_solve_matches_closed_form() {
    let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap().to_f64(DEFAULT_EPS);
    let grid = truncated_stationary(&spec, 40, OracleMethod::LinearSolve).unwrap();
    assert!((grid.p[0][0] - 5.0 / 12.0).abs() <= 1e-9);
    let closed = closed_form_simultaneous(&0.6, &0.2).unwrap();
    assert!(compare(&closed, &grid, DEFAULT_FLOOR).unwrap().max_abs_err <= 1e-9);
}

#[test]
fn alternating_solve_matches_closed_form() {
    let spec = alternating_service(&alt_params()).unwrap().to_f64(DEFAULT_EPS);
    let grid = truncated_stationary(&spec, 60, OracleMethod::LinearSolve).unwrap();
    assert!((grid.p[0][0] - 25.0 / 136.0).abs() <= 1e-8);
    let closed = closed_form_alternating(&alt_params()).unwrap();
    let cmp = compare(&closed, &grid, DEFAULT_FLOOR).unwrap();
    assert!(cmp.max_abs_err <= grid.tail_estimate, "{cmp}");
    assert_eq!(cmp.window, 60);
    assert_eq!(cmp.states, 61 * 61);
}

#[test]
fn power_iteration_agrees_with_solve() {
    let spec = fig2_spec::<Q>().unwrap().to_f64(DEFAULT_EPS);
    let solve = truncated_stationary(&spec, 30, OracleMethod::LinearSolve).unwrap();
    let power = truncated_stationary(&spec, 30, OracleMethod::PowerIteration).unwrap();
    assert!(power.iterations.is_some_and(|it| it > 0));
    assert!(compare(&solve, &power, DEFAULT_FLOOR).unwrap().max_abs_err <= 1e-10);
}

#[test]
fn exact_and_float_solves_agree() {
    let spec = alternating_service(&alt_params()).unwrap();
    let exact = truncated_stationary(&spec, 12, OracleMethod::LinearSolve).unwrap();
    assert!(exact.total().is_one());
    let float = truncated_stationary(&spec.to_f64(DEFAULT_EPS), 12, OracleMethod::LinearSolve).unwrap();
    assert!(compare(&exact.to_f64(), &float, DEFAULT_FLOOR).unwrap().max_abs_err <= 1e-14);
    assert!((float.total() - 1.0).abs() <= 1e-14);
}

#[test]
fn exact_limits() {
    let spec = alternating_service(&alt_params()).unwrap();
    assert!(matches!(truncated_stationary(&spec, 26, OracleMethod::LinearSolve), Err(OracleError::ExactTooLarge(26))));
    assert!(matches!(
        truncated_stationary(&spec, 4, OracleMethod::LinearSolve),
        Err(OracleError::TruncationTooSmall(4))
    ));
    assert!(matches!(
        truncated_stationary(&spec, 10, OracleMethod::Simulation),
        Err(OracleError::UnsupportedMethod(OracleMethod::Simulation))
    ));
}

#[test]
fn absorbing_origin_is_flagged() {
    let spec = fig2_spec::<Q>().unwrap();
    let origin = TransitionKernel::from_entries([((0, 0), Q::one())]);
    let spec = build_spec(spec.interior, spec.horizontal, spec.vertical, origin, DEFAULT_EPS).unwrap();
    let f = spec.to_f64(DEFAULT_EPS);
    match truncated_stationary(&f, 10, OracleMethod::LinearSolve) {
        Ok(grid) => assert_eq!(grid.is_point_mass(), Some((0, 0))),
        Err(e) => assert!(matches!(e, OracleError::SingularSystem { .. }), "{e}"),
    }
    let power = truncated_stationary(&f, 10, OracleMethod::PowerIteration).unwrap();
    assert_eq!(power.is_point_mass(), Some((0, 0)));
}

#[test]
fn long_simulation_is_statistically_consistent() {
    let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
    let grid = simulate(&spec, 10_000_000, 10_000, 1).unwrap();
    let se = grid.std_err.as_ref().unwrap()[0][0];
    assert!(se > 0.0);
    assert!((grid.p[0][0] - 5.0 / 12.0).abs() <= 4.0 * se, "p00={} se={se}", grid.p[0][0]);
    assert!((grid.total() - 1.0).abs() <= 1e-12);
}

#[test]
fn simulation_guards_and_determinism() {
    let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
    assert!(matches!(simulate(&spec, 100, 100, 1), Err(OracleError::EmptySample { .. })));
    assert_eq!(simulate(&spec, 20_000, 100, 7).unwrap(), simulate(&spec, 20_000, 100, 7).unwrap());
}

#[test]
fn comparing_a_measure_with_itself() {
    let measure = run(&simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap()).unwrap().measure;
    let grid = OracleGrid {
        n: 15,
        p: (0..=15).map(|m| (0..=15).map(|n| measure.evaluate(m, n)).collect()).collect(),
        method: OracleMethod::LinearSolve,
        tail_estimate: 0.0,
        residual: None,
        iterations: None,
        std_err: None,
    };
    let cmp = compare(&measure, &grid, DEFAULT_FLOOR).unwrap();
    assert_eq!(cmp.max_abs_err, 0.0);
    assert_eq!(cmp.states, 16 * 16);
    assert!(matches!(compare(&measure, &measure, DEFAULT_FLOOR), Err(OracleError::NoOverlap)));
}

#[test]
fn mismatched_windows_use_the_intersection() {
    let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap().to_f64(DEFAULT_EPS);
    let small = truncated_stationary(&spec, 10, OracleMethod::LinearSolve).unwrap();
    let large = truncated_stationary(&spec, 20, OracleMethod::LinearSolve).unwrap();
    let cmp = compare(&small, &large, DEFAULT_FLOOR).unwrap();
    assert_eq!(cmp.window, 10);
    assert_eq!(cmp.states, 121);
}

#[test]
fn grid_csv() {
    let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap().to_f64(DEFAULT_EPS);
    let csv = truncated_stationary(&spec, 5, OracleMethod::LinearSolve).unwrap().to_csv();
    assert!(csv.starts_with("m,n,p\n"));
    assert_eq!(csv.lines().count(), 1 + 36);
}
