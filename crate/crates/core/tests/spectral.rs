use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use quarterwalk::model::WalkSpec;
use quarterwalk::queueing::{
    alternating_service, fig2_spec, simultaneous_arrivals, work_conserving, AlternatingParams,
};
use quarterwalk::spectral::{
    eval_h, eval_h0, eval_h1, eval_k, eval_v, initial_pair, map_f, map_phi, other_root, rho1, rho2, sample_curves,
    solve_k_for_delta, solve_k_for_gamma, solve_quadratic, Curve, PairGD, Root, Side, SpectralError,
};

type Q = BigRational;

fn r(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn fig2() -> WalkSpec<Q> {
    fig2_spec().unwrap()
}

fn alternating() -> WalkSpec<Q> {
    alternating_service(&AlternatingParams { a: r(3, 5), lambda1: r(2, 5), lambda2: r(3, 20) }).unwrap()
}

fn real_roots(roots: &[Root<Q>]) -> Vec<Q> {
    roots.iter().map(|x| x.as_real().expect("rational root").clone()).collect()
}

#[test]
fn kernel_vanishes_at_one_one() {
    for spec in [fig2(), alternating()] {
        assert!(eval_k(&spec, &Q::one(), &Q::one()).is_zero());
    }
}

#[test]
fn kernel_vanishes_at_initial_pair() {
    let spec = fig2();
    assert!(eval_k(&spec, &r(6, 11), &r(27, 187)).is_zero());
    assert!(!eval_k(&spec, &r(1, 2), &r(1, 2)).is_zero());
}

#[test]
fn boundary_polynomials_vanish_on_initial_pairs() {
    let spec = fig2();
    assert!(eval_h(&spec, &r(6, 11), &r(27, 187)).is_zero());
    assert!(eval_v(&spec, &r(27, 187), &r(9, 34)).is_zero());
}

#[test]
fn h_is_the_sum_of_its_parts() {
    let spec = fig2();
    for (g, d) in [(r(1, 3), r(2, 7)), (r(6, 11), r(27, 187)), (r(5, 4), r(-1, 9))] {
        assert_eq!(eval_h(&spec, &g, &d), eval_h1(&spec, &g, &d) + eval_h0(&spec, &g, &d));
    }
}

#[test]
fn rho_values() {
    assert_eq!(rho1(&fig2()).unwrap(), r(6, 11));
    assert_eq!(rho2(&fig2()).unwrap(), r(9, 34));
    assert_eq!(rho1(&alternating()).unwrap(), r(4, 9));
}

#[test]
fn f_and_phi_swap_the_rhos() {
    let spec = fig2();
    assert_eq!(map_f(&spec, &r(6, 11)).unwrap(), r(9, 34));
    assert_eq!(map_phi(&spec, &r(9, 34)).unwrap(), r(6, 11));
}

#[test]
fn kernel_quadratics() {
    let spec = fig2();
    let g = solve_k_for_gamma(&spec, &r(27, 187)).unwrap();
    assert!(!g.downgraded);
    assert_eq!(real_roots(&g.roots), vec![r(27, 187), r(6, 11)]);

    let d = solve_k_for_delta(&spec, &r(6, 11)).unwrap();
    assert_eq!(real_roots(&d.roots), vec![r(27, 187), Q::one()]);
    assert!(d.roots[1].is_unit(0.0));

    let alt = solve_k_for_gamma(&alternating(), &r(9, 34)).unwrap();
    assert_eq!(real_roots(&alt.roots), vec![r(2, 17), Q::one()]);
}

#[test]
fn initial_pairs() {
    assert_eq!(initial_pair(&fig2(), Side::Horizontal).unwrap(), PairGD { gamma: r(6, 11), delta: r(27, 187) });
    assert_eq!(initial_pair(&alternating(), Side::Horizontal).unwrap(), PairGD { gamma: r(4, 9), delta: r(2, 17) });
    let sim = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
    assert_eq!(initial_pair(&sim, Side::Horizontal).unwrap(), PairGD { gamma: r(1, 6), delta: r(3, 8) });
}

#[test]
fn initial_pair_rejects_unstable_walks() {
    let spec = alternating_service(&AlternatingParams { a: r(3, 10), lambda1: r(2, 5), lambda2: r(3, 20) }).unwrap();
    assert!(matches!(initial_pair(&spec, Side::Horizontal), Err(SpectralError::NotErgodic { .. })));
}

#[test]
fn irrational_roots_are_downgraded() {
    let roots = solve_quadratic(&[r(-2, 1), Q::zero(), Q::one()], 1e-12).unwrap();
    assert!(roots.downgraded);
    assert!((roots.roots[1].re() - 2f64.sqrt()).abs() < 1e-15);
    let complex = solve_quadratic(&[1.0, 0.0, 1.0], 1e-12).unwrap();
    assert_eq!(complex.roots[1].im(), 1.0);
}

#[test]
fn degenerate_quadratic() {
    assert_eq!(solve_quadratic(&[r(1, 2), Q::zero(), Q::zero()], 1e-12), Err(SpectralError::DegenerateQuadratic));
    let linear = solve_quadratic(&[r(1, 2), r(-1, 1), Q::zero()], 1e-12).unwrap();
    assert!(linear.degenerate);
    assert_eq!(real_roots(&linear.roots), vec![r(1, 2)]);
}

#[test]
fn curves_pass_through_known_points() {
    let spec = fig2();
    let points = sample_curves(&spec, 50).unwrap();
    let spacing = 1.05 / 50.0;
    let near = |c: Curve, g: f64, d: f64, tol: f64| {
        points.iter().any(|p| p.curve == c && (p.gamma - g).abs() <= tol && (p.delta - d).abs() <= tol)
    };
    assert!(near(Curve::K, 1.0, 1.0, 1e-12));
    assert!(near(Curve::K, 6.0 / 11.0, 27.0 / 187.0, spacing));
    let f = spec.to_f64(1e-12);
    for p in points.iter().filter(|p| p.curve == Curve::K) {
        assert!(eval_k(&f, &p.gamma, &p.delta).abs() < 1e-12, "{p:?}");
    }
    assert!(matches!(sample_curves(&fig2(), 1), Err(SpectralError::InvalidResolution(1))));
}

#[test]
fn curves_sample_without_conditions() {
    let spec = work_conserving(&AlternatingParams { a: r(3, 5), lambda1: r(2, 5), lambda2: r(3, 20) }).unwrap();
    assert!(!sample_curves(&spec, 10).unwrap().is_empty());
}

proptest! {
    #[test]
    fn vieta_recovers_the_other_root(a in -20i64..20, b in -20i64..20, lead in 1i64..9) {
        let (x1, x2) = (r(a, 7), r(b, 5));
        let c2 = r(lead, 1);
        let c = [c2.clone() * x1.clone() * x2.clone(), -c2.clone() * (x1.clone() + x2.clone()), c2];
        prop_assert_eq!(other_root(&c, &x1), Some(x2.clone()));
        prop_assert_eq!(other_root(&c, &x2), Some(x1));
    }
}
