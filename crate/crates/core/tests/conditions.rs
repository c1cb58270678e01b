use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use quarterwalk::conditions::{
    check_all, check_condition_a, check_condition_b1, check_condition_b1x, check_condition_b2, check_condition_c,
    check_condition_d, check_extended_variant, check_reduced_variant, detect_variant, variant_holds, ConditionError,
    Variant,
};
use quarterwalk::model::{build_spec, Region, TransitionKernel, WalkSpec, DEFAULT_EPS, DISPLACEMENTS};
use quarterwalk::queueing::{
    alternating_service, extended_example_interior, extended_neighbors, false_initiation, fig2_spec, paired_service,
    simultaneous_arrivals, AlternatingParams, FalseInitParams, PairedParams,
};
use quarterwalk::spectral::{rho1, rho2};

type Q = BigRational;

fn r(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn fig2() -> WalkSpec<Q> {
    fig2_spec().unwrap()
}

fn alternating(a: Q, l1: Q, l2: Q) -> WalkSpec<Q> {
    alternating_service(&AlternatingParams { a, lambda1: l1, lambda2: l2 }).unwrap()
}

fn false_init() -> WalkSpec<Q> {
    false_initiation(&FalseInitParams { a: r(3, 5), b: r(4, 5), lambda1: r(1, 5), lambda2: r(3, 20) }).unwrap()
}

fn paired() -> WalkSpec<Q> {
    paired_service(&PairedParams { a0: r(1, 5), a1: r(1, 2), a2: r(3, 10), lambda1: r(3, 10), lambda2: r(3, 20) })
        .unwrap()
}

/// Random stochastic kernels on the allowed displacements of each region.
fn random_spec(weights: &[u32], diagonals: bool) -> WalkSpec<Q> {
    let mut it = weights.iter().copied().cycle();
    let mut kernel = |region: Region| {
        let mut raw: Vec<((i32, i32), i64)> = DISPLACEMENTS
            .iter()
            .filter(|&&(k, l)| region.allows(k, l))
            .filter(|&&(k, l)| diagonals || region != Region::Interior || (k, l) != (1, 1) && (k, l) != (-1, -1))
            .map(|&d| (d, i64::from(it.next().unwrap_or(1))))
            .collect();
        if let Some(first) = raw.first_mut() {
            first.1 += 1;
        }
        let total: i64 = raw.iter().map(|(_, w)| w).sum();
        TransitionKernel::from_entries(raw.into_iter().map(|(d, w)| (d, r(w, total))))
    };
    let interior = kernel(Region::Interior);
    let horizontal = kernel(Region::Horizontal);
    let vertical = kernel(Region::Vertical);
    let origin = kernel(Region::Origin);
    build_spec(interior, horizontal, vertical, origin, DEFAULT_EPS).unwrap()
}

#[test]
fn fig2_satisfies_every_classic_condition() {
    let spec = fig2();
    for report in check_all(&spec) {
        assert!(report.holds, "{report}");
    }
    assert_eq!(check_condition_c(&spec).common, Some(r(75_735, 10_000_000)));
    assert_eq!(spec.qv(1, 0), r(2565, 10_000));
    assert!(check_condition_d(&spec).unwrap().holds);
}

#[test]
fn false_initiation_violations() {
    let spec = false_init();
    let a = check_condition_a(&spec);
    assert!(!a.holds);
    assert!(a.violated("A.(1,1)"));
    assert_eq!(a.violations[0].lhs, spec.q(1, 1));
    assert!(spec.q(1, 1) > Q::zero());
    assert!(check_condition_b2(&spec).violated("B2.(1,1)"));
    assert!(!check_condition_c(&spec).holds);
}

#[test]
fn condition_c_holds_trivially_with_zero_products() {
    let interior = TransitionKernel::from_entries([((-1, 0), r(1, 4)), ((0, -1), r(1, 4)), ((0, 0), r(1, 2))]);
    let boundary_h = TransitionKernel::from_entries([((-1, 0), r(1, 4)), ((0, 0), r(3, 4))]);
    let boundary_v = TransitionKernel::from_entries([((0, -1), r(1, 4)), ((0, 0), r(3, 4))]);
    let origin = TransitionKernel::from_entries([((0, 0), r(1, 1))]);
    let spec = build_spec(interior, boundary_h, boundary_v, origin, DEFAULT_EPS).unwrap();
    let c = check_condition_c(&spec);
    assert!(c.holds);
    assert_eq!(c.common, Some(Q::zero()));
}

#[test]
fn condition_d_reduces_for_simultaneous_arrivals() {
    let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
    assert!(check_condition_d(&spec).unwrap().holds);
    assert_eq!(spec.qv(1, 0), spec.q(1, 0));
}

#[test]
fn condition_d_rejects_zero_denominators() {
    let interior = TransitionKernel::from_entries([((-1, 0), r(1, 4)), ((0, 1), r(1, 4)), ((0, 0), r(1, 2))]);
    let spec = random_spec(&[1, 2, 3], false);
    let spec = build_spec(interior, spec.horizontal, spec.vertical, spec.origin, DEFAULT_EPS).unwrap();
    assert!(matches!(check_condition_d(&spec), Err(ConditionError::DegenerateDenominator(_))));
}

#[test]
fn reduced_variant_only_for_simultaneous_arrivals() {
    let sim = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
    assert!(check_reduced_variant(&sim).holds);
    assert!(check_reduced_variant(&fig2()).violated("R.(1,-1)"));
    assert!(!check_reduced_variant(&alternating(r(3, 5), r(2, 5), r(3, 20))).holds);
    assert_eq!(detect_variant(&sim), Some(Variant::Reduced));
    assert_eq!(detect_variant(&fig2()), Some(Variant::Classic));
}

#[test]
fn extended_variant() {
    let spec = extended_neighbors(&extended_example_interior::<Q>()).unwrap();
    assert!(check_extended_variant(&spec).unwrap().holds);
    assert!(variant_holds(&spec, Variant::Extended));
    let fig2_ext = check_extended_variant(&fig2()).unwrap();
    let cubic = fig2_ext.violations.iter().find(|v| v.identity == "Cx.cubic").unwrap();
    assert!(cubic.lhs > Q::zero());
    assert!(cubic.rhs.is_zero());
    assert!(!check_extended_variant(&paired()).unwrap().holds);
    assert!(!check_condition_a(&paired()).holds);
}

#[test]
fn reports_render_as_json() {
    let json = check_condition_b2(&false_init()).to_json();
    assert_eq!(json["condition"], "B2");
    assert_eq!(json["holds"], false);
    assert!(json["violations"].as_array().is_some_and(|v| !v.is_empty()));
}

fn ratio_identities(spec: &WalkSpec<Q>) {
    let q = |k, l| spec.q(k, l);
    let (r1, r2) = (rho1(spec).unwrap(), rho2(spec).unwrap());
    assert_eq!(q(0, 1) / q(1, -1), r2);
    assert_eq!(q(-1, 1) / q(0, -1), r2);
    assert_eq!(q(1, 0) / q(-1, 1), r1);
    assert_eq!(q(1, -1) / q(-1, 0), r1);
    assert_eq!(q(0, 1) / q(-1, 0), r1.clone() * r2.clone());
    assert_eq!(q(1, 0) / q(0, -1), r1 * r2);
}

#[test]
fn ratio_identities_on_fig2() {
    ratio_identities(&fig2());
}

proptest! {
    #[test]
    fn ratio_identities_under_a_and_c(a in 1i64..20, l1 in 1i64..20, l2 in 1i64..20) {
        let spec = alternating(r(a, 20), r(l1, 20), r(l2, 20));
        prop_assume!(check_condition_a(&spec).holds && check_condition_c(&spec).holds);
        ratio_identities(&spec);
    }

    #[test]
    fn b1x_degenerates_to_b1(weights in prop::collection::vec(0u32..6, 30)) {
        let spec = random_spec(&weights, false);
        let plain = check_condition_b1(&spec);
        let extended = check_condition_b1x(&spec);
        prop_assert_eq!(plain.holds, extended.holds);
        let sides = |rep: &quarterwalk::conditions::ConditionReport<Q>| {
            rep.violations.iter().map(|v| (v.lhs.clone(), v.rhs.clone())).collect::<Vec<_>>()
        };
        prop_assert_eq!(sides(&plain), sides(&extended));
    }

    #[test]
    fn reports_are_deterministic(weights in prop::collection::vec(0u32..6, 30), diagonals: bool) {
        let spec = random_spec(&weights, diagonals);
        prop_assert_eq!(check_all(&spec), check_all(&spec.clone()));
        prop_assert_eq!(check_extended_variant(&spec), check_extended_variant(&spec));
    }
}
