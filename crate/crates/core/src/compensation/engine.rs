use crate::conditions::{
    check_all, check_condition_a, check_condition_b1, check_condition_b2, check_condition_c, check_condition_d,
    check_extended_variant, check_reduced_variant, UnmetConditions, Variant,
};
use crate::model::{balance_residuals, EquationClass, WalkSpec};
use crate::scalar::Scalar;
use crate::spectral::{
    b_horizontal, b_vertical, h_north, initial_pair, kernel_poly, l_horizontal, l_vertical, other_root, q_east,
    q_north, rho1, rho2, v_east, PairGD, Side,
};

use super::{
    BoundaryTerm, CompensationError, CompensationTrace, GeometricTerm, InvariantMeasure, PartialSolution, StepKind,
    TraceStep,
};

/// Interior terms allowed before the procedure is declared non-terminating.
pub const MAX_TERMS: usize = 3;

/// Window on which closure and nonnegativity are verified.
pub const CHECK_WINDOW: usize = 8;

/// An accepted measure with the traces of both starting sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<S> {
    pub measure: InvariantMeasure<S>,
    pub variant: Variant,
    pub rho1: S,
    pub rho2: S,
    pub horizontal_trace: CompensationTrace<S>,
    pub vertical_trace: CompensationTrace<S>,
}

impl<S: Scalar> Solution<S> {
    pub fn trace(&self, start: Side) -> &CompensationTrace<S> {
        match start {
            Side::Horizontal => &self.horizontal_trace,
            Side::Vertical => &self.vertical_trace,
        }
    }
}

/// The first product form and the axis coefficient that fits it.
pub fn initial_solution<S: Scalar>(spec: &WalkSpec<S>, side: Side) -> Result<PartialSolution<S>, CompensationError> {
    let eps = spec.eps();
    let pair = initial_pair(spec, side)?;
    let (g, d) = (pair.gamma.clone(), pair.delta.clone());
    // (first-equation factor, second-equation factor, second-equation rhs)
    let (num1, den1, den2, num2) = match side {
        Side::Horizontal => {
            (q_north(spec, &g), h_north(spec, &g), l_horizontal(spec, &g), b_horizontal(spec, &g) * d.clone())
        }
        Side::Vertical => (q_east(spec, &d), v_east(spec, &d), l_vertical(spec, &d), b_vertical(spec, &d) * g.clone()),
    };
    if den1.near_zero(&num1, eps) {
        return Err(CompensationError::ZeroDenominator(format!(
            "{side} boundary polynomial vanishes at the initial pair"
        )));
    }
    let coeff = num1 / den1;
    let lhs = coeff.clone() * den2.clone();
    if !lhs.approx_eq(&num2, eps) {
        let second = if den2.is_zero() { "undefined".to_string() } else { (num2 / den2).to_string() };
        return Err(CompensationError::InconsistentBoundary { side, first: coeff.to_string(), second });
    }
    let mut trace = CompensationTrace::new(side);
    trace.steps.push(TraceStep {
        kind: StepKind::Initial,
        pair: pair.clone(),
        coeff: S::one(),
        axis_coeff: coeff.clone(),
        terminated: false,
    });
    let term = GeometricTerm { coeff: S::one(), gamma: g.clone(), delta: d.clone() };
    let (h_axis, v_axis) = match side {
        Side::Horizontal => (vec![BoundaryTerm { coeff, ratio: g }], Vec::new()),
        Side::Vertical => (Vec::new(), vec![BoundaryTerm { coeff, ratio: d }]),
    };
    Ok(PartialSolution { interior: vec![term], h_axis, v_axis, pending: Some(side.other()), trace })
}

/// Repairs the vertical boundary for the newest term's δ.
pub fn vertical_step<S: Scalar>(
    spec: &WalkSpec<S>,
    partial: PartialSolution<S>,
) -> Result<PartialSolution<S>, CompensationError> {
    compensation_step(spec, partial, Side::Vertical)
}

/// Repairs the horizontal boundary for the newest term's γ.
pub fn horizontal_step<S: Scalar>(
    spec: &WalkSpec<S>,
    partial: PartialSolution<S>,
) -> Result<PartialSolution<S>, CompensationError> {
    compensation_step(spec, partial, Side::Horizontal)
}

/// Applies whichever step is pending.
pub fn step<S: Scalar>(
    spec: &WalkSpec<S>,
    partial: PartialSolution<S>,
) -> Result<PartialSolution<S>, CompensationError> {
    match partial.pending {
        Some(side) => compensation_step(spec, partial, side),
        None => Err(CompensationError::NothingPending(partial.trace.start)),
    }
}

fn compensation_step<S: Scalar>(
    spec: &WalkSpec<S>,
    mut partial: PartialSolution<S>,
    side: Side,
) -> Result<PartialSolution<S>, CompensationError> {
    if partial.pending != Some(side) {
        return Err(CompensationError::NothingPending(side));
    }
    let eps = spec.eps();
    let newest = partial.interior.last().cloned().ok_or(CompensationError::NothingPending(side))?;
    let kpoly = kernel_poly(spec);
    // `key` is the shared ratio of the group; `current` is the varying one.
    let (key, current, quad, qf, bf, lf, wf) = match side {
        Side::Vertical => {
            let d = newest.delta.clone();
            (
                d.clone(),
                newest.gamma.clone(),
                kpoly.in_gamma(&d),
                q_east(spec, &d),
                v_east(spec, &d),
                l_vertical(spec, &d),
                b_vertical(spec, &d),
            )
        }
        Side::Horizontal => {
            let g = newest.gamma.clone();
            (
                g.clone(),
                newest.delta.clone(),
                kpoly.in_delta(&g),
                q_north(spec, &g),
                h_north(spec, &g),
                l_horizontal(spec, &g),
                b_horizontal(spec, &g),
            )
        }
    };
    let (mut s0, mut s1) = (S::zero(), S::zero());
    for t in &partial.interior {
        let (k, other) = match side {
            Side::Vertical => (&t.delta, &t.gamma),
            Side::Horizontal => (&t.gamma, &t.delta),
        };
        if k.approx_eq(&key, eps) {
            s0 = s0 + t.coeff.clone();
            s1 = s1 + t.coeff.clone() * other.clone();
        }
    }
    let root = other_root(&quad, &current)
        .ok_or_else(|| CompensationError::ZeroDenominator(format!("kernel is linear in the {side} compensation")))?;
    let kind = match side {
        Side::Vertical => StepKind::Vertical,
        Side::Horizontal => StepKind::Horizontal,
    };
    let pair = match side {
        Side::Vertical => PairGD { gamma: root.clone(), delta: key.clone() },
        Side::Horizontal => PairGD { gamma: key.clone(), delta: root.clone() },
    };
    let first = bf.clone() * wf.clone() * s1.clone();
    let second = lf.clone() * qf.clone() * s0.clone();
    let numerator = first.clone() - second.clone();
    let scale = first.abs() + second.abs();
    let det = qf.clone() * lf.clone() - wf.clone() * root.clone() * bf.clone();

    if numerator.near_zero(&scale, eps) {
        let axis = if !bf.near_zero(&qf, eps) {
            qf * s0 / bf
        } else if !lf.near_zero(&wf, eps) {
            wf * s1 / lf
        } else {
            return Err(CompensationError::ZeroDenominator(format!("{side} axis coefficient at the closing step")));
        };
        partial.trace.steps.push(TraceStep {
            kind,
            pair,
            coeff: S::zero(),
            axis_coeff: axis.clone(),
            terminated: true,
        });
        partial.trace.terminated = true;
        push_axis(&mut partial, side, axis, key);
        partial.pending = None;
        return Ok(partial);
    }
    if det.near_zero(&scale, eps) {
        return Err(CompensationError::ZeroDenominator(format!("{side} compensation system is singular")));
    }
    let coeff = numerator / det.clone();
    if partial.interior.len() >= MAX_TERMS {
        return Err(CompensationError::NonTerminating {
            terms: partial.interior.len(),
            coefficient: coeff.to_string(),
        });
    }
    if root.abs() >= S::one() {
        return Err(CompensationError::RootOutOfRange { root: root.to_string() });
    }
    let axis = qf * wf * (s1 - root.clone() * s0) / det;
    partial.trace.steps.push(TraceStep {
        kind,
        pair: pair.clone(),
        coeff: coeff.clone(),
        axis_coeff: axis.clone(),
        terminated: false,
    });
    partial.interior.push(GeometricTerm { coeff, gamma: pair.gamma, delta: pair.delta });
    push_axis(&mut partial, side, axis, key);
    partial.pending = Some(side.other());
    Ok(partial)
}

fn push_axis<S: Scalar>(partial: &mut PartialSolution<S>, side: Side, coeff: S, ratio: S) {
    let term = BoundaryTerm { coeff, ratio };
    match side {
        Side::Vertical => partial.v_axis.push(term),
        Side::Horizontal => partial.h_axis.push(term),
    }
}

/// Runs the procedure from one side and returns the trace even on failure.
pub fn attempt<S: Scalar>(
    spec: &WalkSpec<S>,
    side: Side,
) -> (CompensationTrace<S>, Result<InvariantMeasure<S>, CompensationError>) {
    let mut partial = match initial_solution(spec, side) {
        Ok(p) => p,
        Err(e) => {
            let mut trace = CompensationTrace::new(side);
            trace.diagnosis = Some(e.to_string());
            return (trace, Err(e));
        }
    };
    while partial.pending.is_some() {
        let snapshot = partial.trace.clone();
        partial = match step(spec, partial) {
            Ok(p) => p,
            Err(e) => {
                let mut trace = snapshot;
                trace.diagnosis = Some(e.to_string());
                return (trace, Err(e));
            }
        };
    }
    let result = finish(spec, &partial);
    let mut trace = partial.trace;
    if let Err(e) = &result {
        trace.diagnosis = Some(e.to_string());
    }
    (trace, result)
}

/// Runs the procedure from one side without checking any conditions first.
pub fn compensate<S: Scalar>(
    spec: &WalkSpec<S>,
    side: Side,
) -> Result<(InvariantMeasure<S>, CompensationTrace<S>), CompensationError> {
    let (trace, result) = attempt(spec, side);
    result.map(|m| (m, trace))
}

fn finish<S: Scalar>(
    spec: &WalkSpec<S>,
    partial: &PartialSolution<S>,
) -> Result<InvariantMeasure<S>, CompensationError> {
    let eps = spec.eps();
    let sum = |terms: &[BoundaryTerm<S>]| terms.iter().fold(S::zero(), |acc, t| acc + t.coeff.clone());
    let (se, sz) = (sum(&partial.h_axis), sum(&partial.v_axis));
    if !se.approx_eq(&sz, eps) {
        return Err(CompensationError::OriginEquationsUnsatisfied(format!(
            "horizontal axis coefficients sum to {se}, vertical to {sz}"
        )));
    }
    let (_, measure) = partial.to_measure().normalize()?;
    let residuals = balance_residuals(spec, &|m, n| measure.evaluate(m, n), CHECK_WINDOW)
        .map_err(|e| CompensationError::ZeroDenominator(e.to_string()))?;
    let failing = residuals.failing(eps);
    let list = |classes: Vec<EquationClass>| classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
    let (origin, rest): (Vec<_>, Vec<_>) = failing.into_iter().partition(|c| c.is_origin());
    if !rest.is_empty() {
        return Err(CompensationError::BoundaryEquationsUnsatisfied(list(rest)));
    }
    if !origin.is_empty() {
        return Err(CompensationError::OriginEquationsUnsatisfied(list(origin)));
    }
    for m in 0..=CHECK_WINDOW {
        for n in 0..=CHECK_WINDOW {
            let v = measure.evaluate(m, n);
            if v.is_negative() && !v.near_zero(&S::one(), eps) {
                return Err(CompensationError::NegativeMass { m, n, value: v.to_string() });
            }
        }
    }
    Ok(measure)
}

fn unmet<S: Scalar>(reports: &[crate::conditions::ConditionReport<S>]) -> CompensationError {
    CompensationError::ConditionsUnmet(UnmetConditions::from_reports(reports))
}

fn ergodic_rhos<S: Scalar>(spec: &WalkSpec<S>) -> Result<(S, S), CompensationError> {
    let (r1, r2) = (rho1(spec)?, rho2(spec)?);
    if r1 >= S::one() || r2 >= S::one() {
        return Err(CompensationError::NotErgodic { rho1: r1.to_f64(), rho2: r2.to_f64() });
    }
    Ok((r1, r2))
}

fn both_sides<S: Scalar>(spec: &WalkSpec<S>, variant: Variant, rhos: (S, S)) -> Result<Solution<S>, CompensationError> {
    let (h, htrace) = compensate(spec, Side::Horizontal)?;
    let (v, vtrace) = compensate(spec, Side::Vertical)?;
    let (hc, vc) = (h.canonical(), v.canonical());
    if !measures_agree(&hc, &vc, spec.eps()) {
        return Err(CompensationError::SideMismatch);
    }
    Ok(Solution { measure: hc, variant, rho1: rhos.0, rho2: rhos.1, horizontal_trace: htrace, vertical_trace: vtrace })
}

fn measures_agree<S: Scalar>(a: &InvariantMeasure<S>, b: &InvariantMeasure<S>, eps: f64) -> bool {
    if S::EXACT {
        return a.interior_terms == b.interior_terms
            && a.h_axis_terms == b.h_axis_terms
            && a.v_axis_terms == b.v_axis_terms;
    }
    let close = |x: &S, y: &S| x.approx_eq(y, eps * 1e3);
    a.interior_terms.len() == b.interior_terms.len()
        && a.h_axis_terms.len() == b.h_axis_terms.len()
        && a.v_axis_terms.len() == b.v_axis_terms.len()
        && a.interior_terms
            .iter()
            .zip(&b.interior_terms)
            .all(|(s, t)| close(&s.coeff, &t.coeff) && close(&s.gamma, &t.gamma) && close(&s.delta, &t.delta))
        && a.h_axis_terms
            .iter()
            .zip(&b.h_axis_terms)
            .all(|(s, t)| close(&s.coeff, &t.coeff) && close(&s.ratio, &t.ratio))
        && a.v_axis_terms
            .iter()
            .zip(&b.v_axis_terms)
            .all(|(s, t)| close(&s.coeff, &t.coeff) && close(&s.ratio, &t.ratio))
}

/// Checks the conditions, picks the regime, runs both starting sides and
/// returns the normalized measure. When neither the diagonal-free conditions
/// nor the relaxed ones apply, the procedure is still attempted so that the
/// failure carries the step at which it broke down.
pub fn run<S: Scalar>(spec: &WalkSpec<S>) -> Result<Solution<S>, CompensationError> {
    if check_condition_a(spec).holds {
        let b = [check_condition_b1(spec), check_condition_b2(spec)];
        if b.iter().any(|r| !r.holds) {
            let failing: Vec<_> = check_all(spec).into_iter().filter(|r| !r.holds).collect();
            return Err(unmet(&failing));
        }
        let rhos = ergodic_rhos(spec)?;
        if check_reduced_variant(spec).holds {
            return both_sides(spec, Variant::Reduced, rhos);
        }
        let c = check_condition_c(spec);
        if !c.holds {
            return Err(unmet(&[c]));
        }
        if let Err(e) = check_condition_d(spec) {
            return Err(CompensationError::ConditionsUnmet(UnmetConditions::note(e.to_string())));
        }
        return both_sides(spec, Variant::Classic, rhos);
    }
    match check_extended_variant(spec) {
        Ok(r) if r.holds => {
            let rhos = ergodic_rhos(spec)?;
            both_sides(spec, Variant::Extended, rhos)
        }
        Ok(r) => match attempt(spec, Side::Horizontal).1 {
            Err(e) => Err(e),
            Ok(_) => Err(unmet(&[check_condition_a(spec), r])),
        },
        Err(e) => Err(CompensationError::ConditionsUnmet(UnmetConditions::note(e.to_string()))),
    }
}

/// The single-term path for walks with diagonal jumps.
pub fn run_single_extended<S: Scalar>(spec: &WalkSpec<S>) -> Result<InvariantMeasure<S>, CompensationError> {
    let report = check_extended_variant(spec)
        .map_err(|e| CompensationError::ConditionsUnmet(UnmetConditions::note(e.to_string())))?;
    if !report.holds {
        return Err(unmet(&[report]));
    }
    let rhos = ergodic_rhos(spec)?;
    let solution = both_sides(spec, Variant::Extended, rhos)?;
    let terms = solution.measure.interior_terms.len();
    if terms != 1 {
        return Err(CompensationError::NonTerminating { terms, coefficient: "more than one term".into() });
    }
    Ok(solution.measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::ConditionId;
    use crate::queueing::{
        alternating_service, closed_form_alternating, closed_form_simultaneous, false_initiation, fig2_spec,
        simultaneous_arrivals, work_conserving, AlternatingParams, FalseInitParams,
    };
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::ratio(n, d)
    }

    fn dec(s: &str) -> Q {
        crate::scalar::parse_rational(s).unwrap()
    }

    fn alt() -> AlternatingParams<Q> {
        AlternatingParams { a: q(3, 5), lambda1: q(2, 5), lambda2: q(3, 20) }
    }

    #[test]
    fn alternating_steps_match_hand_values() {
        let spec = alternating_service(&alt()).unwrap();
        let p = initial_solution(&spec, Side::Horizontal).unwrap();
        assert_eq!(p.h_axis[0].coeff, q(2, 5));
        let p = vertical_step(&spec, p).unwrap();
        assert_eq!(p.interior[1].coeff, -(dec("0.24") * dec("0.45")) / (dec("0.15") * dec("0.85") * dec("0.2")));
        assert_eq!(p.v_axis[0].coeff, -(dec("0.4") * dec("0.4") * dec("0.25")) / (dec("0.2") * dec("0.85")));
        let p = horizontal_step(&spec, p).unwrap();
        assert_eq!(p.h_axis[1].coeff, -dec("0.4") * dec("0.6") / dec("0.85"));
        let d1 = p.interior[2].coeff.clone();
        assert_eq!(d1, dec("0.4") * dec("0.6") * dec("0.25") / (dec("0.15") * dec("0.85") * dec("0.2")));
        let p = vertical_step(&spec, p).unwrap();
        assert!(p.trace.terminated);
        assert_eq!(p.v_axis[1].coeff, q(3, 20) * d1);
        assert_eq!(p.trace.final_companion(), Some(&q(0, 1)));
    }

    #[test]
    fn alternating_matches_closed_form() {
        let spec = alternating_service(&alt()).unwrap();
        let sol = run(&spec).unwrap();
        assert_eq!(sol.variant, Variant::Classic);
        assert_eq!(sol.measure.c0, q(25, 16));
        assert_eq!(sol.measure, closed_form_alternating(&alt()).unwrap().canonical());
        let pairs = sol.horizontal_trace.pairs();
        let rt = q(2, 17);
        assert_eq!(pairs[0], PairGD { gamma: q(4, 9), delta: rt.clone() });
        assert_eq!(pairs[1], PairGD { gamma: rt.clone(), delta: rt.clone() });
        assert_eq!(pairs[2], PairGD { gamma: rt, delta: q(9, 34) });
        let mut rev = sol.vertical_trace.pairs();
        rev.reverse();
        assert_eq!(rev, pairs);
    }

    #[test]
    fn fig2_three_terms() {
        let spec: WalkSpec<Q> = fig2_spec().unwrap();
        let p = initial_solution(&spec, Side::Horizontal).unwrap();
        assert_eq!(p.h_axis[0].coeff, q(45, 100));
        let sol = run(&spec).unwrap();
        let pairs = sol.horizontal_trace.pairs();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0], PairGD { gamma: q(6, 11), delta: q(27, 187) });
        assert_eq!(pairs[1], PairGD { gamma: q(27, 187), delta: q(27, 187) });
        assert_eq!(pairs[2], PairGD { gamma: q(27, 187), delta: q(9, 34) });
    }

    #[test]
    fn simultaneous_single_term() {
        let spec = simultaneous_arrivals(&q(3, 5), &q(1, 5)).unwrap();
        let p = initial_solution(&spec, Side::Horizontal).unwrap();
        let p = vertical_step(&spec, p).unwrap();
        assert!(p.trace.terminated);
        assert_eq!(p.interior.len(), 1);
        let sol = run(&spec).unwrap();
        assert_eq!(sol.variant, Variant::Reduced);
        assert_eq!(sol.measure.c0, q(25, 12));
        assert_eq!(sol.measure.evaluate(0, 0), q(5, 12));
        assert_eq!(sol.measure.evaluate(2, 3), q(25, 12) * q(1, 36) * q(27, 512));
        assert_eq!(sol.measure, closed_form_simultaneous(&q(3, 5), &q(1, 5)).unwrap().canonical());
        assert_eq!(run_single_extended(&spec).unwrap(), sol.measure);
    }

    #[test]
    fn counterexamples_fail_with_diagnosis() {
        let wc = work_conserving(&alt()).unwrap();
        match run(&wc) {
            Err(CompensationError::ConditionsUnmet(u)) => {
                assert!(u.contains(ConditionId::B1) && u.contains(ConditionId::B2) && u.contains(ConditionId::D))
            }
            other => panic!("unexpected {other:?}"),
        }
        let fi =
            false_initiation(&FalseInitParams { a: q(3, 5), b: q(4, 5), lambda1: q(1, 5), lambda2: q(3, 20) }).unwrap();
        let p = initial_solution(&fi, Side::Horizontal).unwrap();
        assert_eq!(p.h_axis[0].coeff, q(33, 65));
        assert!(matches!(run(&fi), Err(CompensationError::RootOutOfRange { .. })));
        let (trace, _) = attempt(&fi, Side::Horizontal);
        assert_eq!(trace.steps.len(), 2);
        assert!(trace.diagnosis.is_some());
        assert!(matches!(run_single_extended(&fi), Err(CompensationError::ConditionsUnmet(_))));
    }

    #[test]
    fn unstable_is_not_ergodic() {
        let spec = simultaneous_arrivals(&q(1, 2), &q(1, 2)).unwrap();
        assert!(matches!(run(&spec), Err(CompensationError::NotErgodic { .. })));
    }

    #[test]
    fn float_mode_agrees() {
        let spec = alternating_service(&alt()).unwrap().to_f64(1e-12);
        let sol = run(&spec).unwrap();
        assert!((sol.measure.evaluate(0, 0) - 225.0 / 1224.0).abs() < 1e-14);
        assert!((sol.measure.c0 - 1.5625).abs() < 1e-12);
    }
}
