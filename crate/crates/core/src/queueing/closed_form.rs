use crate::compensation::{BoundaryTerm, GeometricTerm, InvariantMeasure};
use crate::scalar::Scalar;

use super::{bar, half_open_unit, open_unit, AlternatingParams, QueueingError};

/// Explicit three-term measure of the alternating-service model.
pub fn closed_form_alternating<S: Scalar>(p: &AlternatingParams<S>) -> Result<InvariantMeasure<S>, QueueingError> {
    p.validate()?;
    let (a, l1, l2) = (p.a.clone(), p.lambda1.clone(), p.lambda2.clone());
    let (ab, l1b, l2b) = (bar(&a), bar(&l1), bar(&l2));
    if l1.is_zero() || l2.is_zero() {
        return Err(QueueingError::DegenerateDenominator("closed form needs positive arrival rates".into()));
    }
    let r1 = ab.clone() * l1.clone() / (a.clone() * l1b.clone());
    let r2 = a.clone() * l2.clone() / (ab.clone() * l2b.clone());
    if !p.is_stable() {
        return Err(QueueingError::NotErgodic { rho1: r1.to_f64(), rho2: r2.to_f64() });
    }
    let rt = r1.clone() * r2.clone();
    let slack = S::one() - l1.clone() - l2.clone();
    let c0 = (a.clone() - l1.clone()) * slack.clone() / (a.clone() * ab.clone() * l1.clone() * l1b.clone());
    let c2 = (ab.clone() - l2.clone()) * slack.clone() / (a.clone() * ab.clone() * l2.clone() * l2b.clone());
    let c3 = slack.clone() * slack.clone() / (l1.clone() * l1b.clone() * l2.clone() * l2b.clone());
    let kv = (ab.clone() - l2.clone()) * slack.clone() / (a.clone() * l2b.clone());
    let kh = (a.clone() - l1) * slack / (ab.clone() * l1b.clone());
    let g = |coeff: S, gamma: &S, delta: &S| GeometricTerm { coeff, gamma: gamma.clone(), delta: delta.clone() };
    let b = |coeff: S, ratio: &S| BoundaryTerm { coeff, ratio: ratio.clone() };
    Ok(InvariantMeasure {
        interior_terms: vec![g(c0.clone(), &r1, &rt), g(c2, &rt, &r2), g(-c3, &rt, &rt)],
        h_axis_terms: vec![b(kh.clone() / a, &r1), b(-kh / l2b, &rt)],
        v_axis_terms: vec![b(kv.clone() / ab, &r2), b(-kv / l1b, &rt)],
        c0,
    })
}

/// Single product form of the simultaneous-arrivals model.
pub fn closed_form_simultaneous<S: Scalar>(a: &S, lambda: &S) -> Result<InvariantMeasure<S>, QueueingError> {
    open_unit("a", a)?;
    half_open_unit("lambda", lambda)?;
    let (ab, lb) = (bar(a), bar(lambda));
    if lambda.is_zero() {
        return Err(QueueingError::DegenerateDenominator("closed form needs a positive arrival rate".into()));
    }
    let r1 = ab.clone() * lambda.clone() / (a.clone() * lb.clone());
    let r2 = a.clone() * lambda.clone() / (ab.clone() * lb.clone());
    if *lambda >= *a || *lambda >= ab {
        return Err(QueueingError::NotErgodic { rho1: r1.to_f64(), rho2: r2.to_f64() });
    }
    let c0 = (a.clone() - lambda.clone()) * (ab.clone() - lambda.clone()) / (a.clone() * ab * lb * lambda.clone());
    let origin = c0.clone() * lambda.clone();
    Ok(InvariantMeasure {
        interior_terms: vec![GeometricTerm { coeff: c0.clone(), gamma: r1.clone(), delta: r2.clone() }],
        h_axis_terms: vec![BoundaryTerm { coeff: origin.clone(), ratio: r1 }],
        v_axis_terms: vec![BoundaryTerm { coeff: origin, ratio: r2 }],
        c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    #[test]
    fn alternating_origin_value() {
        let p = AlternatingParams { a: Q::ratio(3, 5), lambda1: Q::ratio(2, 5), lambda2: Q::ratio(3, 20) };
        let m = closed_form_alternating(&p).unwrap();
        assert_eq!(m.c0, Q::ratio(25, 16));
        assert_eq!(m.evaluate(0, 0), Q::ratio(225, 1224));
        assert_eq!(m.origin_via_v_axis(), m.evaluate(0, 0));
        assert_eq!(m.total_mass().unwrap(), Q::ratio(1, 1));
    }

    #[test]
    fn simultaneous_values() {
        let m = closed_form_simultaneous(&Q::ratio(3, 5), &Q::ratio(1, 5)).unwrap();
        assert_eq!(m.c0, Q::ratio(25, 12));
        assert_eq!(m.evaluate(0, 0), Q::ratio(5, 12));
        assert_eq!(m.evaluate(3, 0), Q::ratio(5, 12) * Q::ratio(1, 216));
        assert_eq!(m.evaluate(2, 3), Q::ratio(25, 12) * Q::ratio(1, 36) * Q::ratio(27, 512));
        assert_eq!(m.total_mass().unwrap(), Q::ratio(1, 1));
    }

    #[test]
    fn unstable_is_rejected() {
        let p = AlternatingParams { a: Q::ratio(1, 2), lambda1: Q::ratio(1, 2), lambda2: Q::ratio(1, 5) };
        assert!(matches!(closed_form_alternating(&p), Err(QueueingError::NotErgodic { .. })));
        assert!(matches!(
            closed_form_simultaneous(&Q::ratio(1, 2), &Q::ratio(1, 2)),
            Err(QueueingError::NotErgodic { .. })
        ));
    }
}
