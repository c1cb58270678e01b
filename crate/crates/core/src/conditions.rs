//! Structural conditions on the kernels, reported identity by identity.

use std::fmt;

use thiserror::Error;

use crate::model::WalkSpec;
use crate::scalar::Scalar;
use crate::spectral::{h_north, q_east, q_north, rho1, rho2, v_east};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ConditionError {
    #[error("degenerate denominator in {0}; use the reduced variant")]
    DegenerateDenominator(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionId {
    A,
    B1,
    B2,
    C,
    D,
    B1x,
    B2x,
    Cx,
    Dx,
    Reduced,
    Extended,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<S> {
    pub identity: String,
    pub lhs: S,
    pub rhs: S,
    pub residual: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<S> {
    pub id: ConditionId,
    pub holds: bool,
    pub violations: Vec<Violation<S>>,
    /// Shared value of the Condition-C products when they agree.
    pub common: Option<S>,
}

impl<S: Scalar> ConditionReport<S> {
    fn new(id: ConditionId) -> Self {
        Self { id, holds: true, violations: Vec::new(), common: None }
    }

    fn identity(&mut self, name: &str, lhs: S, rhs: S, eps: f64) {
        if !lhs.approx_eq(&rhs, eps) {
            let residual = (lhs.clone() - rhs.clone()).abs();
            self.violations.push(Violation { identity: name.to_string(), lhs, rhs, residual });
            self.holds = false;
        }
    }

    fn absorb(&mut self, other: ConditionReport<S>) {
        self.holds &= other.holds;
        self.violations.extend(other.violations);
    }

    pub fn violated(&self, identity: &str) -> bool {
        self.violations.iter().any(|v| v.identity == identity)
    }

    pub fn identities(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.identity.as_str()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "condition": self.id.to_string(),
            "holds": self.holds,
            "common": self.common.as_ref().map(|c| c.to_string()),
            "violations": self.violations.iter().map(|v| serde_json::json!({
                "identity": v.identity,
                "lhs": v.lhs.to_string(),
                "rhs": v.rhs.to_string(),
                "residual": v.residual.to_string(),
            })).collect::<Vec<_>>(),
        })
    }
}

impl<S: Scalar> fmt::Display for ConditionReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, if self.holds { "holds" } else { "fails" })?;
        if let Some(c) = &self.common {
            write!(f, " (common product {c})")?;
        }
        for v in &self.violations {
            write!(f, "\n  {}: lhs={} rhs={} residual={}", v.identity, v.lhs, v.rhs, v.residual)?;
        }
        Ok(())
    }
}

pub fn check_condition_a<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::A);
    r.identity("A.(1,1)", spec.q(1, 1), S::zero(), eps);
    r.identity("A.(-1,-1)", spec.q(-1, -1), S::zero(), eps);
    r
}

pub fn check_condition_b1<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::B1);
    r.identity("B1.h.(1,1)", spec.qh(1, 1), spec.q(1, 0), eps);
    r.identity("B1.h.(1,0)", spec.qh(1, 0), spec.q(1, -1), eps);
    r.identity("B1.h.(-1,0)", spec.qh(-1, 0), spec.q(-1, 0), eps);
    r.identity("B1.h.(-1,1)", spec.qh(-1, 1), spec.q(-1, 1), eps);
    r.identity("B1.v.(1,1)", spec.qv(1, 1), spec.q(0, 1), eps);
    r.identity("B1.v.(0,1)", spec.qv(0, 1), spec.q(-1, 1), eps);
    r.identity("B1.v.(0,-1)", spec.qv(0, -1), spec.q(0, -1), eps);
    r.identity("B1.v.(1,-1)", spec.qv(1, -1), spec.q(1, -1), eps);
    r
}

pub fn check_condition_b2<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::B2);
    r.identity("B2.(0,1)", spec.q0(0, 1) + spec.q(0, 1), spec.qh(0, 1) + spec.qv(0, 1), eps);
    r.identity("B2.(1,0)", spec.q0(1, 0) + spec.q(1, 0), spec.qh(1, 0) + spec.qv(1, 0), eps);
    r.identity("B2.(1,1)", spec.q0(1, 1), spec.qh(1, 1) + spec.qv(1, 1), eps);
    r.identity("B2.(0,0)", spec.q0(0, 0) + spec.q(0, 0), spec.qh(0, 0) + spec.qv(0, 0), eps);
    r
}

pub fn check_condition_c<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::C);
    let p1 = spec.q(1, 0) * spec.q(-1, 0);
    let p2 = spec.q(0, 1) * spec.q(0, -1);
    let p3 = spec.q(-1, 1) * spec.q(1, -1);
    r.identity("C.prod12", p1.clone(), p2, eps);
    r.identity("C.prod13", p1.clone(), p3, eps);
    if r.holds {
        r.common = Some(p1);
    }
    r
}

pub fn check_condition_d<S: Scalar>(spec: &WalkSpec<S>) -> Result<ConditionReport<S>, ConditionError> {
    let eps = spec.eps();
    let (q10, q01) = (spec.q(1, 0), spec.q(0, 1));
    if q10.is_zero() {
        return Err(ConditionError::DegenerateDenominator("D.v(1,0): q(1,0)=0"));
    }
    if q01.is_zero() {
        return Err(ConditionError::DegenerateDenominator("D.h(0,1): q(0,1)=0"));
    }
    let mut r = ConditionReport::new(ConditionId::D);
    let v10 = q10.clone() + spec.q(1, -1) * q01.clone() / q10.clone();
    let h01 = q01.clone() + spec.q(-1, 1) * q10 / q01;
    r.identity("D.v(1,0)", spec.qv(1, 0), v10, eps);
    r.identity("D.h(0,1)", spec.qh(0, 1), h01, eps);
    Ok(r)
}

/// The single-product-form regime with q(1,-1) = q(-1,1) = 0.
pub fn check_reduced_variant<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::Reduced);
    r.identity("R.(1,-1)", spec.q(1, -1), S::zero(), eps);
    r.identity("R.(-1,1)", spec.q(-1, 1), S::zero(), eps);
    r.identity("R.prod", spec.q(1, 0) * spec.q(-1, 0), spec.q(0, 1) * spec.q(0, -1), eps);
    r.identity("R.o(0,1)", spec.q0(0, 1), S::zero(), eps);
    r.identity("R.o(1,0)", spec.q0(1, 0), S::zero(), eps);
    r.identity("R.h(0,1)", spec.qh(0, 1), spec.q(0, 1), eps);
    r.identity("R.v(1,0)", spec.qv(1, 0), spec.q(1, 0), eps);
    r.absorb(check_condition_a(spec));
    r.absorb(check_condition_b1(spec));
    r.absorb(check_condition_b2(spec));
    r
}

pub fn check_condition_b1x<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::B1x);
    let (q11, qmm) = (spec.q(1, 1), spec.q(-1, -1));
    r.identity("B1x.h.(1,1)", spec.qh(1, 1), spec.q(1, 0) + q11.clone(), eps);
    r.identity("B1x.h.(1,0)", spec.qh(1, 0), spec.q(1, -1), eps);
    r.identity("B1x.h.(-1,0)", spec.qh(-1, 0), spec.q(-1, 0) + qmm.clone(), eps);
    r.identity("B1x.h.(-1,1)", spec.qh(-1, 1), spec.q(-1, 1), eps);
    r.identity("B1x.v.(1,1)", spec.qv(1, 1), spec.q(0, 1) + q11, eps);
    r.identity("B1x.v.(0,1)", spec.qv(0, 1), spec.q(-1, 1), eps);
    r.identity("B1x.v.(0,-1)", spec.qv(0, -1), spec.q(0, -1) + qmm, eps);
    r.identity("B1x.v.(1,-1)", spec.qv(1, -1), spec.q(1, -1), eps);
    r
}

pub fn check_condition_b2x<S: Scalar>(spec: &WalkSpec<S>) -> ConditionReport<S> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::B2x);
    r.identity("B2x.(0,1)", spec.q0(0, 1) + spec.q(0, 1), spec.qh(0, 1) + spec.qv(0, 1), eps);
    r.identity("B2x.(1,0)", spec.q0(1, 0) + spec.q(1, 0), spec.qh(1, 0) + spec.qv(1, 0), eps);
    r.identity("B2x.(1,1)", spec.q0(1, 1) + spec.q(1, 1), spec.qh(1, 1) + spec.qv(1, 1), eps);
    r.identity("B2x.(0,0)", spec.q0(0, 0) + spec.q(0, 0), spec.qh(0, 0) + spec.qv(0, 0) + spec.q(-1, -1), eps);
    r
}

fn extended_rhos<S: Scalar>(spec: &WalkSpec<S>) -> Result<(S, S), ConditionError> {
    let g = rho1(spec).map_err(|_| ConditionError::DegenerateDenominator("rho1"))?;
    let d = rho2(spec).map_err(|_| ConditionError::DegenerateDenominator("rho2"))?;
    Ok((g, d))
}

/// The cubic identity, plus the two identities that close the axis and corner
/// equations of the one-term measure at (ρ₁, ρ₂).
pub fn check_condition_cx<S: Scalar>(spec: &WalkSpec<S>) -> Result<ConditionReport<S>, ConditionError> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::Cx);
    let q = |k, l| spec.q(k, l);
    let t = S::one() - q(0, 0);
    let lhs = q(-1, 1) * q(1, -1) * t.clone() + q(-1, 1) * q(1, 0) * q(0, -1) + q(1, -1) * q(-1, 0) * q(0, 1);
    let rhs = q(-1, -1) * q(1, 1) * t + q(-1, -1) * q(1, 0) * q(0, 1) + q(1, 1) * q(-1, 0) * q(0, -1);
    r.identity("Cx.cubic", lhs, rhs, eps);
    let (g, d) = extended_rhos(spec)?;
    let (qn, hn) = (q_north(spec, &g), h_north(spec, &g));
    let (qe, ve) = (q_east(spec, &d), v_east(spec, &d));
    r.identity("Cx.axis", qn.clone() * ve, qe * hn.clone(), eps);
    r.identity("Cx.corner", q(1, 1) * hn, q(1, 1) * qn, eps);
    Ok(r)
}

pub fn check_condition_dx<S: Scalar>(spec: &WalkSpec<S>) -> Result<ConditionReport<S>, ConditionError> {
    let eps = spec.eps();
    let mut r = ConditionReport::new(ConditionId::Dx);
    let (g, d) = extended_rhos(spec)?;
    let dh = spec.q(1, 1) + spec.q(0, 1) * g.clone();
    let dv = spec.q(1, 1) + spec.q(1, 0) * d.clone();
    if dh.is_zero() {
        return Err(ConditionError::DegenerateDenominator("Dx.h(0,1): q(1,1)+q(0,1)γ₀=0"));
    }
    if dv.is_zero() {
        return Err(ConditionError::DegenerateDenominator("Dx.v(1,0): q(1,1)+q(1,0)δ₀=0"));
    }
    let h01 = spec.q(0, 1) + spec.q(-1, 1) * spec.q(1, 0) * g / dh;
    let v10 = spec.q(1, 0) + spec.q(1, -1) * spec.q(0, 1) * d / dv;
    r.identity("Dx.h(0,1)", spec.qh(0, 1), h01, eps);
    r.identity("Dx.v(1,0)", spec.qv(1, 0), v10, eps);
    Ok(r)
}

/// All relaxed-diagonal conditions combined.
pub fn check_extended_variant<S: Scalar>(spec: &WalkSpec<S>) -> Result<ConditionReport<S>, ConditionError> {
    let mut r = ConditionReport::new(ConditionId::Extended);
    r.absorb(check_condition_b1x(spec));
    r.absorb(check_condition_b2x(spec));
    r.absorb(check_condition_cx(spec)?);
    r.absorb(check_condition_dx(spec)?);
    Ok(r)
}

/// Reports for A, B1, B2, C and D; a degenerate D shows up as a violation.
pub fn check_all<S: Scalar>(spec: &WalkSpec<S>) -> Vec<ConditionReport<S>> {
    let d = check_condition_d(spec).unwrap_or_else(|e| {
        let mut r = ConditionReport::new(ConditionId::D);
        r.holds = false;
        r.violations.push(Violation { identity: e.to_string(), lhs: S::zero(), rhs: S::zero(), residual: S::zero() });
        r
    });
    vec![check_condition_a(spec), check_condition_b1(spec), check_condition_b2(spec), check_condition_c(spec), d]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Conditions A–D: three product-form terms.
    Classic,
    /// Single product form with q(1,-1) = q(-1,1) = 0.
    Reduced,
    /// Single product form with diagonal jumps.
    Extended,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Classic => "classic",
            Variant::Reduced => "reduced",
            Variant::Extended => "extended",
        })
    }
}

pub fn variant_holds<S: Scalar>(spec: &WalkSpec<S>, variant: Variant) -> bool {
    match variant {
        Variant::Classic => check_all(spec).iter().all(|r| r.holds),
        Variant::Reduced => check_reduced_variant(spec).holds,
        Variant::Extended => check_extended_variant(spec).map(|r| r.holds).unwrap_or(false),
    }
}

/// The first variant that holds, preferring the single-term regimes.
pub fn detect_variant<S: Scalar>(spec: &WalkSpec<S>) -> Option<Variant> {
    [Variant::Reduced, Variant::Classic, Variant::Extended].into_iter().find(|v| variant_holds(spec, *v))
}

/// Names of the conditions and identities that blocked an operation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnmetConditions {
    pub conditions: Vec<ConditionId>,
    pub identities: Vec<String>,
}

impl UnmetConditions {
    pub fn from_reports<S: Scalar>(reports: &[ConditionReport<S>]) -> Self {
        let failing: Vec<_> = reports.iter().filter(|r| !r.holds).collect();
        Self {
            conditions: failing.iter().map(|r| r.id).collect(),
            identities: failing.iter().flat_map(|r| r.violations.iter().map(|v| v.identity.clone())).collect(),
        }
    }

    pub fn note(identity: impl Into<String>) -> Self {
        Self { conditions: Vec::new(), identities: vec![identity.into()] }
    }

    pub fn contains(&self, id: ConditionId) -> bool {
        self.conditions.contains(&id)
    }
}

impl fmt::Display for UnmetConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.conditions.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}] {}", ids.join(","), self.identities.join(" "))
    }
}
