//! Ergodicity criteria and the geometric marginal distributions.

use thiserror::Error;

use crate::conditions::{
    check_condition_a, check_condition_b1, check_condition_b1x, check_condition_b2, check_condition_b2x,
    UnmetConditions,
};
use crate::model::WalkSpec;
use crate::scalar::Scalar;
use crate::spectral::{rho1, rho2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MarginalError {
    #[error("mean interior drift is zero; the drift criterion does not apply")]
    ZeroMeanDrift,
    #[error("not ergodic: ratio {0} >= 1")]
    NotErgodic(f64),
    #[error("conditions unmet: {0}")]
    ConditionsUnmet(UnmetConditions),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftVectors<S> {
    pub m: (S, S),
    pub mh: (S, S),
    pub mv: (S, S),
}

fn mean<S: Scalar>(kernel: &crate::model::TransitionKernel<S>) -> (S, S) {
    kernel.entries().fold((S::zero(), S::zero()), |(x, y), (k, l, p)| {
        (x + S::from_i64(k as i64) * p.clone(), y + S::from_i64(l as i64) * p.clone())
    })
}

pub fn drift_vectors<S: Scalar>(spec: &WalkSpec<S>) -> DriftVectors<S> {
    DriftVectors { m: mean(&spec.interior), mh: mean(&spec.horizontal), mv: mean(&spec.vertical) }
}

/// ρ₁ < 1 and ρ₂ < 1. Outside Conditions A and B.1 this is computed but is
/// not backed by the theorem; a warning is logged.
pub fn ergodic_rho<S: Scalar>(spec: &WalkSpec<S>) -> Result<bool, MarginalError> {
    if !check_condition_a(spec).holds || !check_condition_b1(spec).holds {
        log::warn!("rho criterion evaluated outside the scope of Conditions A and B.1");
    }
    for w in spec.warnings() {
        log::warn!("{w}");
    }
    let r1 = rho1(spec).map_err(|_| MarginalError::ZeroDenominator("rho1"))?;
    let r2 = rho2(spec).map_err(|_| MarginalError::ZeroDenominator("rho2"))?;
    Ok(r1 < S::one() && r2 < S::one())
}

/// The three sign conditions on the interior and boundary drifts.
pub fn ergodic_fayolle<S: Scalar>(spec: &WalkSpec<S>) -> Result<bool, MarginalError> {
    let DriftVectors { m: (mx, my), mh: (mxh, myh), mv: (mxv, myv) } = drift_vectors(spec);
    if mx.is_zero() && my.is_zero() {
        return Err(MarginalError::ZeroMeanDrift);
    }
    let zero = S::zero();
    let h_cross = mx.clone() * myh - my.clone() * mxh;
    let v_cross = my.clone() * mxv - mx.clone() * myv;
    let c1 = mx < zero && my < zero && h_cross < zero && v_cross < zero;
    let c2 = mx < zero && my >= zero && v_cross < zero;
    let c3 = mx >= zero && my < zero && h_cross < zero;
    Ok(c1 || c2 || c3)
}

/// π₀ = p0 and π_k = prefactor·ratio^k for k ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMarginal<S> {
    pub p0: S,
    pub prefactor: S,
    pub ratio: S,
}

impl<S: Scalar> GeometricMarginal<S> {
    pub fn prob(&self, k: usize) -> S {
        if k == 0 {
            self.p0.clone()
        } else {
            self.prefactor.clone() * self.ratio.powu(k as u32)
        }
    }

    /// p0 + prefactor·ratio/(1−ratio).
    pub fn total(&self) -> S {
        self.p0.clone() + self.prefactor.clone() * self.ratio.clone() / (S::one() - self.ratio.clone())
    }
}

fn marginal_conditions<S: Scalar>(spec: &WalkSpec<S>) -> Result<(), MarginalError> {
    let reports = if spec.has_diagonals() {
        vec![check_condition_b1x(spec), check_condition_b2x(spec)]
    } else {
        vec![check_condition_b1(spec), check_condition_b2(spec)]
    };
    if reports.iter().all(|r| r.holds) {
        Ok(())
    } else {
        Err(MarginalError::ConditionsUnmet(UnmetConditions::from_reports(&reports)))
    }
}

fn geometric<S: Scalar>(
    ratio: S,
    boundary_rate: S,
    bulk_rate: S,
    what: &str,
) -> Result<GeometricMarginal<S>, MarginalError> {
    if ratio >= S::one() {
        return Err(MarginalError::NotErgodic(ratio.to_f64()));
    }
    if bulk_rate.is_zero() {
        return Err(MarginalError::ConditionsUnmet(UnmetConditions::note(format!(
            "{what}: outward rate is zero; component chain is reducible"
        ))));
    }
    let k = boundary_rate / bulk_rate;
    let p0 = S::one() / (S::one() + k.clone() * ratio.clone() / (S::one() - ratio.clone()));
    Ok(GeometricMarginal { prefactor: k * p0.clone(), p0, ratio })
}

/// Distribution of the first coordinate.
pub fn marginal_m<S: Scalar>(spec: &WalkSpec<S>) -> Result<GeometricMarginal<S>, MarginalError> {
    marginal_conditions(spec)?;
    let r = rho1(spec).map_err(|_| MarginalError::ZeroDenominator("rho1"))?;
    let boundary = spec.qv(1, 1) + spec.qv(1, 0) + spec.qv(1, -1);
    let bulk = spec.q(1, 1) + spec.q(1, 0) + spec.q(1, -1);
    geometric(r, boundary, bulk, "m-marginal")
}

/// Distribution of the second coordinate.
pub fn marginal_n<S: Scalar>(spec: &WalkSpec<S>) -> Result<GeometricMarginal<S>, MarginalError> {
    marginal_conditions(spec)?;
    let r = rho2(spec).map_err(|_| MarginalError::ZeroDenominator("rho2"))?;
    let boundary = spec.qh(1, 1) + spec.qh(0, 1) + spec.qh(-1, 1);
    let bulk = spec.q(1, 1) + spec.q(0, 1) + spec.q(-1, 1);
    geometric(r, boundary, bulk, "n-marginal")
}
