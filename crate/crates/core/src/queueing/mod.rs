//! Concrete queueing models, their reference measures and the batch-arrival
//! model with geometric batches.

mod batch;
mod closed_form;

use thiserror::Error;

use crate::conditions::{check_all, check_extended_variant, check_reduced_variant, UnmetConditions};
use crate::model::{build_spec, ModelError, TransitionKernel, WalkSpec, DEFAULT_EPS};
use crate::scalar::Scalar;
use crate::spectral::{kernel_rho1, kernel_rho2, rho1, rho2};

pub use batch::{batch_arrival_pmf, batch_geometric_measure, delta_equation, BatchGeometricParams, BatchReport};
pub use closed_form::{closed_form_alternating, closed_form_simultaneous};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QueueingError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not ergodic: rho1={rho1}, rho2={rho2}")]
    NotErgodic { rho1: f64, rho2: f64 },
    #[error("conditions unmet: {0}")]
    ConditionsUnmet(UnmetConditions),
    #[error("boundary completion infeasible: {0}")]
    CompletionInfeasible(String),
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
}

impl From<ModelError> for QueueingError {
    fn from(e: ModelError) -> Self {
        QueueingError::InvalidParameter(e.to_string())
    }
}

/// Randomly alternating server with independent Bernoulli arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingParams<S> {
    /// Probability that the server picks queue 1.
    pub a: S,
    pub lambda1: S,
    pub lambda2: S,
}

impl<S: Scalar> AlternatingParams<S> {
    pub fn validate(&self) -> Result<(), QueueingError> {
        open_unit("a", &self.a)?;
        half_open_unit("lambda1", &self.lambda1)?;
        half_open_unit("lambda2", &self.lambda2)
    }

    pub fn is_stable(&self) -> bool {
        self.lambda1 < self.a && self.lambda2 < S::one() - self.a.clone()
    }
}

/// Service choice with an option to serve both queues at once.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedParams<S> {
    /// Paired service.
    pub a0: S,
    pub a1: S,
    pub a2: S,
    pub lambda1: S,
    pub lambda2: S,
}

impl<S: Scalar> PairedParams<S> {
    pub fn validate(&self) -> Result<(), QueueingError> {
        for (name, v) in [("a0", &self.a0), ("a1", &self.a1), ("a2", &self.a2)] {
            closed_unit(name, v)?;
        }
        let total = self.a0.clone() + self.a1.clone() + self.a2.clone();
        if !total.approx_eq(&S::one(), DEFAULT_EPS) {
            return Err(QueueingError::InvalidParameter(format!("a0+a1+a2 = {total}, expected 1")));
        }
        half_open_unit("lambda1", &self.lambda1)?;
        half_open_unit("lambda2", &self.lambda2)
    }
}

/// Switches to the chosen queue succeed only with probability `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FalseInitParams<S> {
    pub a: S,
    pub b: S,
    pub lambda1: S,
    pub lambda2: S,
}

impl<S: Scalar> FalseInitParams<S> {
    pub fn validate(&self) -> Result<(), QueueingError> {
        open_unit("a", &self.a)?;
        if !self.b.is_positive() || self.b > S::one() {
            return Err(QueueingError::InvalidParameter(format!("b = {} must lie in (0,1]", self.b)));
        }
        half_open_unit("lambda1", &self.lambda1)?;
        half_open_unit("lambda2", &self.lambda2)
    }
}

fn open_unit<S: Scalar>(name: &str, v: &S) -> Result<(), QueueingError> {
    if v.is_positive() && *v < S::one() {
        Ok(())
    } else {
        Err(QueueingError::InvalidParameter(format!("{name} = {v} must lie in (0,1)")))
    }
}

fn half_open_unit<S: Scalar>(name: &str, v: &S) -> Result<(), QueueingError> {
    if !v.is_negative() && *v < S::one() {
        Ok(())
    } else {
        Err(QueueingError::InvalidParameter(format!("{name} = {v} must lie in [0,1)")))
    }
}

fn closed_unit<S: Scalar>(name: &str, v: &S) -> Result<(), QueueingError> {
    if !v.is_negative() && *v <= S::one() {
        Ok(())
    } else {
        Err(QueueingError::InvalidParameter(format!("{name} = {v} must lie in [0,1]")))
    }
}

fn kernel<S: Scalar>(entries: Vec<((i32, i32), S)>) -> TransitionKernel<S> {
    let mut k = TransitionKernel::<S>::zero();
    for ((dk, dl), v) in entries {
        let sum = k.get(dk, dl).clone() + v;
        k.set(dk, dl, sum);
    }
    k
}

fn bar<S: Scalar>(x: &S) -> S {
    S::one() - x.clone()
}

fn alternating_interior<S: Scalar>(a: &S, l1: &S, l2: &S) -> TransitionKernel<S> {
    let (ab, l1b, l2b) = (bar(a), bar(l1), bar(l2));
    let (a, l1, l2) = (a.clone(), l1.clone(), l2.clone());
    kernel(vec![
        ((0, 1), a.clone() * l1.clone() * l2.clone()),
        ((-1, 1), a.clone() * l1b.clone() * l2.clone()),
        ((0, 0), a.clone() * l1.clone() * l2b.clone() + ab.clone() * l1b.clone() * l2.clone()),
        ((1, 0), ab.clone() * l2.clone() * l1.clone()),
        ((1, -1), ab.clone() * l1.clone() * l2b.clone()),
        ((-1, 0), a * l1b.clone() * l2b.clone()),
        ((0, -1), ab * l1b * l2b),
    ])
}

fn bernoulli_origin<S: Scalar>(l1: &S, l2: &S) -> TransitionKernel<S> {
    let (l1b, l2b) = (bar(l1), bar(l2));
    kernel(vec![
        ((0, 0), l1b.clone() * l2b.clone()),
        ((1, 0), l1.clone() * l2b),
        ((0, 1), l2.clone() * l1b),
        ((1, 1), l1.clone() * l2.clone()),
    ])
}

/// Non-work-conserving alternating server.
pub fn alternating_service<S: Scalar>(p: &AlternatingParams<S>) -> Result<WalkSpec<S>, QueueingError> {
    p.validate()?;
    let (a, l1, l2) = (&p.a, &p.lambda1, &p.lambda2);
    let (ab, l1b, l2b) = (bar(a), bar(l1), bar(l2));
    let horizontal = kernel(vec![
        ((0, 1), a.clone() * l1.clone() * l2.clone() + ab.clone() * l1b.clone() * l2.clone()),
        ((-1, 1), a.clone() * l1b.clone() * l2.clone()),
        ((0, 0), a.clone() * l1.clone() * l2b.clone() + ab.clone() * l1b.clone() * l2b.clone()),
        ((1, 0), ab.clone() * l2b.clone() * l1.clone()),
        ((1, 1), ab.clone() * l1.clone() * l2.clone()),
        ((-1, 0), a.clone() * l1b.clone() * l2b.clone()),
    ]);
    let vertical = kernel(vec![
        ((0, 1), a.clone() * l1b.clone() * l2.clone()),
        ((1, -1), ab.clone() * l1.clone() * l2b.clone()),
        ((0, 0), a.clone() * l1b.clone() * l2b.clone() + ab.clone() * l1b.clone() * l2.clone()),
        ((1, 0), ab.clone() * l1.clone() * l2.clone() + a.clone() * l1.clone() * l2b.clone()),
        ((1, 1), a.clone() * l1.clone() * l2.clone()),
        ((0, -1), ab * l1b * l2b),
    ]);
    let spec =
        build_spec(alternating_interior(a, l1, l2), horizontal, vertical, bernoulli_origin(l1, l2), DEFAULT_EPS)?;
    if l1.is_zero() || l2.is_zero() {
        log::warn!("alternating_service: an arrival rate is zero, the walk is degenerate");
        return Ok(spec);
    }
    let reports = check_all(&spec);
    if reports.iter().any(|r| !r.holds) {
        return Err(QueueingError::ConditionsUnmet(UnmetConditions::from_reports(&reports)));
    }
    Ok(spec)
}

/// Work-conserving variant: an idle choice is redirected to the other queue.
pub fn work_conserving<S: Scalar>(p: &AlternatingParams<S>) -> Result<WalkSpec<S>, QueueingError> {
    p.validate()?;
    let (l1, l2) = (&p.lambda1, &p.lambda2);
    let (l1b, l2b) = (bar(l1), bar(l2));
    let horizontal = kernel(vec![
        ((-1, 0), l1b.clone() * l2b.clone()),
        ((0, 0), l1.clone() * l2b.clone()),
        ((-1, 1), l1b.clone() * l2.clone()),
        ((0, 1), l1.clone() * l2.clone()),
    ]);
    let vertical = kernel(vec![
        ((0, -1), l1b.clone() * l2b.clone()),
        ((1, -1), l1.clone() * l2b),
        ((0, 0), l1b * l2.clone()),
        ((1, 0), l1.clone() * l2.clone()),
    ]);
    Ok(build_spec(alternating_interior(&p.a, l1, l2), horizontal, vertical, bernoulli_origin(l1, l2), DEFAULT_EPS)?)
}

/// One arrival stream that adds a job to both queues.
pub fn simultaneous_arrivals<S: Scalar>(a: &S, lambda: &S) -> Result<WalkSpec<S>, QueueingError> {
    open_unit("a", a)?;
    half_open_unit("lambda", lambda)?;
    let (ab, lb) = (bar(a), bar(lambda));
    let l = lambda.clone();
    let interior = kernel(vec![
        ((0, 1), a.clone() * l.clone()),
        ((1, 0), ab.clone() * l.clone()),
        ((-1, 0), a.clone() * lb.clone()),
        ((0, -1), ab.clone() * lb.clone()),
    ]);
    let horizontal = kernel(vec![
        ((0, 1), a.clone() * l.clone()),
        ((1, 1), ab.clone() * l.clone()),
        ((-1, 0), a.clone() * lb.clone()),
        ((0, 0), ab.clone() * lb.clone()),
    ]);
    let vertical = kernel(vec![
        ((1, 1), a.clone() * l.clone()),
        ((1, 0), ab.clone() * l.clone()),
        ((0, 0), a.clone() * lb.clone()),
        ((0, -1), ab * lb.clone()),
    ]);
    let origin = kernel(vec![((1, 1), l), ((0, 0), lb)]);
    let spec = build_spec(interior, horizontal, vertical, origin, DEFAULT_EPS)?;
    let report = check_reduced_variant(&spec);
    if !report.holds {
        return Err(QueueingError::ConditionsUnmet(UnmetConditions::from_reports(&[report])));
    }
    Ok(spec)
}

/// Paired service adds jumps to the South-West.
pub fn paired_service<S: Scalar>(p: &PairedParams<S>) -> Result<WalkSpec<S>, QueueingError> {
    p.validate()?;
    let (a0, a1, a2) = (p.a0.clone(), p.a1.clone(), p.a2.clone());
    let (l1, l2) = (p.lambda1.clone(), p.lambda2.clone());
    let (l1b, l2b) = (bar(&l1), bar(&l2));
    let interior = kernel(vec![
        (
            (0, 0),
            a0.clone() * l1.clone() * l2.clone()
                + a1.clone() * l1.clone() * l2b.clone()
                + a2.clone() * l2.clone() * l1b.clone(),
        ),
        ((-1, 0), a0.clone() * l1b.clone() * l2.clone() + a1.clone() * l1b.clone() * l2b.clone()),
        ((0, -1), a0.clone() * l2b.clone() * l1.clone() + a2.clone() * l1b.clone() * l2b.clone()),
        ((-1, -1), a0.clone() * l1b.clone() * l2b.clone()),
        ((0, 1), a1.clone() * l1.clone() * l2.clone()),
        ((-1, 1), a1.clone() * l1b.clone() * l2.clone()),
        ((1, 0), a2.clone() * l1.clone() * l2.clone()),
        ((1, -1), a2.clone() * l1.clone() * l2b.clone()),
    ]);
    let a01 = a0.clone() + a1.clone();
    let a02 = a0 + a2.clone();
    let horizontal = kernel(vec![
        ((0, 0), a01.clone() * l1.clone() * l2b.clone() + a2.clone() * l2b.clone() * l1b.clone()),
        ((-1, 0), a01.clone() * l1b.clone() * l2b.clone()),
        ((0, 1), a01.clone() * l1.clone() * l2.clone() + a2.clone() * l1b.clone() * l2.clone()),
        ((-1, 1), a01 * l1b.clone() * l2.clone()),
        ((1, 0), a2.clone() * l1.clone() * l2b.clone()),
        ((1, 1), a2 * l1.clone() * l2.clone()),
    ]);
    let vertical = kernel(vec![
        ((0, 0), a02.clone() * l2.clone() * l1b.clone() + a1.clone() * l2b.clone() * l1b.clone()),
        ((0, -1), a02.clone() * l1b.clone() * l2b.clone()),
        ((1, 0), a02.clone() * l1.clone() * l2.clone() + a1.clone() * l2b.clone() * l1.clone()),
        ((1, -1), a02 * l2b * l1.clone()),
        ((0, 1), a1.clone() * l2.clone() * l1b),
        ((1, 1), a1 * l1.clone() * l2.clone()),
    ]);
    Ok(build_spec(interior, horizontal, vertical, bernoulli_origin(&l1, &l2), DEFAULT_EPS)?)
}

/// Failed switches add jumps to the North-East.
pub fn false_initiation<S: Scalar>(p: &FalseInitParams<S>) -> Result<WalkSpec<S>, QueueingError> {
    p.validate()?;
    let (a, b) = (p.a.clone(), p.b.clone());
    let (ab, bb) = (bar(&a), bar(&b));
    let (l1, l2) = (p.lambda1.clone(), p.lambda2.clone());
    let (l1b, l2b) = (bar(&l1), bar(&l2));
    let interior = kernel(vec![
        ((0, 1), a.clone() * b.clone() * l1.clone() * l2.clone() + bb.clone() * l1b.clone() * l2.clone()),
        ((-1, 1), a.clone() * b.clone() * l1b.clone() * l2.clone()),
        (
            (0, 0),
            a.clone() * b.clone() * l1.clone() * l2b.clone()
                + ab.clone() * b.clone() * l1b.clone() * l2.clone()
                + bb.clone() * l1b.clone() * l2b.clone(),
        ),
        ((1, 0), ab.clone() * b.clone() * l2.clone() * l1.clone() + bb.clone() * l1.clone() * l2b.clone()),
        ((1, -1), ab.clone() * b.clone() * l1.clone() * l2b.clone()),
        ((-1, 0), a.clone() * b.clone() * l1b.clone() * l2b.clone()),
        ((0, -1), ab.clone() * b.clone() * l1b.clone() * l2b.clone()),
        ((1, 1), bb.clone() * l1.clone() * l2.clone()),
    ]);
    // Probability that queue 1 is not served from a horizontal state, and the
    // same for queue 2 from a vertical state.
    let miss1 = ab.clone() * b.clone() + a.clone() * bb.clone() + ab.clone() * bb.clone();
    let miss2 = a.clone() * b.clone() + a.clone() * bb.clone() + ab.clone() * bb;
    let horizontal = kernel(vec![
        ((0, 1), a.clone() * b.clone() * l1.clone() * l2.clone() + miss1.clone() * l1b.clone() * l2.clone()),
        ((-1, 1), a.clone() * b.clone() * l1b.clone() * l2.clone()),
        ((0, 0), a.clone() * b.clone() * l1.clone() * l2b.clone() + miss1.clone() * l1b.clone() * l2b.clone()),
        ((1, 0), miss1.clone() * l2b.clone() * l1.clone()),
        ((1, 1), miss1 * l1.clone() * l2.clone()),
        ((-1, 0), a * b.clone() * l1b.clone() * l2b.clone()),
    ]);
    let vertical = kernel(vec![
        ((0, 1), miss2.clone() * l1b.clone() * l2.clone()),
        ((1, -1), ab.clone() * b.clone() * l1.clone() * l2b.clone()),
        ((0, 0), miss2.clone() * l1b.clone() * l2b.clone() + ab.clone() * b.clone() * l1b.clone() * l2.clone()),
        ((1, 0), ab.clone() * b.clone() * l1.clone() * l2.clone() + miss2.clone() * l1.clone() * l2b.clone()),
        ((1, 1), miss2 * l1.clone() * l2.clone()),
        ((0, -1), ab * b * l1b * l2b),
    ]);
    Ok(build_spec(interior, horizontal, vertical, bernoulli_origin(&l1, &l2), DEFAULT_EPS)?)
}

/// Completes boundary and origin kernels from an interior kernel so that the
/// boundary, origin and injection conditions hold. With diagonal jumps the
/// relaxed forms are used; without them they coincide with the plain ones.
pub fn complete_boundaries<S: Scalar>(interior: &TransitionKernel<S>) -> Result<WalkSpec<S>, QueueingError> {
    let q = |k, l| interior.get(k, l).clone();
    let infeasible = |what: &str, v: &S| QueueingError::CompletionInfeasible(format!("{what} = {v}"));
    for (k, l, v) in interior.entries() {
        if v.is_negative() {
            return Err(infeasible(&format!("q({k},{l})"), v));
        }
    }
    let sum = interior.sum();
    if !sum.approx_eq(&S::one(), DEFAULT_EPS) {
        return Err(QueueingError::InvalidParameter(format!("interior kernel sums to {sum}")));
    }
    let g = kernel_rho1(interior).map_err(|e| QueueingError::DegenerateDenominator(e.to_string()))?;
    let d = kernel_rho2(interior).map_err(|e| QueueingError::DegenerateDenominator(e.to_string()))?;
    let dh = q(1, 1) + q(0, 1) * g.clone();
    let dv = q(1, 1) + q(1, 0) * d.clone();
    if dh.is_zero() || dv.is_zero() {
        return Err(QueueingError::DegenerateDenominator("injection identity has a zero denominator".into()));
    }
    let qh01 = q(0, 1) + q(-1, 1) * q(1, 0) * g / dh;
    let qv10 = q(1, 0) + q(1, -1) * q(0, 1) * d / dv;

    let mut horizontal = kernel(vec![
        ((1, 1), q(1, 0) + q(1, 1)),
        ((1, 0), q(1, -1)),
        ((-1, 0), q(-1, 0) + q(-1, -1)),
        ((-1, 1), q(-1, 1)),
        ((0, 1), qh01.clone()),
    ]);
    let qh00 = S::one() - horizontal.sum();
    horizontal.set(0, 0, qh00.clone());
    let mut vertical = kernel(vec![
        ((1, 1), q(0, 1) + q(1, 1)),
        ((0, 1), q(-1, 1)),
        ((0, -1), q(0, -1) + q(-1, -1)),
        ((1, -1), q(1, -1)),
        ((1, 0), qv10.clone()),
    ]);
    let qv00 = S::one() - vertical.sum();
    vertical.set(0, 0, qv00.clone());
    let origin = kernel(vec![
        ((0, 1), qh01 + vertical.get(0, 1).clone() - q(0, 1)),
        ((1, 0), horizontal.get(1, 0).clone() + qv10 - q(1, 0)),
        ((1, 1), horizontal.get(1, 1).clone() + vertical.get(1, 1).clone() - q(1, 1)),
        ((0, 0), qh00 + qv00 + q(-1, -1) - q(0, 0)),
    ]);
    for (name, k) in [("horizontal", &horizontal), ("vertical", &vertical), ("origin", &origin)] {
        for (dk, dl, v) in k.entries() {
            if v.is_negative() || *v > S::one() {
                return Err(infeasible(&format!("{name}({dk},{dl})"), v));
            }
        }
    }
    build_spec(interior.clone(), horizontal, vertical, origin, DEFAULT_EPS)
        .map_err(|e| QueueingError::CompletionInfeasible(e.to_string()))
}

/// Completion for an interior with diagonal jumps; the result must satisfy
/// the relaxed single-term conditions.
pub fn extended_neighbors<S: Scalar>(interior: &TransitionKernel<S>) -> Result<WalkSpec<S>, QueueingError> {
    let spec = complete_boundaries(interior)?;
    let report = check_extended_variant(&spec).map_err(|e| QueueingError::DegenerateDenominator(e.to_string()))?;
    if !report.holds {
        return Err(QueueingError::ConditionsUnmet(UnmetConditions::from_reports(&[report])));
    }
    let (g, d) = (
        rho1(&spec).map_err(|e| QueueingError::DegenerateDenominator(e.to_string()))?,
        rho2(&spec).map_err(|e| QueueingError::DegenerateDenominator(e.to_string()))?,
    );
    if g >= S::one() || d >= S::one() {
        return Err(QueueingError::NotErgodic { rho1: g.to_f64(), rho2: d.to_f64() });
    }
    Ok(spec)
}

/// Interior kernel of the reference three-term example.
pub fn fig2_interior<S: Scalar>() -> TransitionKernel<S> {
    let r = |n| S::ratio(n, 10_000);
    kernel(vec![
        ((0, 1), r(405)),
        ((1, 0), r(270)),
        ((-1, 1), r(495)),
        ((1, -1), r(1530)),
        ((-1, 0), r(2805)),
        ((0, -1), r(1870)),
        ((0, 0), r(2625)),
    ])
}

/// The reference three-term walk with boundaries completed.
pub fn fig2_spec<S: Scalar>() -> Result<WalkSpec<S>, QueueingError> {
    complete_boundaries(&fig2_interior())
}

/// Sample interior with diagonal jumps that admits a single product form.
pub fn extended_example_interior<S: Scalar>() -> TransitionKernel<S> {
    let r = |n| S::ratio(n, 100);
    kernel(vec![
        ((1, 1), r(1)),
        ((-1, -1), r(1)),
        ((-1, 1), r(1)),
        ((1, -1), r(2)),
        ((0, -1), r(2)),
        ((-1, 0), r(7)),
        ((0, 0), r(86)),
    ])
}
