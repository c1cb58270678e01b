//! Finite compensation: start from a product form that satisfies the
//! interior and one boundary, then alternately repair the other boundary
//! until a companion coefficient vanishes.

mod engine;
mod measure;

use std::fmt;

use thiserror::Error;

use crate::conditions::UnmetConditions;
use crate::scalar::Scalar;
use crate::spectral::{PairGD, Side, SpectralError};

pub use engine::{
    attempt, compensate, horizontal_step, initial_solution, run, run_single_extended, step, vertical_step, Solution,
    CHECK_WINDOW, MAX_TERMS,
};
pub use measure::{BoundaryTerm, GeometricTerm, InvariantMeasure};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CompensationError {
    #[error("conditions unmet: {0}")]
    ConditionsUnmet(UnmetConditions),
    #[error("not ergodic: rho1={rho1}, rho2={rho2}")]
    NotErgodic { rho1: f64, rho2: f64 },
    #[error("initial pair ({gamma}, {delta}) lies outside (0,1)^2")]
    PairOutOfRange { gamma: f64, delta: f64 },
    #[error(
        "InconsistentBoundary: the two {side} boundary equations need different coefficients ({first} vs {second})"
    )]
    InconsistentBoundary { side: Side, first: String, second: String },
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("compensating root {root} lies outside the open unit interval")]
    RootOutOfRange { root: String },
    #[error("no termination after {terms} interior terms; companion coefficient {coefficient}")]
    NonTerminating { terms: usize, coefficient: String },
    #[error("origin equations unsatisfied: {0}")]
    OriginEquationsUnsatisfied(String),
    #[error("boundary equations unsatisfied: {0}")]
    BoundaryEquationsUnsatisfied(String),
    #[error("measure is not summable: {0}")]
    NonSummable(String),
    #[error("negative mass {value} at ({m},{n})")]
    NegativeMass { m: usize, n: usize, value: String },
    #[error("horizontal and vertical starts produced different measures")]
    SideMismatch,
    #[error("nothing left to compensate on the {0} side")]
    NothingPending(Side),
    #[error(transparent)]
    Spectral(SpectralError),
}

impl From<SpectralError> for CompensationError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NotErgodic { rho1, rho2 } => CompensationError::NotErgodic { rho1, rho2 },
            SpectralError::PairOutOfRange { gamma, delta } => CompensationError::PairOutOfRange { gamma, delta },
            SpectralError::ZeroDenominator(what) => CompensationError::ZeroDenominator(what.to_string()),
            other => CompensationError::Spectral(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Initial,
    Vertical,
    Horizontal,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Initial => "initial",
            StepKind::Vertical => "vertical",
            StepKind::Horizontal => "horizontal",
        })
    }
}

/// One application of a step. On termination `coeff` is the vanishing
/// companion coefficient and `pair` holds the root that was not used.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<S> {
    pub kind: StepKind,
    pub pair: PairGD<S>,
    pub coeff: S,
    /// e (horizontal axis) or z (vertical axis) produced alongside.
    pub axis_coeff: S,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationTrace<S> {
    pub start: Side,
    pub steps: Vec<TraceStep<S>>,
    pub terminated: bool,
    pub diagnosis: Option<String>,
}

impl<S: Scalar> CompensationTrace<S> {
    pub fn new(start: Side) -> Self {
        Self { start, steps: Vec::new(), terminated: false, diagnosis: None }
    }

    /// Pairs of the interior terms in the order they were added.
    pub fn pairs(&self) -> Vec<PairGD<S>> {
        self.steps.iter().filter(|s| !s.terminated).map(|s| s.pair.clone()).collect()
    }

    pub fn interior_count(&self) -> usize {
        self.steps.iter().filter(|s| !s.terminated).count()
    }

    /// Coefficient computed by the step that closed the procedure.
    pub fn final_companion(&self) -> Option<&S> {
        self.steps.iter().find(|s| s.terminated).map(|s| &s.coeff)
    }
}

impl<S: Scalar> fmt::Display for CompensationTrace<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start: {}", self.start)?;
        for (i, s) in self.steps.iter().enumerate() {
            let axis = match (s.kind, self.start) {
                (StepKind::Vertical, _) | (StepKind::Initial, Side::Vertical) => "z",
                _ => "e",
            };
            if s.terminated {
                writeln!(
                    f,
                    "  {}. {} step: terminated (companion coefficient {}), {axis} = {}",
                    i + 1,
                    s.kind,
                    s.coeff,
                    s.axis_coeff
                )?;
            } else {
                writeln!(
                    f,
                    "  {}. {} step: term {} at ({}, {}), {axis} = {}",
                    i + 1,
                    s.kind,
                    s.coeff,
                    s.pair.gamma,
                    s.pair.delta,
                    s.axis_coeff
                )?;
            }
        }
        if let Some(d) = &self.diagnosis {
            writeln!(f, "  failure: {d}")?;
        }
        Ok(())
    }
}

/// Terms accumulated so far plus the side that still needs repair.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSolution<S> {
    pub interior: Vec<GeometricTerm<S>>,
    pub h_axis: Vec<BoundaryTerm<S>>,
    pub v_axis: Vec<BoundaryTerm<S>>,
    pub pending: Option<Side>,
    pub trace: CompensationTrace<S>,
}

impl<S: Scalar> PartialSolution<S> {
    pub fn to_measure(&self) -> InvariantMeasure<S> {
        InvariantMeasure::unnormalized(self.interior.clone(), self.h_axis.clone(), self.v_axis.clone())
    }
}
