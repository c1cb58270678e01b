use std::fmt;

use crate::scalar::{sig17, Scalar};

use super::CompensationError;

/// Contributes `coeff·γ^m·δ^n` for m, n > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricTerm<S> {
    pub coeff: S,
    pub gamma: S,
    pub delta: S,
}

/// Contributes `coeff·ratio^k` along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTerm<S> {
    pub coeff: S,
    pub ratio: S,
}

/// A finite sum of product forms on the interior and the two axes. The
/// horizontal axis covers (m, 0) for m ≥ 0; the vertical axis covers (0, n).
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure<S> {
    pub interior_terms: Vec<GeometricTerm<S>>,
    pub h_axis_terms: Vec<BoundaryTerm<S>>,
    pub v_axis_terms: Vec<BoundaryTerm<S>>,
    /// Factor that was applied to every coefficient during normalization.
    pub c0: S,
}

impl<S: Scalar> InvariantMeasure<S> {
    pub fn unnormalized(
        interior_terms: Vec<GeometricTerm<S>>,
        h_axis_terms: Vec<BoundaryTerm<S>>,
        v_axis_terms: Vec<BoundaryTerm<S>>,
    ) -> Self {
        Self { interior_terms, h_axis_terms, v_axis_terms, c0: S::one() }
    }

    pub fn evaluate(&self, m: usize, n: usize) -> S {
        let (m32, n32) = (m as u32, n as u32);
        if m > 0 && n > 0 {
            self.interior_terms
                .iter()
                .fold(S::zero(), |acc, t| acc + t.coeff.clone() * t.gamma.powu(m32) * t.delta.powu(n32))
        } else if n == 0 {
            axis_sum(&self.h_axis_terms, m32)
        } else {
            axis_sum(&self.v_axis_terms, n32)
        }
    }

    /// Origin value read from the vertical axis.
    pub fn origin_via_v_axis(&self) -> S {
        axis_sum(&self.v_axis_terms, 0)
    }

    pub fn ratios(&self) -> impl Iterator<Item = &S> + '_ {
        self.interior_terms
            .iter()
            .flat_map(|t| [&t.gamma, &t.delta])
            .chain(self.h_axis_terms.iter().map(|t| &t.ratio))
            .chain(self.v_axis_terms.iter().map(|t| &t.ratio))
    }

    /// Closed-form sum over the quarter plane.
    pub fn total_mass(&self) -> Result<S, CompensationError> {
        if let Some(r) = self.ratios().find(|r| r.abs() >= S::one()) {
            return Err(CompensationError::NonSummable(r.to_string()));
        }
        let one = S::one;
        let interior = self.interior_terms.iter().fold(S::zero(), |acc, t| {
            acc + t.coeff.clone() * t.gamma.clone() * t.delta.clone()
                / ((one() - t.gamma.clone()) * (one() - t.delta.clone()))
        });
        let h = self.h_axis_terms.iter().fold(S::zero(), |acc, t| acc + t.coeff.clone() / (one() - t.ratio.clone()));
        let v = self
            .v_axis_terms
            .iter()
            .fold(S::zero(), |acc, t| acc + t.coeff.clone() * t.ratio.clone() / (one() - t.ratio.clone()));
        Ok(interior + h + v)
    }

    /// Scales all coefficients so that the total mass is one.
    pub fn normalize(&self) -> Result<(S, InvariantMeasure<S>), CompensationError> {
        let total = self.total_mass()?;
        if total.is_zero() {
            return Err(CompensationError::NonSummable("zero total mass".into()));
        }
        let f = S::one() / total;
        let scale = |c: &S| c.clone() * f.clone();
        let measure = InvariantMeasure {
            interior_terms: self
                .interior_terms
                .iter()
                .map(|t| GeometricTerm { coeff: scale(&t.coeff), gamma: t.gamma.clone(), delta: t.delta.clone() })
                .collect(),
            h_axis_terms: self
                .h_axis_terms
                .iter()
                .map(|t| BoundaryTerm { coeff: scale(&t.coeff), ratio: t.ratio.clone() })
                .collect(),
            v_axis_terms: self
                .v_axis_terms
                .iter()
                .map(|t| BoundaryTerm { coeff: scale(&t.coeff), ratio: t.ratio.clone() })
                .collect(),
            c0: self.c0.clone() * f,
        };
        Ok((measure.c0.clone(), measure))
    }

    /// Terms merged by ratio, zero coefficients dropped, sorted ascending.
    pub fn canonical(&self) -> InvariantMeasure<S> {
        let mut interior: Vec<GeometricTerm<S>> = Vec::new();
        for t in &self.interior_terms {
            match interior.iter_mut().find(|u| u.gamma == t.gamma && u.delta == t.delta) {
                Some(u) => u.coeff = u.coeff.clone() + t.coeff.clone(),
                None => interior.push(t.clone()),
            }
        }
        interior.retain(|t| !t.coeff.is_zero());
        interior.sort_by(|a, b| {
            a.gamma
                .partial_cmp(&b.gamma)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.delta.partial_cmp(&b.delta).unwrap_or(std::cmp::Ordering::Equal))
        });
        InvariantMeasure {
            interior_terms: interior,
            h_axis_terms: canonical_axis(&self.h_axis_terms),
            v_axis_terms: canonical_axis(&self.v_axis_terms),
            c0: self.c0.clone(),
        }
    }

    /// Σ_n π(m, n) in closed form.
    pub fn row_sum(&self, m: usize) -> S {
        let one = S::one;
        let k = m as u32;
        if m == 0 {
            axis_sum(&self.h_axis_terms, 0)
                + self
                    .v_axis_terms
                    .iter()
                    .fold(S::zero(), |acc, t| acc + t.coeff.clone() * t.ratio.clone() / (one() - t.ratio.clone()))
        } else {
            self.interior_terms.iter().fold(S::zero(), |acc, t| {
                acc + t.coeff.clone() * t.gamma.powu(k) * t.delta.clone() / (one() - t.delta.clone())
            }) + axis_sum(&self.h_axis_terms, k)
        }
    }

    /// Σ_m π(m, n) in closed form.
    pub fn col_sum(&self, n: usize) -> S {
        let one = S::one;
        let k = n as u32;
        if n == 0 {
            self.h_axis_terms.iter().fold(S::zero(), |acc, t| acc + t.coeff.clone() / (one() - t.ratio.clone()))
        } else {
            self.interior_terms.iter().fold(S::zero(), |acc, t| {
                acc + t.coeff.clone() * t.delta.powu(k) * t.gamma.clone() / (one() - t.gamma.clone())
            }) + axis_sum(&self.v_axis_terms, k)
        }
    }

    /// `m,n,pi` rows for 0 ≤ m, n ≤ window.
    pub fn to_csv(&self, window: usize) -> String {
        let mut out = String::from("m,n,pi\n");
        for m in 0..=window {
            for n in 0..=window {
                out.push_str(&format!("{m},{n},{}\n", sig17(self.evaluate(m, n).to_f64())));
            }
        }
        out
    }

    /// Human-readable list of the coefficient–ratio triples.
    pub fn terms_text(&self) -> String {
        self.to_string()
    }
}

impl<S: Scalar> fmt::Display for InvariantMeasure<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c0 = {}", self.c0)?;
        writeln!(f, "interior (m,n >= 1): coeff * gamma^m * delta^n")?;
        for t in &self.interior_terms {
            writeln!(f, "  {} * ({})^m * ({})^n", t.coeff, t.gamma, t.delta)?;
        }
        writeln!(f, "horizontal axis (n = 0): coeff * gamma^m")?;
        for t in &self.h_axis_terms {
            writeln!(f, "  {} * ({})^m", t.coeff, t.ratio)?;
        }
        writeln!(f, "vertical axis (m = 0): coeff * delta^n")?;
        for t in &self.v_axis_terms {
            writeln!(f, "  {} * ({})^n", t.coeff, t.ratio)?;
        }
        Ok(())
    }
}

fn axis_sum<S: Scalar>(terms: &[BoundaryTerm<S>], k: u32) -> S {
    terms.iter().fold(S::zero(), |acc, t| acc + t.coeff.clone() * t.ratio.powu(k))
}

fn canonical_axis<S: Scalar>(terms: &[BoundaryTerm<S>]) -> Vec<BoundaryTerm<S>> {
    let mut out: Vec<BoundaryTerm<S>> = Vec::new();
    for t in terms {
        match out.iter_mut().find(|u| u.ratio == t.ratio) {
            Some(u) => u.coeff = u.coeff.clone() + t.coeff.clone(),
            None => out.push(t.clone()),
        }
    }
    out.retain(|t| !t.coeff.is_zero());
    out.sort_by(|a, b| a.ratio.partial_cmp(&b.ratio).unwrap_or(std::cmp::Ordering::Equal));
    out
}
