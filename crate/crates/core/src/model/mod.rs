//! Random-walk specifications and balance-equation residuals.

mod io;

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use io::{load_model, load_spec, parse_model, resolve_model, save_spec, spec_to_json, ModelSource};

pub const DEFAULT_EPS: f64 = 1e-12;

/// Displacements in the fixed enumeration order used by reports and files.
pub const DISPLACEMENTS: [(i32, i32); 9] =
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Interior,
    Horizontal,
    Vertical,
    Origin,
}

impl Region {
    pub fn of(m: usize, n: usize) -> Region {
        match (m > 0, n > 0) {
            (true, true) => Region::Interior,
            (true, false) => Region::Horizontal,
            (false, true) => Region::Vertical,
            (false, false) => Region::Origin,
        }
    }

    /// Whether displacement (k,l) is structurally allowed from this region.
    pub fn allows(self, k: i32, l: i32) -> bool {
        match self {
            Region::Interior => true,
            Region::Horizontal => l != -1,
            Region::Vertical => k != -1,
            Region::Origin => k != -1 && l != -1,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Interior => "interior",
            Region::Horizontal => "horizontal",
            Region::Vertical => "vertical",
            Region::Origin => "origin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArithmeticMode {
    ExactRational,
    Float { eps: f64 },
}

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("{region} kernel sums to {sum}, not 1")]
    NonStochastic { region: Region, sum: String },
    #[error("{region} kernel has positive mass on forbidden displacement ({k},{l})")]
    ForbiddenTransition { region: Region, k: i32, l: i32 },
    #[error("{region} kernel has negative entry at ({k},{l})")]
    NegativeEntry { region: Region, k: i32, l: i32 },
    #[error("window {0} is too small (need at least 3)")]
    WindowTooSmall(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 3×3 displacement probabilities, indexed by `k+1`, `l+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<S> {
    p: [[S; 3]; 3],
}

impl<S: Scalar> TransitionKernel<S> {
    pub fn zero() -> Self {
        Self { p: std::array::from_fn(|_| std::array::from_fn(|_| S::zero())) }
    }

    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = ((i32, i32), S)>,
    {
        let mut kernel = Self::zero();
        for ((k, l), v) in entries {
            kernel.set(k, l, v);
        }
        kernel
    }

    pub fn get(&self, k: i32, l: i32) -> &S {
        &self.p[(k + 1) as usize][(l + 1) as usize]
    }

    pub fn set(&mut self, k: i32, l: i32, value: S) {
        self.p[(k + 1) as usize][(l + 1) as usize] = value;
    }

    pub fn sum(&self) -> S {
        DISPLACEMENTS.iter().fold(S::zero(), |acc, &(k, l)| acc + self.get(k, l).clone())
    }

    pub fn entries(&self) -> impl Iterator<Item = (i32, i32, &S)> + '_ {
        DISPLACEMENTS.iter().map(move |&(k, l)| (k, l, self.get(k, l)))
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TransitionKernel<T> {
        TransitionKernel { p: std::array::from_fn(|i| std::array::from_fn(|j| f(&self.p[i][j]))) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec<S> {
    pub interior: TransitionKernel<S>,
    pub horizontal: TransitionKernel<S>,
    pub vertical: TransitionKernel<S>,
    pub origin: TransitionKernel<S>,
    eps: f64,
}

/// Validates the four kernels and assembles a spec.
pub fn build_spec<S: Scalar>(
    interior: TransitionKernel<S>,
    horizontal: TransitionKernel<S>,
    vertical: TransitionKernel<S>,
    origin: TransitionKernel<S>,
    eps: f64,
) -> Result<WalkSpec<S>, ModelError> {
    let spec = WalkSpec { interior, horizontal, vertical, origin, eps };
    for region in [Region::Interior, Region::Horizontal, Region::Vertical, Region::Origin] {
        let kernel = spec.kernel(region);
        for (k, l, v) in kernel.entries() {
            if v.is_negative() {
                return Err(ModelError::NegativeEntry { region, k, l });
            }
        }
        for (k, l, v) in kernel.entries() {
            if !region.allows(k, l) && !v.is_zero() {
                return Err(ModelError::ForbiddenTransition { region, k, l });
            }
        }
        let sum = kernel.sum();
        if !sum.approx_eq(&S::one(), eps) {
            return Err(ModelError::NonStochastic { region, sum: sum.to_string() });
        }
    }
    Ok(spec)
}

impl<S: Scalar> WalkSpec<S> {
    pub fn kernel(&self, region: Region) -> &TransitionKernel<S> {
        match region {
            Region::Interior => &self.interior,
            Region::Horizontal => &self.horizontal,
            Region::Vertical => &self.vertical,
            Region::Origin => &self.origin,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mode(&self) -> ArithmeticMode {
        if S::EXACT {
            ArithmeticMode::ExactRational
        } else {
            ArithmeticMode::Float { eps: self.eps }
        }
    }

    pub fn q(&self, k: i32, l: i32) -> S {
        self.interior.get(k, l).clone()
    }

    pub fn qh(&self, k: i32, l: i32) -> S {
        self.horizontal.get(k, l).clone()
    }

    pub fn qv(&self, k: i32, l: i32) -> S {
        self.vertical.get(k, l).clone()
    }

    pub fn q0(&self, k: i32, l: i32) -> S {
        self.origin.get(k, l).clone()
    }

    /// Probability of moving from `(m,n)` by `(k,l)`.
    pub fn step_prob(&self, m: usize, n: usize, k: i32, l: i32) -> &S {
        self.kernel(Region::of(m, n)).get(k, l)
    }

    pub fn has_diagonals(&self) -> bool {
        !self.q(1, 1).is_zero() || !self.q(-1, -1).is_zero()
    }

    /// Drift-positivity proxy for irreducibility of the component chains.
    pub fn warnings(&self) -> Vec<String> {
        let checks = [
            ("q(1,0)+q(1,-1)", self.q(1, 0) + self.q(1, -1)),
            ("q(-1,0)+q(-1,1)", self.q(-1, 0) + self.q(-1, 1)),
            ("q(0,1)+q(-1,1)", self.q(0, 1) + self.q(-1, 1)),
            ("q(0,-1)+q(1,-1)", self.q(0, -1) + self.q(1, -1)),
        ];
        checks
            .into_iter()
            .filter(|(_, v)| v.is_zero())
            .map(|(name, _)| format!("{name} is zero; component chains may be reducible"))
            .collect()
    }

    pub fn to_f64(&self, eps: f64) -> WalkSpec<f64> {
        WalkSpec {
            interior: self.interior.map(|x| x.to_f64()),
            horizontal: self.horizontal.map(|x| x.to_f64()),
            vertical: self.vertical.map(|x| x.to_f64()),
            origin: self.origin.map(|x| x.to_f64()),
            eps,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationClass {
    Int,
    V1,
    V2,
    H1,
    H2,
    Eq00,
    Eq01,
    Eq10,
    Eq11,
}

impl EquationClass {
    pub const ALL: [EquationClass; 9] = [
        EquationClass::Int,
        EquationClass::V1,
        EquationClass::V2,
        EquationClass::H1,
        EquationClass::H2,
        EquationClass::Eq00,
        EquationClass::Eq01,
        EquationClass::Eq10,
        EquationClass::Eq11,
    ];

    pub fn of(m: usize, n: usize) -> EquationClass {
        match (m, n) {
            (0, 0) => EquationClass::Eq00,
            (0, 1) => EquationClass::Eq01,
            (1, 0) => EquationClass::Eq10,
            (1, 1) => EquationClass::Eq11,
            (0, _) => EquationClass::V2,
            (1, _) => EquationClass::V1,
            (_, 0) => EquationClass::H2,
            (_, 1) => EquationClass::H1,
            _ => EquationClass::Int,
        }
    }

    pub fn is_origin(self) -> bool {
        matches!(self, EquationClass::Eq00 | EquationClass::Eq01 | EquationClass::Eq10 | EquationClass::Eq11)
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap_or(0)
    }
}

impl fmt::Display for EquationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EquationClass::Int => "int",
            EquationClass::V1 => "v1",
            EquationClass::V2 => "v2",
            EquationClass::H1 => "h1",
            EquationClass::H2 => "h2",
            EquationClass::Eq00 => "eq00",
            EquationClass::Eq01 => "eq01",
            EquationClass::Eq10 => "eq10",
            EquationClass::Eq11 => "eq11",
        })
    }
}

/// Maximum absolute residual per equation class.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals<S> {
    values: [S; 9],
    pub window: usize,
}

impl<S: Scalar> Residuals<S> {
    pub fn get(&self, class: EquationClass) -> &S {
        &self.values[class.index()]
    }

    pub fn max(&self) -> S {
        self.values.iter().cloned().fold(S::zero(), S::max_of)
    }

    pub fn all_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn within(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.to_f64() <= tol)
    }

    pub fn failing(&self, tol: f64) -> Vec<EquationClass> {
        EquationClass::ALL
            .into_iter()
            .filter(|c| {
                let v = self.get(*c);
                if S::EXACT {
                    !v.is_zero()
                } else {
                    v.to_f64() > tol
                }
            })
            .collect()
    }
}

impl<S: Scalar> fmt::Display for Residuals<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, class) in EquationClass::ALL.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{class}={:.3e}", self.get(*class).to_f64())?;
        }
        Ok(())
    }
}

/// Substitutes `measure` into every balance equation with `m,n <= window`.
pub fn balance_residuals<S: Scalar>(
    spec: &WalkSpec<S>,
    measure: &dyn Fn(usize, usize) -> S,
    window: usize,
) -> Result<Residuals<S>, ModelError> {
    if window < 3 {
        return Err(ModelError::WindowTooSmall(window));
    }
    let mut values: [S; 9] = std::array::from_fn(|_| S::zero());
    for m in 0..=window {
        for n in 0..=window {
            let mut inflow = S::zero();
            for &(k, l) in &DISPLACEMENTS {
                let (sm, sn) = (m as i64 - k as i64, n as i64 - l as i64);
                if sm < 0 || sn < 0 {
                    continue;
                }
                let (sm, sn) = (sm as usize, sn as usize);
                let p = spec.step_prob(sm, sn, k, l);
                if !p.is_zero() {
                    inflow = inflow + measure(sm, sn) * p.clone();
                }
            }
            let r = (inflow - measure(m, n)).abs();
            let slot = &mut values[EquationClass::of(m, n).index()];
            if r > *slot {
                *slot = r;
            }
        }
    }
    Ok(Residuals { values, window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::Zero;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn lazy_kernel(region: Region) -> TransitionKernel<BigRational> {
        let allowed: Vec<_> = DISPLACEMENTS.iter().filter(|(k, l)| region.allows(*k, *l)).collect();
        let share = r(1, allowed.len() as i64);
        TransitionKernel::from_entries(allowed.into_iter().map(|&kl| (kl, share.clone())))
    }

    fn uniform_spec() -> WalkSpec<BigRational> {
        build_spec(
            lazy_kernel(Region::Interior),
            lazy_kernel(Region::Horizontal),
            lazy_kernel(Region::Vertical),
            lazy_kernel(Region::Origin),
            DEFAULT_EPS,
        )
        .unwrap()
    }

    #[test]
    fn identity_interior_is_accepted() {
        let mut interior = TransitionKernel::zero();
        interior.set(0, 0, r(1, 1));
        let spec = build_spec(
            interior,
            lazy_kernel(Region::Horizontal),
            lazy_kernel(Region::Vertical),
            lazy_kernel(Region::Origin),
            DEFAULT_EPS,
        )
        .unwrap();
        assert_eq!(spec.warnings().len(), 4);
    }

    #[test]
    fn forbidden_and_nonstochastic_are_rejected() {
        let mut h = lazy_kernel(Region::Horizontal);
        h.set(0, -1, r(1, 10));
        let err = build_spec(
            lazy_kernel(Region::Interior),
            h,
            lazy_kernel(Region::Vertical),
            lazy_kernel(Region::Origin),
            DEFAULT_EPS,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ForbiddenTransition { region: Region::Horizontal, k: 0, l: -1 }));

        let mut i = lazy_kernel(Region::Interior);
        i.set(0, 0, r(1, 2));
        let err = build_spec(
            i,
            lazy_kernel(Region::Horizontal),
            lazy_kernel(Region::Vertical),
            lazy_kernel(Region::Origin),
            DEFAULT_EPS,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NonStochastic { region: Region::Interior, .. }));

        let mut o = lazy_kernel(Region::Origin);
        o.set(1, 1, r(-1, 4));
        o.set(0, 0, r(3, 4));
        let err = build_spec(
            lazy_kernel(Region::Interior),
            lazy_kernel(Region::Horizontal),
            lazy_kernel(Region::Vertical),
            o,
            DEFAULT_EPS,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NegativeEntry { region: Region::Origin, .. }));
    }

    #[test]
    fn residual_window_guard() {
        let spec = uniform_spec();
        let err = balance_residuals(&spec, &|_, _| r(1, 1), 2).unwrap_err();
        assert!(matches!(err, ModelError::WindowTooSmall(2)));
    }

    #[test]
    fn equation_classes_cover_the_window() {
        assert_eq!(EquationClass::of(5, 7), EquationClass::Int);
        assert_eq!(EquationClass::of(1, 4), EquationClass::V1);
        assert_eq!(EquationClass::of(0, 4), EquationClass::V2);
        assert_eq!(EquationClass::of(4, 1), EquationClass::H1);
        assert_eq!(EquationClass::of(4, 0), EquationClass::H2);
        assert_eq!(EquationClass::of(1, 1), EquationClass::Eq11);
    }

    #[test]
    fn constant_measure_solves_doubly_stochastic_interior() {
        // The uniform interior kernel has zero drift, so π ≡ 1 balances the bulk.
        let spec = uniform_spec();
        let res = balance_residuals(&spec, &|_, _| r(1, 1), 5).unwrap();
        assert!(res.get(EquationClass::Int).is_zero());
        assert!(!res.get(EquationClass::Eq00).is_zero());
    }
}
