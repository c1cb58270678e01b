//! Kernel and boundary polynomials, their roots, and the product-form pairs
//! the compensation engine starts from.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::model::{TransitionKernel, WalkSpec};
use crate::scalar::{sig17, Scalar};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpectralError {
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("quadratic has vanishing leading and linear coefficients")]
    DegenerateQuadratic,
    #[error("not ergodic: rho1={rho1}, rho2={rho2}")]
    NotErgodic { rho1: f64, rho2: f64 },
    #[error("initial pair ({gamma}, {delta}) is not inside (0,1)^2")]
    PairOutOfRange { gamma: f64, delta: f64 },
    #[error("grid resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Horizontal,
    Vertical,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Horizontal => Side::Vertical,
            Side::Vertical => Side::Horizontal,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Horizontal => "horizontal",
            Side::Vertical => "vertical",
        })
    }
}

/// A (γ, δ) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGD<S> {
    pub gamma: S,
    pub delta: S,
}

pub type KernelValue<S> = S;

/// Bivariate polynomial of degree ≤ 2 in each variable; `c[i][j]` multiplies γ^i δ^j.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2<S> {
    c: [[S; 3]; 3],
}

impl<S: Scalar> Poly2<S> {
    fn zero() -> Self {
        Self { c: std::array::from_fn(|_| std::array::from_fn(|_| S::zero())) }
    }

    fn add(&mut self, i: i32, j: i32, v: S) {
        let slot = &mut self.c[i as usize][j as usize];
        *slot = slot.clone() + v;
    }

    pub fn coeff(&self, i: usize, j: usize) -> &S {
        &self.c[i][j]
    }

    pub fn eval(&self, gamma: &S, delta: &S) -> S {
        let g = [S::one(), gamma.clone(), gamma.clone() * gamma.clone()];
        let d = [S::one(), delta.clone(), delta.clone() * delta.clone()];
        let mut out = S::zero();
        for (row, gi) in self.c.iter().zip(&g) {
            for (c, dj) in row.iter().zip(&d) {
                if !c.is_zero() {
                    out = out + c.clone() * gi.clone() * dj.clone();
                }
            }
        }
        out
    }

    /// Coefficients of δ^0, δ^1, δ^2 at fixed γ.
    pub fn in_delta(&self, gamma: &S) -> [S; 3] {
        let g = [S::one(), gamma.clone(), gamma.clone() * gamma.clone()];
        std::array::from_fn(|j| (0..3).fold(S::zero(), |acc, i| acc + self.c[i][j].clone() * g[i].clone()))
    }

    /// Coefficients of γ^0, γ^1, γ^2 at fixed δ.
    pub fn in_gamma(&self, delta: &S) -> [S; 3] {
        let d = [S::one(), delta.clone(), delta.clone() * delta.clone()];
        std::array::from_fn(|i| (0..3).fold(S::zero(), |acc, j| acc + self.c[i][j].clone() * d[j].clone()))
    }

    fn plus(&self, other: &Self) -> Self {
        Self { c: std::array::from_fn(|i| std::array::from_fn(|j| self.c[i][j].clone() + other.c[i][j].clone())) }
    }
}

/// γδ = Σ q(k,l) γ^{1-k} δ^{1-l}, written as K = 0.
pub fn kernel_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    let mut p = Poly2::zero();
    p.add(1, 1, S::one());
    for (k, l, q) in spec.interior.entries() {
        p.add(1 - k, 1 - l, -q.clone());
    }
    p
}

pub fn h1_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    let mut p = Poly2::zero();
    p.add(1, 1, S::one());
    for (k, l, q) in spec.interior.entries().filter(|(_, l, _)| *l <= 0) {
        p.add(1 - k, 1 - l, -q.clone());
    }
    for (k, l, q) in spec.horizontal.entries().filter(|(_, l, _)| *l == 1) {
        p.add(1 - k, 1 - l, -q.clone());
    }
    p
}

pub fn h0_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    let mut p = Poly2::zero();
    p.add(1, 0, S::one());
    for (k, _, q) in spec.horizontal.entries().filter(|(_, l, _)| *l == 0) {
        p.add(1 - k, 0, -q.clone());
    }
    for (k, _, q) in spec.interior.entries().filter(|(_, l, _)| *l == -1) {
        p.add(1 - k, 1, -q.clone());
    }
    p
}

pub fn v1_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    let mut p = Poly2::zero();
    p.add(1, 1, S::one());
    for (k, l, q) in spec.interior.entries().filter(|(k, _, _)| *k <= 0) {
        p.add(1 - k, 1 - l, -q.clone());
    }
    for (k, l, q) in spec.vertical.entries().filter(|(k, _, _)| *k == 1) {
        p.add(1 - k, 1 - l, -q.clone());
    }
    p
}

pub fn v0_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    let mut p = Poly2::zero();
    p.add(0, 1, S::one());
    for (_, l, q) in spec.vertical.entries().filter(|(k, _, _)| *k == 0) {
        p.add(0, 1 - l, -q.clone());
    }
    for (_, l, q) in spec.interior.entries().filter(|(k, _, _)| *k == -1) {
        p.add(1, 1 - l, -q.clone());
    }
    p
}

pub fn h_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    h1_poly(spec).plus(&h0_poly(spec))
}

pub fn v_poly<S: Scalar>(spec: &WalkSpec<S>) -> Poly2<S> {
    v1_poly(spec).plus(&v0_poly(spec))
}

pub fn eval_k<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    kernel_poly(spec).eval(gamma, delta)
}

pub fn eval_h0<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    h0_poly(spec).eval(gamma, delta)
}

pub fn eval_h1<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    h1_poly(spec).eval(gamma, delta)
}

pub fn eval_v0<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    v0_poly(spec).eval(gamma, delta)
}

pub fn eval_v1<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    v1_poly(spec).eval(gamma, delta)
}

pub fn eval_h<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    h_poly(spec).eval(gamma, delta)
}

pub fn eval_v<S: Scalar>(spec: &WalkSpec<S>, gamma: &S, delta: &S) -> KernelValue<S> {
    v_poly(spec).eval(gamma, delta)
}

fn checked_div<S: Scalar>(num: S, den: S, what: &'static str) -> Result<S, SpectralError> {
    if den.is_zero() {
        Err(SpectralError::ZeroDenominator(what))
    } else {
        Ok(num / den)
    }
}

/// Horizontal drift ratio; diagonal entries join when present.
pub fn rho1<S: Scalar>(spec: &WalkSpec<S>) -> Result<S, SpectralError> {
    kernel_rho1(&spec.interior)
}

pub fn rho2<S: Scalar>(spec: &WalkSpec<S>) -> Result<S, SpectralError> {
    kernel_rho2(&spec.interior)
}

/// [`rho1`] computed from an interior kernel alone.
pub fn kernel_rho1<S: Scalar>(q: &TransitionKernel<S>) -> Result<S, SpectralError> {
    let g = |k, l| q.get(k, l).clone();
    checked_div(g(1, 0) + g(1, -1) + g(1, 1), g(-1, 0) + g(-1, 1) + g(-1, -1), "rho1")
}

pub fn kernel_rho2<S: Scalar>(q: &TransitionKernel<S>) -> Result<S, SpectralError> {
    let g = |k, l| q.get(k, l).clone();
    checked_div(g(0, 1) + g(-1, 1) + g(1, 1), g(0, -1) + g(1, -1) + g(-1, -1), "rho2")
}

/// f(γ) with δ = γ f(γ) the non-unit δ-root of K(γ, ·) at γ = ρ₁.
pub fn map_f<S: Scalar>(spec: &WalkSpec<S>, gamma: &S) -> Result<S, SpectralError> {
    let den = spec.q(1, -1) + spec.q(0, -1) * gamma.clone() + spec.q(-1, -1) * gamma.clone() * gamma.clone();
    let q11 = spec.q(1, 1);
    if q11.is_zero() {
        checked_div(spec.q(0, 1) + spec.q(-1, 1) * gamma.clone(), den, "f")
    } else {
        let num = q11 + spec.q(0, 1) * gamma.clone() + spec.q(-1, 1) * gamma.clone() * gamma.clone();
        checked_div(num, gamma.clone() * den, "f")
    }
}

/// φ(δ) with γ = δ φ(δ), the mirror of [`map_f`].
pub fn map_phi<S: Scalar>(spec: &WalkSpec<S>, delta: &S) -> Result<S, SpectralError> {
    let den = spec.q(-1, 1) + spec.q(-1, 0) * delta.clone() + spec.q(-1, -1) * delta.clone() * delta.clone();
    let q11 = spec.q(1, 1);
    if q11.is_zero() {
        checked_div(spec.q(1, 0) + spec.q(1, -1) * delta.clone(), den, "phi")
    } else {
        let num = q11 + spec.q(1, 0) * delta.clone() + spec.q(1, -1) * delta.clone() * delta.clone();
        checked_div(num, delta.clone() * den, "phi")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Root<S> {
    Real(S),
    /// Irrational (exact mode) or complex root, in floating point.
    Approx {
        re: f64,
        im: f64,
    },
}

impl<S: Scalar> Root<S> {
    pub fn re(&self) -> f64 {
        match self {
            Root::Real(x) => x.to_f64(),
            Root::Approx { re, .. } => *re,
        }
    }

    pub fn im(&self) -> f64 {
        match self {
            Root::Real(_) => 0.0,
            Root::Approx { im, .. } => *im,
        }
    }

    pub fn as_real(&self) -> Option<&S> {
        match self {
            Root::Real(x) => Some(x),
            Root::Approx { .. } => None,
        }
    }

    pub fn is_unit(&self, eps: f64) -> bool {
        match self {
            Root::Real(x) => x.approx_eq(&S::one(), eps),
            Root::Approx { re, im } => (re - 1.0).abs() <= eps && im.abs() <= eps,
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Root::Real(a), Root::Real(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            _ => self.re().total_cmp(&other.re()).then(self.im().total_cmp(&other.im())),
        }
    }
}

impl<S: Scalar> fmt::Display for Root<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Root::Real(x) => write!(f, "{x}"),
            Root::Approx { re, im } if *im == 0.0 => write!(f, "~{re}"),
            Root::Approx { re, im } => write!(f, "~{re}{im:+}i"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRoots<S> {
    /// Ascending by real part, then imaginary part.
    pub roots: Vec<Root<S>>,
    /// An exact solve fell back to floating point (irrational roots).
    pub downgraded: bool,
    /// Leading coefficient vanished; `roots` holds the single linear root.
    pub degenerate: bool,
}

/// Roots of c0 + c1 x + c2 x².
pub fn solve_quadratic<S: Scalar>(c: &[S; 3], eps: f64) -> Result<QuadRoots<S>, SpectralError> {
    let [c0, c1, c2] = c.clone();
    let scale = c0.abs().max_of(c1.abs()).max_of(c2.abs());
    if c2.near_zero(&scale, eps) {
        if c1.near_zero(&scale, eps) {
            return Err(SpectralError::DegenerateQuadratic);
        }
        return Ok(QuadRoots { roots: vec![Root::Real(-c0 / c1)], downgraded: false, degenerate: true });
    }
    let two = S::from_i64(2);
    let disc = c1.clone() * c1.clone() - S::from_i64(4) * c2.clone() * c0.clone();
    let mut roots = match disc.exact_sqrt() {
        Some(s) => {
            if S::EXACT {
                vec![
                    Root::Real((-c1.clone() - s.clone()) / (two.clone() * c2.clone())),
                    Root::Real((-c1 + s) / (two * c2)),
                ]
            } else {
                // Cancellation-free form.
                let sign = if c1.is_negative() { -S::one() } else { S::one() };
                let q = -(c1 + sign * s) / two;
                if q.is_zero() {
                    vec![Root::Real(S::zero()), Root::Real(S::zero())]
                } else {
                    vec![Root::Real(q.clone() / c2), Root::Real(c0 / q)]
                }
            }
        }
        None => {
            let (a, b, d) = (c2.to_f64(), c1.to_f64(), disc.to_f64());
            let roots = if d >= 0.0 {
                let s = d.sqrt();
                vec![
                    Root::Approx { re: (-b - s) / (2.0 * a), im: 0.0 },
                    Root::Approx { re: (-b + s) / (2.0 * a), im: 0.0 },
                ]
            } else {
                let im = (-d).sqrt() / (2.0 * a).abs();
                let re = -b / (2.0 * a);
                vec![Root::Approx { re, im: -im }, Root::Approx { re, im }]
            };
            return Ok(QuadRoots { roots: sorted(roots), downgraded: S::EXACT, degenerate: false });
        }
    };
    roots = sorted(roots);
    Ok(QuadRoots { roots, downgraded: false, degenerate: false })
}

fn sorted<S: Scalar>(mut roots: Vec<Root<S>>) -> Vec<Root<S>> {
    roots.sort_by(|a, b| a.cmp_key(b));
    roots
}

/// The root of c0 + c1 x + c2 x² other than `known`, by Vieta's sum.
pub fn other_root<S: Scalar>(c: &[S; 3], known: &S) -> Option<S> {
    if c[2].is_zero() {
        return None;
    }
    Some(-c[1].clone() / c[2].clone() - known.clone())
}

pub fn solve_k_for_gamma<S: Scalar>(spec: &WalkSpec<S>, delta: &S) -> Result<QuadRoots<S>, SpectralError> {
    solve_quadratic(&kernel_poly(spec).in_gamma(delta), spec.eps())
}

pub fn solve_k_for_delta<S: Scalar>(spec: &WalkSpec<S>, gamma: &S) -> Result<QuadRoots<S>, SpectralError> {
    solve_quadratic(&kernel_poly(spec).in_delta(gamma), spec.eps())
}

/// The starting product-form pair for the given side.
pub fn initial_pair<S: Scalar>(spec: &WalkSpec<S>, side: Side) -> Result<PairGD<S>, SpectralError> {
    let r1 = rho1(spec)?;
    let r2 = rho2(spec)?;
    if r1 >= S::one() || r2 >= S::one() {
        return Err(SpectralError::NotErgodic { rho1: r1.to_f64(), rho2: r2.to_f64() });
    }
    let pair = match side {
        Side::Horizontal => {
            let delta = r1.clone() * map_f(spec, &r1)?;
            PairGD { gamma: r1, delta }
        }
        Side::Vertical => {
            let gamma = r2.clone() * map_phi(spec, &r2)?;
            PairGD { gamma, delta: r2 }
        }
    };
    let inside = |x: &S| x.is_positive() && *x < S::one();
    if !inside(&pair.gamma) || !inside(&pair.delta) {
        return Err(SpectralError::PairOutOfRange { gamma: pair.gamma.to_f64(), delta: pair.delta.to_f64() });
    }
    Ok(pair)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curve {
    K,
    H,
    V,
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Curve::K => "K",
            Curve::H => "H",
            Curve::V => "V",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub curve: Curve,
    pub gamma: f64,
    pub delta: f64,
}

/// Real points of K=0, H=0, V=0 along a grid over (0, 1.05] in each variable.
pub fn sample_curves<S: Scalar>(spec: &WalkSpec<S>, resolution: usize) -> Result<Vec<CurvePoint>, SpectralError> {
    if resolution < 2 {
        return Err(SpectralError::InvalidResolution(resolution));
    }
    let spec = spec.to_f64(spec.eps());
    let mut grid: Vec<f64> = (1..=resolution).map(|i| 1.05 * i as f64 / resolution as f64).collect();
    if !grid.iter().any(|x| (x - 1.0).abs() < 1e-15) {
        grid.push(1.0);
        grid.sort_by(f64::total_cmp);
    }
    let curves = [(Curve::K, kernel_poly(&spec)), (Curve::H, h_poly(&spec)), (Curve::V, v_poly(&spec))];
    let mut points = Vec::new();
    for (curve, poly) in &curves {
        for &x in &grid {
            for root in real_roots(&poly.in_delta(&x)) {
                points.push(CurvePoint { curve: *curve, gamma: x, delta: root });
            }
        }
        for &x in &grid {
            for root in real_roots(&poly.in_gamma(&x)) {
                points.push(CurvePoint { curve: *curve, gamma: root, delta: x });
            }
        }
    }
    Ok(points)
}

fn real_roots(c: &[f64; 3]) -> Vec<f64> {
    match solve_quadratic(c, 1e-14) {
        Ok(r) => r.roots.iter().filter(|x| x.im() == 0.0).map(|x| x.re()).collect(),
        Err(_) => Vec::new(),
    }
}

pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("curve,gamma,delta\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.curve, sig17(p.gamma), sig17(p.delta)));
    }
    out
}

// Pieces of the axis equations for a measure x(m,0) = e γ^m, x(0,n) = z δ^n.
// Horizontal: e·H_N(γ) = Q_N(γ)·Σc and e·L_H(γ) = B_H(γ)·Σcδ over terms sharing γ.
// Vertical:   z·V_E(δ) = Q_E(δ)·Σc and z·L_V(δ) = B_V(δ)·Σcγ over terms sharing δ.

fn quad<S: Scalar>(c0: S, c1: S, c2: S, x: &S) -> S {
    c0 + c1 * x.clone() + c2 * x.clone() * x.clone()
}

pub fn q_north<S: Scalar>(spec: &WalkSpec<S>, gamma: &S) -> S {
    quad(spec.q(1, 1), spec.q(0, 1), spec.q(-1, 1), gamma)
}

pub fn h_north<S: Scalar>(spec: &WalkSpec<S>, gamma: &S) -> S {
    quad(spec.qh(1, 1), spec.qh(0, 1), spec.qh(-1, 1), gamma)
}

pub fn l_horizontal<S: Scalar>(spec: &WalkSpec<S>, gamma: &S) -> S {
    quad(-spec.qh(1, 0), S::one() - spec.qh(0, 0), -spec.qh(-1, 0), gamma)
}

pub fn b_horizontal<S: Scalar>(spec: &WalkSpec<S>, gamma: &S) -> S {
    quad(spec.q(1, -1), spec.q(0, -1), spec.q(-1, -1), gamma)
}

pub fn q_east<S: Scalar>(spec: &WalkSpec<S>, delta: &S) -> S {
    quad(spec.q(1, 1), spec.q(1, 0), spec.q(1, -1), delta)
}

pub fn v_east<S: Scalar>(spec: &WalkSpec<S>, delta: &S) -> S {
    quad(spec.qv(1, 1), spec.qv(1, 0), spec.qv(1, -1), delta)
}

pub fn l_vertical<S: Scalar>(spec: &WalkSpec<S>, delta: &S) -> S {
    quad(-spec.qv(0, 1), S::one() - spec.qv(0, 0), -spec.qv(0, -1), delta)
}

pub fn b_vertical<S: Scalar>(spec: &WalkSpec<S>, delta: &S) -> S {
    quad(spec.q(-1, 1), spec.q(-1, 0), spec.q(-1, -1), delta)
}
