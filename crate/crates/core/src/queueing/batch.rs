use num_bigint::BigInt;
use num_integer::binomial;

use crate::scalar::Scalar;

use super::{bar, open_unit, QueueingError};

/// Geometric batches of mean `lambda1 + lambda2`, each job routed to queue k
/// with probability `lambda_k / (lambda1 + lambda2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGeometricParams<S> {
    pub a: S,
    pub lambda1: S,
    pub lambda2: S,
}

impl<S: Scalar> BatchGeometricParams<S> {
    pub fn lambda_t(&self) -> S {
        self.lambda1.clone() + self.lambda2.clone()
    }

    pub fn validate(&self) -> Result<(), QueueingError> {
        open_unit("a", &self.a)?;
        if self.lambda1.is_negative() || self.lambda2.is_negative() {
            return Err(QueueingError::InvalidParameter("arrival rates must be nonnegative".into()));
        }
        if !self.lambda_t().is_positive() {
            return Err(QueueingError::InvalidParameter("lambda1 + lambda2 must be positive".into()));
        }
        Ok(())
    }
}

/// P(i class-1 and j class-2 arrivals in one slot).
pub fn batch_arrival_pmf<S: Scalar>(p: &BatchGeometricParams<S>, i: usize, j: usize) -> S {
    let r = S::one() + p.lambda_t();
    let c = binomial(BigInt::from(i + j), BigInt::from(i));
    S::from_bigint(&c) * (p.lambda1.clone() / r.clone()).powu(i as u32) * (p.lambda2.clone() / r.clone()).powu(j as u32)
        / r
}

/// The state-difference ratio for the second coordinate at (l, k).
pub fn delta_equation<S: Scalar>(p: &BatchGeometricParams<S>, l: usize, k: usize) -> Result<S, QueueingError> {
    if p.lambda2.is_zero() {
        return Ok(S::zero());
    }
    let a = |i, j| batch_arrival_pmf(p, i, j);
    let num = a(l + 1, k + 1) * (S::one() + p.lambda1.clone()) - p.lambda1.clone() * a(l, k + 1);
    let den = bar(&p.a) * (a(l + 1, k) - a(l + 1, k + 1));
    if den.is_zero() {
        return Err(QueueingError::DegenerateDenominator(format!("delta equation at ({l},{k})")));
    }
    Ok(num / den)
}

/// The product measure and how well it satisfies the batch balance equations.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport<S> {
    pub gamma: S,
    pub delta: S,
    /// π(m, n) = coeff · γ^m · δ^n.
    pub coeff: S,
    pub window: usize,
    pub arrival_cap: usize,
    pub max_residual: S,
    /// Probability that a batch exceeds the cap in either class.
    pub tail_bound: S,
}

impl<S: Scalar> BatchReport<S> {
    pub fn evaluate(&self, m: usize, n: usize) -> S {
        self.coeff.clone() * self.gamma.powu(m as u32) * self.delta.powu(n as u32)
    }

    pub fn marginal_m(&self, m: usize) -> S {
        (S::one() - self.gamma.clone()) * self.gamma.powu(m as u32)
    }

    pub fn marginal_n(&self, n: usize) -> S {
        (S::one() - self.delta.clone()) * self.delta.powu(n as u32)
    }
}

/// Builds π(m,n) = (1-γ)(1-δ)γ^m δ^n with γ = λ₁/a, δ = λ₂/(1-a) and checks
/// the batch balance equations on 0 ≤ m, n ≤ `window`, dropping arrivals of
/// more than `arrival_cap` jobs of either class.
pub fn batch_geometric_measure<S: Scalar>(
    p: &BatchGeometricParams<S>,
    window: usize,
    arrival_cap: usize,
) -> Result<BatchReport<S>, QueueingError> {
    p.validate()?;
    let ab = bar(&p.a);
    let gamma = p.lambda1.clone() / p.a.clone();
    let delta = p.lambda2.clone() / ab.clone();
    if gamma >= S::one() || delta >= S::one() {
        return Err(QueueingError::NotErgodic { rho1: gamma.to_f64(), rho2: delta.to_f64() });
    }
    let coeff = bar(&gamma) * bar(&delta);
    let w = window;
    let gp: Vec<S> = (0..=w + 1).map(|i| gamma.powu(i as u32)).collect();
    let dp: Vec<S> = (0..=w + 1).map(|j| delta.powu(j as u32)).collect();
    let pi = |m: usize, n: usize| coeff.clone() * gp[m].clone() * dp[n].clone();
    let arr: Vec<Vec<S>> = (0..=w)
        .map(|i| {
            (0..=w)
                .map(|j| if i > arrival_cap || j > arrival_cap { S::zero() } else { batch_arrival_pmf(p, i, j) })
                .collect()
        })
        .collect();
    let mut max_residual = S::zero();
    for m in 0..=w {
        for n in 0..=w {
            let mut serve1 = S::zero();
            for j in 0..=n {
                serve1 = serve1 + arr[m][n - j].clone() * pi(0, j);
            }
            let mut serve2 = S::zero();
            for i in 0..=m {
                serve2 = serve2 + arr[m - i][n].clone() * pi(i, 0);
            }
            for i in 0..=m {
                for j in 0..=n {
                    let a = arr[m - i][n - j].clone();
                    if a.is_zero() {
                        continue;
                    }
                    serve1 = serve1 + a.clone() * pi(i + 1, j);
                    serve2 = serve2 + a * pi(i, j + 1);
                }
            }
            let rhs = p.a.clone() * serve1 + ab.clone() * serve2;
            let r = (rhs - pi(m, n)).abs();
            if r > max_residual {
                max_residual = r;
            }
        }
    }
    let one = S::one();
    let tail1 = (p.lambda1.clone() / (one.clone() + p.lambda1.clone())).powu(arrival_cap as u32 + 1);
    let tail2 = (p.lambda2.clone() / (one + p.lambda2.clone())).powu(arrival_cap as u32 + 1);
    Ok(BatchReport { gamma, delta, coeff, window, arrival_cap, max_residual, tail_bound: tail1 + tail2 })
}
