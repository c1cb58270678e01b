//! Brute-force stationary distributions for checking closed forms.
//!
//! `truncated_stationary` solves the chain restricted to the box
//! `0 <= m, n <= N`; a step that would leave the box is added to the
//! self-loop of the state it starts from. `simulate` counts visits along one
//! seeded trajectory.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::compensation::InvariantMeasure;
use crate::marginals::{marginal_m, marginal_n};
use crate::model::{Region, WalkSpec, DISPLACEMENTS};
use crate::scalar::{sig17, Scalar};
use crate::spectral::{rho1, rho2};

/// Largest box the rational linear solve accepts.
pub const MAX_EXACT_N: usize = 25;
pub const MIN_N: usize = 5;
pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 1_000_000;
/// Batches used for the simulation's standard errors.
pub const SIM_BATCHES: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("truncation N={0} is below the minimum of {MIN_N}")]
    TruncationTooSmall(usize),
    #[error("SingularSystem: zero pivot at state ({m},{n}); the truncated chain is not irreducible")]
    SingularSystem { m: usize, n: usize },
    #[error("exact linear solve is limited to N <= {MAX_EXACT_N}, got {0}")]
    ExactTooLarge(usize),
    #[error("{0} needs float arithmetic")]
    RequiresFloat(OracleMethod),
    #[error("{0} is not a truncation method")]
    UnsupportedMethod(OracleMethod),
    #[error("simulation needs steps > burn_in (steps={steps}, burn_in={burn_in})")]
    EmptySample { steps: u64, burn_in: u64 },
    #[error("reference and oracle windows do not overlap")]
    NoOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    LinearSolve,
    PowerIteration,
    Simulation,
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleMethod::LinearSolve => "linear-solve",
            OracleMethod::PowerIteration => "power-iteration",
            OracleMethod::Simulation => "simulation",
        })
    }
}

impl FromStr for OracleMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solve" | "linear-solve" => Ok(OracleMethod::LinearSolve),
            "power" | "power-iteration" => Ok(OracleMethod::PowerIteration),
            "sim" | "simulation" => Ok(OracleMethod::Simulation),
            other => Err(format!("unknown method {other:?} (expected solve, power or sim)")),
        }
    }
}

/// Stationary probabilities on `0 <= m, n <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid<S> {
    pub n: usize,
    pub p: Vec<Vec<S>>,
    pub method: OracleMethod,
    pub tail_estimate: f64,
    /// `‖πP − π‖₁` reached by power iteration.
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    /// Batch-means standard errors; simulation only.
    pub std_err: Option<Vec<Vec<f64>>>,
}

impl<S: Scalar> OracleGrid<S> {
    pub fn get(&self, m: usize, n: usize) -> S {
        if m <= self.n && n <= self.n {
            self.p[m][n].clone()
        } else {
            S::zero()
        }
    }

    pub fn total(&self) -> S {
        self.p.iter().flatten().fold(S::zero(), |acc, x| acc + x.clone())
    }

    /// True when all mass sits on a single state.
    pub fn is_point_mass(&self) -> Option<(usize, usize)> {
        let mut found = None;
        for (m, row) in self.p.iter().enumerate() {
            for (n, x) in row.iter().enumerate() {
                if !x.near_zero(&S::one(), 1e-12) {
                    if found.is_some() {
                        return None;
                    }
                    found = Some((m, n));
                }
            }
        }
        found
    }

    pub fn to_f64(&self) -> OracleGrid<f64> {
        OracleGrid {
            n: self.n,
            p: self.p.iter().map(|row| row.iter().map(Scalar::to_f64).collect()).collect(),
            method: self.method,
            tail_estimate: self.tail_estimate,
            residual: self.residual,
            iterations: self.iterations,
            std_err: self.std_err.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,p\n");
        for (m, row) in self.p.iter().enumerate() {
            for (n, x) in row.iter().enumerate() {
                out.push_str(&format!("{m},{n},{}\n", sig17(x.to_f64())));
            }
        }
        out
    }
}

/// Anything that assigns a probability to lattice points.
pub trait GridSource {
    /// Largest coordinate covered, or `None` for the whole quadrant.
    fn extent(&self) -> Option<usize>;
    fn prob(&self, m: usize, n: usize) -> f64;
}

impl<S: Scalar> GridSource for OracleGrid<S> {
    fn extent(&self) -> Option<usize> {
        Some(self.n)
    }

    fn prob(&self, m: usize, n: usize) -> f64 {
        self.get(m, n).to_f64()
    }
}

impl<S: Scalar> GridSource for InvariantMeasure<S> {
    fn extent(&self) -> Option<usize> {
        None
    }

    fn prob(&self, m: usize, n: usize) -> f64 {
        self.evaluate(m, n).to_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub max_abs_err: f64,
    /// Over states where the reference is at least `floor`.
    pub max_rel_err: f64,
    pub states: usize,
    pub window: usize,
    pub worst: (usize, usize),
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "window={} states={} max_abs_err={:.3e} at ({},{}) max_rel_err={:.3e}",
            self.window, self.states, self.max_abs_err, self.worst.0, self.worst.1, self.max_rel_err
        )
    }
}

pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Elementwise errors over the common window.
pub fn compare(reference: &dyn GridSource, oracle: &dyn GridSource, floor: f64) -> Result<Comparison, OracleError> {
    let window = match (reference.extent(), oracle.extent()) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(OracleError::NoOverlap),
    };
    let mut out = Comparison { max_abs_err: 0.0, max_rel_err: 0.0, states: 0, window, worst: (0, 0) };
    for m in 0..=window {
        for n in 0..=window {
            let r = reference.prob(m, n);
            let err = (r - oracle.prob(m, n)).abs();
            if err > out.max_abs_err {
                out.max_abs_err = err;
                out.worst = (m, n);
            }
            if r.abs() >= floor {
                out.max_rel_err = out.max_rel_err.max(err / r.abs());
            }
            out.states += 1;
        }
    }
    Ok(out)
}

/// Stationary vector of the chain restricted to the `N`-box.
pub fn truncated_stationary<S: Scalar>(
    spec: &WalkSpec<S>,
    n: usize,
    method: OracleMethod,
) -> Result<OracleGrid<S>, OracleError> {
    if n < MIN_N {
        return Err(OracleError::TruncationTooSmall(n));
    }
    let (p, residual, iterations) = match method {
        OracleMethod::LinearSolve => {
            if S::EXACT && n > MAX_EXACT_N {
                return Err(OracleError::ExactTooLarge(n));
            }
            (banded_solve(spec, n)?, None, None)
        }
        OracleMethod::PowerIteration => {
            if S::EXACT {
                return Err(OracleError::RequiresFloat(method));
            }
            let (p, res, it) = power_iteration(&spec.to_f64(spec.eps()), n);
            let p = p.into_iter().map(|row| row.into_iter().map(|x| S::from_rational(&x.to_rational())).collect());
            (p.collect(), Some(res), Some(it))
        }
        OracleMethod::Simulation => return Err(OracleError::UnsupportedMethod(method)),
    };
    let floor = if S::EXACT { 0.0 } else { ((n + 1) * (n + 1)) as f64 * f64::EPSILON };
    let floor = floor + residual.unwrap_or(0.0);
    Ok(OracleGrid { n, p, method, tail_estimate: tail_estimate(spec, n) + floor, residual, iterations, std_err: None })
}

/// Geometric tail mass beyond `n` in each coordinate.
pub fn tail_estimate<S: Scalar>(spec: &WalkSpec<S>, n: usize) -> f64 {
    let k = (n + 1) as i32;
    if let (Ok(mm), Ok(mn)) = (marginal_m(spec), marginal_n(spec)) {
        let tail = |pre: f64, r: f64| pre * r.powi(k) / (1.0 - r);
        return tail(mm.prefactor.to_f64(), mm.ratio.to_f64()) + tail(mn.prefactor.to_f64(), mn.ratio.to_f64());
    }
    match (rho1(spec), rho2(spec)) {
        (Ok(r1), Ok(r2)) if r1.to_f64() < 1.0 && r2.to_f64() < 1.0 => {
            let (r1, r2) = (r1.to_f64(), r2.to_f64());
            r1.powi(k) / (1.0 - r1) + r2.powi(k) / (1.0 - r2)
        }
        _ => 1.0,
    }
}

fn index(n: usize, m: usize, nn: usize) -> usize {
    m * (n + 1) + nn
}

/// Probability of staying put, including steps redirected at the box edge.
fn self_weight<S: Scalar>(spec: &WalkSpec<S>, n: usize, m: usize, nn: usize) -> S {
    let mut w = spec.step_prob(m, nn, 0, 0).clone();
    for &(k, l) in &DISPLACEMENTS {
        let (tm, tn) = (m as i64 + k as i64, nn as i64 + l as i64);
        if tm > n as i64 || tn > n as i64 {
            w = w + spec.step_prob(m, nn, k, l).clone();
        }
    }
    w
}

/// Band storage of `(P − I)ᵀ` with the origin row replaced by `π₀₀ = 1`.
/// States are ordered m-major so the bandwidth is `N+2`; row `i` keeps
/// columns `i−w ..= i+w` at offsets `0 ..= 2w`.
struct BandSystem<S> {
    rows: Vec<Vec<S>>,
    w: usize,
}

impl<S: Scalar> BandSystem<S> {
    fn assemble(spec: &WalkSpec<S>, n: usize) -> Self {
        let size = (n + 1) * (n + 1);
        let w = n + 2;
        let mut rows: Vec<Vec<S>> = vec![vec![S::zero(); 2 * w + 1]; size];
        rows[0][w] = S::one();
        for m in 0..=n {
            for nn in 0..=n {
                let row = index(n, m, nn);
                if row == 0 {
                    continue;
                }
                rows[row][w] = self_weight(spec, n, m, nn) - S::one();
                for &(k, l) in &DISPLACEMENTS {
                    if (k, l) == (0, 0) {
                        continue;
                    }
                    let (sm, sn) = (m as i64 - k as i64, nn as i64 - l as i64);
                    if sm < 0 || sn < 0 || sm > n as i64 || sn > n as i64 {
                        continue;
                    }
                    let (sm, sn) = (sm as usize, sn as usize);
                    let p = spec.step_prob(sm, sn, k, l);
                    if !p.is_zero() {
                        let slot = &mut rows[row][index(n, sm, sn) + w - row];
                        *slot = slot.clone() + p.clone();
                    }
                }
            }
        }
        BandSystem { rows, w }
    }
}

fn banded_solve<S: Scalar>(spec: &WalkSpec<S>, n: usize) -> Result<Vec<Vec<S>>, OracleError> {
    let system = BandSystem::assemble(spec, n);
    let x = if S::EXACT {
        bareiss(&system, n)?.into_iter().map(|q| S::from_rational(&q)).collect()
    } else {
        float_elimination(system, n)?
    };
    Ok(x.chunks(n + 1).map(<[S]>::to_vec).collect())
}

fn singular(k: usize, n: usize) -> OracleError {
    OracleError::SingularSystem { m: k / (n + 1), n: k % (n + 1) }
}

/// Plain elimination without pivoting; the columns are diagonally dominant.
fn float_elimination<S: Scalar>(system: BandSystem<S>, n: usize) -> Result<Vec<S>, OracleError> {
    let BandSystem { rows: mut a, w } = system;
    let size = a.len();
    let at = |row: usize, col: usize| col + w - row;
    let mut b: Vec<S> = vec![S::zero(); size];
    b[0] = S::one();
    for k in 0..size {
        let pivot = a[k][w].clone();
        if pivot.near_zero(&S::one(), 1e-14) {
            return Err(singular(k, n));
        }
        let last = (k + w).min(size - 1);
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        for (offset, row) in tail.iter_mut().take(last - k).enumerate() {
            let i = k + 1 + offset;
            if row[at(i, k)].is_zero() {
                continue;
            }
            let factor = row[at(i, k)].clone() / pivot.clone();
            for j in k..=last {
                let pk = &pivot_row[at(k, j)];
                if !pk.is_zero() {
                    let slot = &mut row[at(i, j)];
                    *slot = slot.clone() - factor.clone() * pk.clone();
                }
            }
            b[i] = b[i].clone() - factor * b[k].clone();
        }
    }
    let mut x = vec![S::zero(); size];
    for k in (0..size).rev() {
        let last = (k + w).min(size - 1);
        let mut acc = b[k].clone();
        for j in k + 1..=last {
            let c = &a[k][at(k, j)];
            if !c.is_zero() {
                acc = acc - c.clone() * x[j].clone();
            }
        }
        x[k] = acc / a[k][w].clone();
        if x[k] < S::zero() {
            x[k] = S::zero();
        }
    }
    let total = x.iter().fold(S::zero(), |acc, v| acc + v.clone());
    Ok(x.into_iter().map(|v| v / total.clone()).collect())
}

/// Fraction-free (Bareiss) elimination over the integers.
///
/// A row that first enters the band at step `k` has not been rescaled by the
/// earlier steps, so its update skips the division by the previous pivot.
/// Back substitution works with `det·x`, which is integral by Cramer's rule.
fn bareiss<S: Scalar>(system: &BandSystem<S>, n: usize) -> Result<Vec<BigRational>, OracleError> {
    let w = system.w;
    let size = system.rows.len();
    let at = |row: usize, col: usize| col + w - row;
    let mut a: Vec<Vec<BigInt>> = system
        .rows
        .iter()
        .map(|row| {
            let row: Vec<BigRational> = row.iter().map(Scalar::to_rational).collect();
            let lcm = row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            row.iter().map(|q| q.numer() * (&lcm / q.denom())).collect()
        })
        .collect();
    let mut b = vec![BigInt::zero(); size];
    b[0] = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..size {
        let pivot = a[k][w].clone();
        if pivot.is_zero() {
            return Err(singular(k, n));
        }
        let last = (k + w).min(size - 1);
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        for (offset, row) in tail.iter_mut().take(last - k).enumerate() {
            let i = k + 1 + offset;
            let fresh = k + w == i && k > 0;
            let factor = row[at(i, k)].clone();
            for j in k + 1..=(i + w).min(size - 1) {
                let mut v = &pivot * &row[at(i, j)];
                if j <= last {
                    v -= &factor * &pivot_row[at(k, j)];
                }
                if !fresh {
                    v /= &prev;
                }
                row[at(i, j)] = v;
            }
            row[at(i, k)] = BigInt::zero();
            let mut v = &pivot * &b[i] - &factor * &b[k];
            if !fresh {
                v /= &prev;
            }
            b[i] = v;
        }
        prev = pivot;
    }
    let det = prev;
    let mut y = vec![BigInt::zero(); size];
    for k in (0..size).rev() {
        let last = (k + w).min(size - 1);
        let mut acc = &det * &b[k];
        for j in k + 1..=last {
            let c = &a[k][at(k, j)];
            if !c.is_zero() {
                acc -= c * &y[j];
            }
        }
        y[k] = acc / &a[k][w];
    }
    let total = y.iter().fold(BigInt::zero(), |acc, v| acc + v);
    Ok(y.into_iter().map(|v| BigRational::new(v, total.clone())).collect())
}

/// Pull-style iteration `π ← πP`, parallel over rows of the box.
fn power_iteration(spec: &WalkSpec<f64>, n: usize) -> (Vec<Vec<f64>>, f64, usize) {
    let stay: Vec<Vec<f64>> = (0..=n).map(|m| (0..=n).map(|nn| self_weight(spec, n, m, nn)).collect()).collect();
    let start = 1.0 / ((n + 1) * (n + 1)) as f64;
    let mut pi = vec![vec![start; n + 1]; n + 1];
    let mut next = pi.clone();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < POWER_MAX_ITER {
        next.par_iter_mut().enumerate().for_each(|(m, row)| {
            for (nn, slot) in row.iter_mut().enumerate() {
                let mut v = pi[m][nn] * stay[m][nn];
                for &(k, l) in &DISPLACEMENTS {
                    if (k, l) == (0, 0) {
                        continue;
                    }
                    let (sm, sn) = (m as i64 - k as i64, nn as i64 - l as i64);
                    if sm < 0 || sn < 0 || sm > n as i64 || sn > n as i64 {
                        continue;
                    }
                    let (sm, sn) = (sm as usize, sn as usize);
                    v += pi[sm][sn] * spec.step_prob(sm, sn, k, l);
                }
                *slot = v;
            }
        });
        iterations += 1;
        residual = pi
            .par_iter()
            .zip(next.par_iter())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum();
        std::mem::swap(&mut pi, &mut next);
        if residual <= POWER_TOL {
            break;
        }
    }
    let total: f64 = pi.iter().flatten().sum();
    for row in pi.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    (pi, residual, iterations)
}

/// Cumulative probabilities with their displacements.
type StepTable = Vec<(f64, i32, i32)>;

/// Occupation frequencies of one trajectory started at the origin.
pub fn simulate<S: Scalar>(
    spec: &WalkSpec<S>,
    steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<OracleGrid<f64>, OracleError> {
    if steps <= burn_in {
        return Err(OracleError::EmptySample { steps, burn_in });
    }
    let spec = spec.to_f64(spec.eps());
    let cumulative: Vec<(Region, StepTable)> = [Region::Interior, Region::Horizontal, Region::Vertical, Region::Origin]
        .into_iter()
        .map(|region| {
            let mut acc = 0.0;
            let table = spec
                .kernel(region)
                .entries()
                .filter(|(_, _, p)| **p > 0.0)
                .map(|(k, l, p)| {
                    acc += *p;
                    (acc, k, l)
                })
                .collect();
            (region, table)
        })
        .collect();
    let table_for = |region: Region| &cumulative.iter().find(|(r, _)| *r == region).expect("all regions tabulated").1;
    let samples = steps - burn_in;
    let batch_len = samples.div_ceil(SIM_BATCHES as u64);
    let mut counts: Vec<Vec<[u64; SIM_BATCHES]>> = vec![vec![[0; SIM_BATCHES]]];
    let mut batch_sizes = [0u64; SIM_BATCHES];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut m, mut n) = (0usize, 0usize);
    for t in 0..steps {
        if t >= burn_in {
            let b = ((t - burn_in) / batch_len) as usize;
            if m >= counts.len() {
                counts.resize(m + 1, Vec::new());
            }
            if n >= counts[m].len() {
                counts[m].resize(n + 1, [0; SIM_BATCHES]);
            }
            counts[m][n][b] += 1;
            batch_sizes[b] += 1;
        }
        let table = table_for(Region::of(m, n));
        let u: f64 = rng.gen::<f64>() * table.last().map_or(1.0, |e| e.0);
        let &(_, k, l) = table.iter().find(|e| u < e.0).unwrap_or_else(|| table.last().expect("kernel has mass"));
        m = (m as i64 + k as i64) as usize;
        n = (n as i64 + l as i64) as usize;
    }
    let size = counts.iter().map(Vec::len).max().unwrap_or(1).max(counts.len()).max(MIN_N + 1) - 1;
    let used: Vec<usize> = (0..SIM_BATCHES).filter(|&b| batch_sizes[b] > 0).collect();
    let mut p = vec![vec![0.0; size + 1]; size + 1];
    let mut se = vec![vec![0.0; size + 1]; size + 1];
    for (m, row) in counts.iter().enumerate() {
        for (n, c) in row.iter().enumerate() {
            let total: u64 = c.iter().sum();
            let mean = total as f64 / samples as f64;
            p[m][n] = mean;
            se[m][n] = if used.len() >= 2 {
                let means: Vec<f64> = used.iter().map(|&b| c[b] as f64 / batch_sizes[b] as f64).collect();
                let avg = means.iter().sum::<f64>() / means.len() as f64;
                let var = means.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
                (var / means.len() as f64).sqrt()
            } else {
                (mean * (1.0 - mean) / samples as f64).sqrt()
            };
        }
    }
    let worst = se.iter().flatten().cloned().fold(0.0, f64::max);
    Ok(OracleGrid {
        n: size,
        p,
        method: OracleMethod::Simulation,
        tail_estimate: worst.max((0.25 / samples as f64).sqrt()),
        residual: None,
        iterations: None,
        std_err: Some(se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::{alternating_service, simultaneous_arrivals, AlternatingParams};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn method_names_round_trip() {
        for m in [OracleMethod::LinearSolve, OracleMethod::PowerIteration, OracleMethod::Simulation] {
            assert_eq!(m.to_string().parse::<OracleMethod>().unwrap(), m);
        }
        assert!("gth".parse::<OracleMethod>().is_err());
    }

    #[test]
    fn small_box_is_rejected() {
        let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
        assert_eq!(truncated_stationary(&spec, 4, OracleMethod::LinearSolve), Err(OracleError::TruncationTooSmall(4)));
    }

    #[test]
    fn exact_solve_sums_to_one() {
        let spec = alternating_service(&AlternatingParams { a: r(3, 5), lambda1: r(2, 5), lambda2: r(3, 20) }).unwrap();
        let grid = truncated_stationary(&spec, 8, OracleMethod::LinearSolve).unwrap();
        assert_eq!(grid.total(), r(1, 1));
        assert!(grid.p.iter().flatten().all(|x| *x >= r(0, 1)));
    }

    #[test]
    fn power_needs_float() {
        let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
        assert_eq!(
            truncated_stationary(&spec, 6, OracleMethod::PowerIteration),
            Err(OracleError::RequiresFloat(OracleMethod::PowerIteration))
        );
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = simultaneous_arrivals(&r(3, 5), &r(1, 5)).unwrap();
        let a = simulate(&spec, 20_000, 100, 7).unwrap();
        let b = simulate(&spec, 20_000, 100, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.total() - 1.0).abs() < 1e-12);
        assert_eq!(simulate(&spec, 10, 10, 7), Err(OracleError::EmptySample { steps: 10, burn_in: 10 }));
    }
}
