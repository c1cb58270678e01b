//! Number types the whole crate is generic over.
//!
//! `BigRational` gives exact arithmetic; `f64` uses a tolerance supplied by
//! the caller (usually the spec's `eps`).

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    const EXACT: bool;

    fn from_rational(q: &BigRational) -> Self;
    fn from_bigint(i: &BigInt) -> Self;
    fn to_f64(&self) -> f64;
    /// Square root if it is representable; rationals must be perfect squares.
    fn exact_sqrt(&self) -> Option<Self>;
    /// Exact value of the number; floats convert bit-for-bit.
    fn to_rational(&self) -> BigRational;

    fn from_i64(v: i64) -> Self {
        Self::from_bigint(&BigInt::from(v))
    }

    fn ratio(n: i64, d: i64) -> Self {
        Self::from_i64(n) / Self::from_i64(d)
    }

    /// Exact zero for rationals; `|x| <= eps * max(1, scale)` for floats.
    fn near_zero(&self, scale: &Self, eps: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.to_f64().abs() <= eps * scale.to_f64().abs().max(1.0)
        }
    }

    fn approx_eq(&self, other: &Self, eps: f64) -> bool {
        let scale = if self.abs() > other.abs() { self.abs() } else { other.abs() };
        (self.clone() - other.clone()).near_zero(&scale, eps)
    }

    fn powu(&self, k: u32) -> Self {
        let mut out = Self::one();
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        out
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(q: &BigRational) -> Self {
        q.clone()
    }

    fn from_bigint(i: &BigInt) -> Self {
        BigRational::from_integer(i.clone())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> BigRational {
        self.clone()
    }

    fn exact_sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer();
        let d = self.denom();
        let rn = n.sqrt();
        let rd = d.sqrt();
        if &(&rn * &rn) == n && &(&rd * &rd) == d {
            Some(BigRational::new(rn, rd))
        } else {
            None
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(q: &BigRational) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }

    fn from_bigint(i: &BigInt) -> Self {
        ToPrimitive::to_f64(i).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> BigRational {
        BigRational::from_float(*self).unwrap_or_default()
    }

    fn exact_sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| self.sqrt())
    }
}

/// Parses `"p/q"`, integers and decimals with an optional exponent into an
/// exact rational. `"0.0405"` becomes `81/2000`.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|e| format!("{s:?}: {e}"))?;
        let d = BigInt::from_str(d.trim()).map_err(|e| format!("{s:?}: {e}"))?;
        if d.is_zero() {
            return Err(format!("{s:?}: zero denominator"));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().map_err(|_| format!("{s:?}: bad exponent"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("{s:?}: no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("{s:?}: not a number"));
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|e| format!("{s:?}: {e}"))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    Ok(if scale >= 0 { BigRational::from_integer(numer * pow) } else { BigRational::new(numer, pow) })
}

/// Renders a rational as `p/q`, or `p` when the denominator is one.
pub fn render_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Decimal text with 17 significant digits.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}
