//! Probability scalars.
//!
//! Three representations share one interface: exact rationals (the
//! authoritative mode), plain `f64`, and [`LogProb`], a log-domain `f64` used
//! where masses underflow (majority tails over hundreds of rounds).

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Tolerance on the total mass of a float-mode distribution.
pub const FLOAT_NORMALIZATION_TOL: f64 = 1e-12;

pub trait Prob: Clone + fmt::Debug + PartialEq + PartialOrd + Send + Sync + 'static {
    const EXACT: bool;
    const MODE: &'static str;

    fn nil() -> Self;
    fn certain() -> Self;
    fn from_ratio(num: u64, den: u64) -> Self;
    fn from_biguint(n: &BigUint) -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn plus(&self, other: &Self) -> Self;
    /// Saturating difference, never below zero.
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn over(&self, other: &Self) -> Self;
    fn is_nil(&self) -> bool;
    fn as_f64(&self) -> f64;
    /// Natural log of the mass; `-inf` at zero.
    fn ln(&self) -> f64;
    fn as_rational(&self) -> Option<&Rational> {
        None
    }
    fn powi(&self, k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::certain();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.times(&base);
            }
            base = base.times(&base);
            k >>= 1;
        }
        acc
    }
    fn is_normalized(total: &Self) -> bool;
    fn render(&self) -> String;
}

impl Prob for Rational {
    const EXACT: bool = true;
    const MODE: &'static str = "exact";

    fn nil() -> Self {
        Zero::zero()
    }
    fn certain() -> Self {
        One::one()
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_biguint(n: &BigUint) -> Self {
        BigRational::from_integer(BigInt::from(n.clone()))
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        let d = self - other;
        if d.is_negative() {
            Zero::zero()
        } else {
            d
        }
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn over(&self, other: &Self) -> Self {
        self / other
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn as_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn ln(&self) -> f64 {
        ln_rational(self)
    }
    fn as_rational(&self) -> Option<&Rational> {
        Some(self)
    }
    fn is_normalized(total: &Self) -> bool {
        total.is_one()
    }
    fn render(&self) -> String {
        format_rational(self)
    }
}

impl Prob for f64 {
    const EXACT: bool = false;
    const MODE: &'static str = "float";

    fn nil() -> Self {
        0.0
    }
    fn certain() -> Self {
        1.0
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn from_biguint(n: &BigUint) -> Self {
        n.to_f64().unwrap_or(f64::INFINITY)
    }
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        (self - other).max(0.0)
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn over(&self, other: &Self) -> Self {
        self / other
    }
    fn is_nil(&self) -> bool {
        *self == 0.0
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn is_normalized(total: &Self) -> bool {
        (total - 1.0).abs() <= FLOAT_NORMALIZATION_TOL
    }
    fn render(&self) -> String {
        format!("{self:e}")
    }
}

/// A probability stored as its natural logarithm.
#[derive(Clone, Copy, PartialEq)]
pub struct LogProb(pub f64);

impl fmt::Debug for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogProb(ln={})", self.0)
    }
}

impl PartialOrd for LogProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl Prob for LogProb {
    const EXACT: bool = false;
    const MODE: &'static str = "log-float";

    fn nil() -> Self {
        LogProb(f64::NEG_INFINITY)
    }
    fn certain() -> Self {
        LogProb(0.0)
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        LogProb((num as f64).ln() - (den as f64).ln())
    }
    fn from_biguint(n: &BigUint) -> Self {
        LogProb(ln_biguint(n))
    }
    fn from_rational(r: &Rational) -> Self {
        LogProb(ln_rational(r))
    }
    fn plus(&self, other: &Self) -> Self {
        LogProb(log_add_exp(self.0, other.0))
    }
    fn minus(&self, other: &Self) -> Self {
        if other.0 == f64::NEG_INFINITY {
            return *self;
        }
        if other.0 >= self.0 {
            return LogProb(f64::NEG_INFINITY);
        }
        LogProb(self.0 + (-(other.0 - self.0).exp_m1()).ln())
    }
    fn times(&self, other: &Self) -> Self {
        if self.is_nil() || other.is_nil() {
            return Self::nil();
        }
        LogProb(self.0 + other.0)
    }
    fn over(&self, other: &Self) -> Self {
        if self.is_nil() {
            return Self::nil();
        }
        LogProb(self.0 - other.0)
    }
    fn is_nil(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
    fn as_f64(&self) -> f64 {
        self.0.exp()
    }
    fn ln(&self) -> f64 {
        self.0
    }
    fn powi(&self, k: u64) -> Self {
        if k == 0 {
            return Self::certain();
        }
        if self.is_nil() {
            return Self::nil();
        }
        LogProb(self.0 * k as f64)
    }
    fn is_normalized(total: &Self) -> bool {
        total.0.abs() <= FLOAT_NORMALIZATION_TOL
    }
    fn render(&self) -> String {
        format!("exp({:e})", self.0)
    }
}

/// Natural log of a big unsigned integer, accurate to f64 precision for any size.
pub fn ln_biguint(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        if let Some(v) = n.to_f64() {
            if v.is_finite() {
                return v.ln();
            }
        }
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_rational(r: &Rational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    ln_biguint(num) - ln_biguint(den)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let sign = if r.numer().sign() == Sign::Minus { -1.0 } else { 1.0 };
    sign * ln_rational(&r.abs()).exp()
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_from_int(v: u64) -> Rational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exact value of an `f64` as a rational.
pub fn rational_from_f64(v: f64) -> Result<Rational> {
    BigRational::from_float(v).ok_or_else(|| Error::InvalidParameter(format!("non-finite value {v}")))
}

/// Parse `"p/q"`, an integer, or a finite decimal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational '{s}'"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches('-');
        let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
        if !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        let v = BigRational::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_prob_arithmetic_matches_float() {
        let a = LogProb::from_ratio(1, 4);
        let b = LogProb::from_ratio(1, 2);
        assert!((a.plus(&b).as_f64() - 0.75).abs() < 1e-15);
        assert!((b.minus(&a).as_f64() - 0.25).abs() < 1e-15);
        assert!((a.times(&b).as_f64() - 0.125).abs() < 1e-15);
        assert!(a.minus(&b).is_nil());
        assert!(LogProb::nil().times(&a).is_nil());
    }

    #[test]
    fn log_prob_survives_underflow() {
        let tiny = LogProb(-2000.0);
        let sum = tiny.plus(&tiny);
        assert!((sum.0 - (-2000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(tiny.as_f64(), 0.0);
    }

    #[test]
    fn ln_of_huge_integers() {
        let n = BigUint::from(3u32).pow(2000);
        let expected = 2000.0 * 3f64.ln();
        assert!((ln_biguint(&n) - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), rational(3, 4));
        assert_eq!(parse_rational("0.25").unwrap(), rational(1, 4));
        assert_eq!(parse_rational("2").unwrap(), rational(2, 1));
        assert_eq!(parse_rational("-1.5").unwrap(), rational(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!(format_rational(&rational(6, 8)), "3/4");
    }
}
