//! Exact linear forms in logarithms.
//!
//! A [`LogSum`] is `c₀ + Σ cⱼ·ln(bⱼ)` with rational coefficients and integer
//! bases `bⱼ > 1` kept pairwise coprime. Logarithms of pairwise coprime
//! integers are linearly independent over the rationals, and by Baker's
//! theorem also independent from `1`, so the form is zero exactly when every
//! coefficient is zero. Any other sign question is settled by interval
//! evaluation at increasing precision, which must terminate.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::prob::{format_rational, ln_biguint, rational_to_f64, Rational};

const MAX_PRECISION_BITS: u64 = 1 << 15;

#[derive(Clone, PartialEq, Eq)]
pub struct LogSum {
    constant: Rational,
    /// Sorted by base; bases pairwise coprime and > 1; coefficients nonzero.
    terms: Vec<(BigUint, Rational)>,
}

impl serde::Serialize for LogSum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl fmt::Debug for LogSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogSum({} ≈ {})", self.render(), self.to_f64())
    }
}

impl LogSum {
    pub fn zero() -> Self {
        LogSum { constant: Rational::zero(), terms: Vec::new() }
    }

    pub fn constant(c: Rational) -> Self {
        LogSum { constant: c, terms: Vec::new() }
    }

    /// `ln(r)` for a positive rational.
    ///
    /// # Panics
    /// If `r <= 0`.
    pub fn ln(r: &Rational) -> Self {
        assert!(r.is_positive(), "ln of non-positive rational {r}");
        let num = r.numer().magnitude().clone();
        let den = r.denom().magnitude().clone();
        let raw = vec![(num, Rational::one()), (den, -Rational::one())];
        Self::normalize(Rational::zero(), raw)
    }

    /// `coef · ln(r)`.
    pub fn scaled_ln(coef: &Rational, r: &Rational) -> Self {
        Self::ln(r).scale(coef)
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    pub fn terms(&self) -> &[(BigUint, Rational)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.terms.is_empty()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LogSum {
            constant: &self.constant * c,
            terms: self.terms.iter().map(|(b, k)| (b.clone(), k * c)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut raw: Vec<(BigUint, Rational)> = self.terms.clone();
        raw.extend(other.terms.iter().cloned());
        Self::normalize(&self.constant + &other.constant, raw)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn add_constant(&self, c: &Rational) -> Self {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a LogSum>) -> Self {
        let mut constant = Rational::zero();
        let mut raw = Vec::new();
        for it in items {
            constant += &it.constant;
            raw.extend(it.terms.iter().cloned());
        }
        Self::normalize(constant, raw)
    }

    pub fn to_f64(&self) -> f64 {
        let mut v = rational_to_f64(&self.constant);
        for (b, c) in &self.terms {
            v += rational_to_f64(c) * ln_biguint(b);
        }
        v
    }

    /// Sign of the form. `None` only if precision ran out, which needs a
    /// nonzero value smaller than about 2^-32768.
    pub fn signum(&self) -> Option<Ordering> {
        if self.is_zero() {
            return Some(Ordering::Equal);
        }
        // fast path: f64 with a generous error bound
        let mut v = rational_to_f64(&self.constant);
        let mut mag = v.abs();
        for (b, c) in &self.terms {
            let t = rational_to_f64(c) * ln_biguint(b);
            v += t;
            mag += t.abs();
        }
        if v.is_finite() && mag.is_finite() {
            let err = 1e-12 * mag + 1e-300;
            if v > err {
                return Some(Ordering::Greater);
            }
            if v < -err {
                return Some(Ordering::Less);
            }
        }
        let mut prec = 128u64;
        while prec <= MAX_PRECISION_BITS {
            let (lo, hi) = self.fixed_interval(prec);
            if lo.is_positive() {
                return Some(Ordering::Greater);
            }
            if hi.is_negative() {
                return Some(Ordering::Less);
            }
            prec *= 2;
        }
        None
    }

    /// Compare two forms exactly (up to the precision cap).
    pub fn compare(&self, other: &Self) -> Option<Ordering> {
        self.sub(other).signum()
    }

    /// Rigorous rational bounds `lo <= value <= hi` with width about `2^-prec`.
    pub fn bounds(&self, prec: u64) -> (Rational, Rational) {
        let (lo, hi) = self.fixed_interval(prec + 8);
        let scale = BigInt::one() << (prec + 8 + GUARD_BITS);
        (BigRational::new(lo, scale.clone()), BigRational::new(hi, scale))
    }

    /// Interval `[lo, hi]` in units of `2^-(prec + GUARD_BITS)`.
    fn fixed_interval(&self, prec: u64) -> (BigInt, BigInt) {
        let w = prec + GUARD_BITS;
        let scale = BigInt::one() << w;
        let mut value = floor_div(&(self.constant.numer() * &scale), self.constant.denom());
        let mut err = BigInt::one();
        for (b, c) in &self.terms {
            let (l, e) = ln_fixed(b, w);
            let l = BigInt::from(l);
            value += floor_div(&(c.numer() * &l), c.denom());
            // |c|·e + 1 rounded up
            let ce = (c.numer().magnitude() * BigUint::from(e)) / c.denom().magnitude() + 2u32;
            err += BigInt::from(ce);
        }
        (&value - &err, &value + &err)
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if !self.constant.is_zero() || self.terms.is_empty() {
            parts.push(format_rational(&self.constant));
        }
        for (b, c) in &self.terms {
            parts.push(format!("{}·ln({})", format_rational(c), b));
        }
        parts.join(" + ")
    }

    fn normalize(constant: Rational, raw: Vec<(BigUint, Rational)>) -> Self {
        let raw: Vec<(BigUint, Rational)> =
            raw.into_iter().filter(|(b, c)| !c.is_zero() && !b.is_one()).collect();
        let bases = coprime_base(raw.iter().map(|(b, _)| b.clone()).collect());
        let mut coefs = vec![Rational::zero(); bases.len()];
        for (b, c) in &raw {
            let mut rest = b.clone();
            for (i, base) in bases.iter().enumerate() {
                let mut e = 0u32;
                loop {
                    let (q, r) = rest.div_rem(base);
                    if !r.is_zero() {
                        break;
                    }
                    rest = q;
                    e += 1;
                }
                if e > 0 {
                    coefs[i] += c * Rational::from_integer(BigInt::from(e));
                }
            }
            debug_assert!(rest.is_one(), "coprime base does not cover {b}");
        }
        let mut terms: Vec<(BigUint, Rational)> =
            bases.into_iter().zip(coefs).filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        LogSum { constant, terms }
    }
}

const GUARD_BITS: u64 = 64;

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

/// Refine a multiset of integers > 1 into pairwise coprime factors such that
/// every input is a product of powers of the output.
pub fn coprime_base(mut v: Vec<BigUint>) -> Vec<BigUint> {
    v.retain(|x| !x.is_one() && !x.is_zero());
    v.sort();
    v.dedup();
    'outer: loop {
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                let g = v[i].gcd(&v[j]);
                if !g.is_one() {
                    let a = v[i].clone();
                    let b = v[j].clone();
                    v.remove(j);
                    v.remove(i);
                    for x in [&a / &g, &b / &g, g] {
                        if !x.is_one() {
                            v.push(x);
                        }
                    }
                    v.sort();
                    v.dedup();
                    continue 'outer;
                }
            }
        }
        return v;
    }
}

/// `floor(atanh(p/q)·2^w)` for `0 <= p/q <= 1/3`, with an error bound in ulps.
fn atanh_fixed(p: &BigUint, q: &BigUint, w: u64) -> (BigUint, u64) {
    let scale = BigUint::one() << w;
    let z = (p * &scale) / q;
    let z2 = (p * p * &scale) / (q * q);
    let mut term = z;
    let mut sum = BigUint::zero();
    let mut j: u64 = 0;
    while !term.is_zero() {
        sum += &term / BigUint::from(2 * j + 1);
        term = (&term * &z2) >> w;
        j += 1;
    }
    (sum, 5 * j + 8)
}

/// `ln(n)·2^w` for `n >= 1`, with an error bound in ulps.
fn ln_fixed(n: &BigUint, w: u64) -> (BigUint, u64) {
    let k = n.bits() - 1;
    let pow = BigUint::one() << k;
    let (a, ea) = atanh_fixed(&(n - &pow), &(n + &pow), w);
    let (l2, e2) = atanh_fixed(&BigUint::one(), &BigUint::from(3u32), w);
    let value = (a << 1u32) + (l2 << 1u32) * BigUint::from(k);
    (value, 2 * ea + 2 * e2 * (k + 1))
}

/// `Some(Ordering)` of a LogSum against zero, treating precision exhaustion as a tie.
pub fn sign_or_tie(x: &LogSum) -> Ordering {
    x.signum().unwrap_or(Ordering::Equal)
}

/// Sign helper for rationals.
pub fn rational_sign(r: &Rational) -> Ordering {
    match r.numer().sign() {
        Sign::Minus => Ordering::Less,
        Sign::NoSign => Ordering::Equal,
        Sign::Plus => Ordering::Greater,
    }
}
