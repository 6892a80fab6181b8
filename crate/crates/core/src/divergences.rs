//! Rényi, KL, conditional KL, total variation and hockey-stick divergences.
//!
//! Natural log throughout. With exact (rational) inputs the log-valued
//! divergences are returned as [`LogSum`]s, so comparisons between them are
//! decided exactly; float inputs give float values.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::dist::{align, Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::exact::LogSum;
use crate::prob::{format_rational, parse_rational, rational_to_f64, Prob, Rational};

/// Tolerance for comparisons that involve a float-mode value.
pub const FLOAT_COMPARE_TOL: f64 = 1e-9;

/// A real number that is either an exact rational or a float.
#[derive(Debug, Clone, PartialEq)]
pub enum Real {
    Exact(Rational),
    Float(f64),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(Rational::zero())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => rational_to_f64(r),
            Real::Float(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn from_prob<P: Prob>(p: &P) -> Self {
        match p.as_rational() {
            Some(r) => Real::Exact(r.clone()),
            None => Real::Float(p.as_f64()),
        }
    }

    /// `self ≤ other`, exactly when both are exact, else within `tol`.
    pub fn le(&self, other: &Real, tol: f64) -> bool {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a <= b,
            _ => self.to_f64() <= other.to_f64() + tol,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Real::Exact(r) => format_rational(r),
            Real::Float(v) => format!("{v:e}"),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Real::Exact(r) => s.serialize_str(&format_rational(r)),
            Real::Float(v) => s.serialize_f64(*v),
        }
    }
}

/// A divergence in nats.
#[derive(Debug, Clone, PartialEq)]
pub enum DivergenceValue {
    Infinite,
    Exact(LogSum),
    Float(f64),
}

impl DivergenceValue {
    pub fn zero() -> Self {
        DivergenceValue::Exact(LogSum::zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, DivergenceValue::Infinite)
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, DivergenceValue::Float(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            DivergenceValue::Infinite => f64::INFINITY,
            DivergenceValue::Exact(l) => l.to_f64(),
            DivergenceValue::Float(v) => *v,
        }
    }

    pub fn to_bits(&self) -> f64 {
        self.to_f64() / std::f64::consts::LN_2
    }

    pub fn mode(&self) -> &'static str {
        match self {
            DivergenceValue::Float(_) => "float",
            _ => "exact",
        }
    }

    /// Exact comparison when both sides are exact; otherwise float within `tol`.
    pub fn compare(&self, other: &DivergenceValue, tol: f64) -> Ordering {
        use DivergenceValue::*;
        match (self, other) {
            (Infinite, Infinite) => Ordering::Equal,
            (Infinite, _) => Ordering::Greater,
            (_, Infinite) => Ordering::Less,
            (Exact(a), Exact(b)) => a.compare(b).unwrap_or(Ordering::Equal),
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                if (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
                    Ordering::Equal
                } else {
                    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
                }
            }
        }
    }

    pub fn le(&self, other: &DivergenceValue, tol: f64) -> bool {
        self.compare(other, tol) != Ordering::Greater
    }

    /// `self ≤ bound` for a bound given as a log-sum.
    pub fn le_logsum(&self, bound: &LogSum, tol: f64) -> bool {
        self.le(&DivergenceValue::Exact(bound.clone()), tol)
    }

    pub fn add(&self, other: &DivergenceValue) -> DivergenceValue {
        use DivergenceValue::*;
        match (self, other) {
            (Infinite, _) | (_, Infinite) => Infinite,
            (Exact(a), Exact(b)) => Exact(a.add(b)),
            _ => Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn scale(&self, c: &Rational) -> DivergenceValue {
        use DivergenceValue::*;
        match self {
            Infinite => Infinite,
            Exact(a) => Exact(a.scale(c)),
            Float(v) => Float(v * rational_to_f64(c)),
        }
    }

    pub fn render(&self) -> String {
        match self {
            DivergenceValue::Infinite => "inf".into(),
            DivergenceValue::Exact(l) => format!("{:.12}", l.to_f64()),
            DivergenceValue::Float(v) => format!("{v:.12}"),
        }
    }
}

impl Serialize for DivergenceValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DivergenceValue::Infinite => s.serialize_str("inf"),
            other => s.serialize_f64(other.to_f64()),
        }
    }
}

/// Order of a Rényi divergence.
#[derive(Debug, Clone, PartialEq)]
pub enum Alpha {
    Finite(Rational),
    Float(f64),
    Infinity,
}

impl Alpha {
    pub fn one() -> Self {
        Alpha::Finite(Rational::one())
    }

    pub fn integer(k: u64) -> Self {
        Alpha::Finite(Rational::from_integer(BigInt::from(k)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Alpha::Finite(r) => rational_to_f64(r),
            Alpha::Float(v) => *v,
            Alpha::Infinity => f64::INFINITY,
        }
    }

    /// The stability definitions only use orders `α ≥ 1`.
    pub fn in_stability_range(&self) -> bool {
        self.to_f64() >= 1.0
    }

    /// `"1"`, `"3/2"`, `"inf"`, or a decimal.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(Alpha::Infinity);
        }
        let r = parse_rational(t)?;
        if !r.is_positive() {
            return Err(Error::InvalidParameter(format!("Rényi order must be positive, got {t}")));
        }
        Ok(Alpha::Finite(r))
    }
}

/// `ε` given either exactly through `e^ε` or as a float.
#[derive(Debug, Clone, PartialEq)]
pub enum Eps {
    /// `e^ε` as an exact rational `≥ 1`.
    ExpRatio(Rational),
    Nats(f64),
}

impl Eps {
    pub fn zero() -> Self {
        Eps::ExpRatio(Rational::one())
    }

    /// `ε = ln(r)`.
    pub fn ln_of(r: Rational) -> Result<Self> {
        if r < Rational::one() {
            return Err(Error::InvalidParameter(format!("e^eps = {} < 1", format_rational(&r))));
        }
        Ok(Eps::ExpRatio(r))
    }

    pub fn nats(v: f64) -> Result<Self> {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be finite and nonnegative, got {v}")));
        }
        Ok(Eps::Nats(v))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Eps::ExpRatio(r) => crate::prob::ln_rational(r),
            Eps::Nats(v) => *v,
        }
    }

    pub fn as_logsum(&self) -> Option<LogSum> {
        match self {
            Eps::ExpRatio(r) => Some(LogSum::ln(r)),
            Eps::Nats(_) => None,
        }
    }

    /// `"ln(3/2)"` (exact) or a decimal number of nats.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(inner) = t.strip_prefix("ln(").and_then(|r| r.strip_suffix(')')) {
            return Eps::ln_of(parse_rational(inner)?);
        }
        if t == "0" {
            return Ok(Eps::zero());
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse(format!("invalid eps '{t}'")))?;
        Eps::nats(v)
    }

    pub fn render(&self) -> String {
        match self {
            Eps::ExpRatio(r) if r.is_one() => "0".into(),
            Eps::ExpRatio(r) => format!("ln({})", format_rational(r)),
            Eps::Nats(v) => format!("{v}"),
        }
    }
}

fn rat<P: Prob>(p: &P) -> &Rational {
    p.as_rational().expect("exact mode")
}

pub fn kl<A: Atom, P: Prob>(p: &FiniteDistribution<A, P>, q: &FiniteDistribution<A, P>) -> Result<DivergenceValue> {
    p.check_same_universe(q)?;
    let rows = align(p, q);
    if rows.iter().any(|(_, a, b)| !a.is_nil() && b.is_nil()) {
        return Ok(DivergenceValue::Infinite);
    }
    if P::EXACT {
        let terms: Vec<LogSum> = rows
            .iter()
            .filter(|(_, a, _)| !a.is_nil())
            .map(|(_, a, b)| LogSum::scaled_ln(rat(a), &(rat(a) / rat(b))))
            .collect();
        Ok(DivergenceValue::Exact(LogSum::sum(terms.iter())))
    } else {
        let v: f64 = rows.iter().filter(|(_, a, _)| !a.is_nil()).map(|(_, a, b)| a.as_f64() * (a.ln() - b.ln())).sum();
        Ok(DivergenceValue::Float(v.max(0.0)))
    }
}

pub fn renyi<A: Atom, P: Prob>(
    alpha: &Alpha,
    p: &FiniteDistribution<A, P>,
    q: &FiniteDistribution<A, P>,
) -> Result<DivergenceValue> {
    p.check_same_universe(q)?;
    if alpha.to_f64() <= 0.0 || alpha.to_f64().is_nan() {
        return Err(Error::InvalidParameter("Rényi order must be positive".into()));
    }
    let rows = align(p, q);
    let below_one = alpha.to_f64() < 1.0;
    if !below_one && rows.iter().any(|(_, a, b)| !a.is_nil() && b.is_nil()) {
        return Ok(DivergenceValue::Infinite);
    }
    match alpha {
        Alpha::Finite(r) if r.is_one() => kl(p, q),
        Alpha::Infinity => {
            if P::EXACT {
                let max = rows
                    .iter()
                    .filter(|(_, a, _)| !a.is_nil())
                    .map(|(_, a, b)| rat(a) / rat(b))
                    .max()
                    .expect("distribution is nonempty");
                Ok(DivergenceValue::Exact(LogSum::ln(&max)))
            } else {
                let max = rows
                    .iter()
                    .filter(|(_, a, _)| !a.is_nil())
                    .map(|(_, a, b)| a.ln() - b.ln())
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(DivergenceValue::Float(max.max(0.0)))
            }
        }
        Alpha::Finite(r) if P::EXACT && r.is_integer() => {
            let k = r.to_integer().to_u64().ok_or_else(|| Error::InvalidParameter("Rényi order too large".into()))?;
            let mut sum = Rational::zero();
            for (_, a, b) in rows.iter().filter(|(_, a, _)| !a.is_nil()) {
                let ratio = rat(a) / rat(b);
                sum += rat(a) * num_traits::pow(ratio, (k - 1) as usize);
            }
            let coef = Rational::new(BigInt::one(), BigInt::from(k - 1));
            Ok(DivergenceValue::Exact(LogSum::scaled_ln(&coef, &sum)))
        }
        _ => {
            let a = alpha.to_f64();
            // log-sum-exp of ln p·α + ln q·(1−α)
            let logs: Vec<f64> = rows
                .iter()
                .filter(|(_, x, y)| !x.is_nil() && !y.is_nil())
                .map(|(_, x, y)| a * x.ln() + (1.0 - a) * y.ln())
                .collect();
            if logs.is_empty() {
                return Ok(DivergenceValue::Infinite);
            }
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            Ok(DivergenceValue::Float((lse / (a - 1.0)).max(0.0)))
        }
    }
}

/// `Σ_x P(x) KL(P(·|x) ‖ Q(·|x))` for a joint `P` over `(x, y)`.
pub fn conditional_kl<X: Atom, Y: Atom, P: Prob>(
    joint_p: &FiniteDistribution<(X, Y), P>,
    q_cond: &BTreeMap<X, FiniteDistribution<Y, P>>,
) -> Result<DivergenceValue> {
    let marginal = joint_p.map(|(x, _)| x.clone());
    let mut total = DivergenceValue::zero();
    if !P::EXACT {
        total = DivergenceValue::Float(0.0);
    }
    for (x, px) in marginal.support() {
        let q = q_cond
            .get(x)
            .ok_or_else(|| Error::MismatchedUniverse(format!("no conditional Q(·|{x:?}) for an x in P's support")))?;
        let slice = conditional_slice(joint_p, x, px);
        let d = kl(&slice, q)?;
        total = total.add(&scale_by_prob(&d, px));
    }
    Ok(total)
}

fn scale_by_prob<P: Prob>(d: &DivergenceValue, p: &P) -> DivergenceValue {
    match p.as_rational() {
        Some(r) => d.scale(r),
        None => match d {
            DivergenceValue::Infinite => DivergenceValue::Infinite,
            other => DivergenceValue::Float(other.to_f64() * p.as_f64()),
        },
    }
}

/// `P(·|x)` from a joint.
pub fn conditional_slice<X: Atom, Y: Atom, P: Prob>(
    joint: &FiniteDistribution<(X, Y), P>,
    x: &X,
    px: &P,
) -> FiniteDistribution<Y, P> {
    let pairs: Vec<(Y, P)> = joint.iter().filter(|((a, _), _)| a == x).map(|((_, y), p)| (y.clone(), p.over(px))).collect();
    let (atoms, probs) = pairs.into_iter().unzip();
    FiniteDistribution::from_sorted_unchecked(atoms, probs)
}

/// Total variation, `½‖P − Q‖₁`.
pub fn tv<A: Atom, P: Prob>(p: &FiniteDistribution<A, P>, q: &FiniteDistribution<A, P>) -> Result<Real> {
    p.check_same_universe(q)?;
    let v = align(p, q).iter().fold(P::nil(), |t, (_, a, b)| t.plus(&a.minus(b)));
    Ok(Real::from_prob(&v))
}

/// Tightest `δ` with `P(O) ≤ e^ε Q(O) + δ` for all events `O`.
pub fn hockey_stick<A: Atom, P: Prob>(
    eps: &Eps,
    p: &FiniteDistribution<A, P>,
    q: &FiniteDistribution<A, P>,
) -> Result<Real> {
    p.check_same_universe(q)?;
    let rows = align(p, q);
    match eps {
        Eps::ExpRatio(r) if P::EXACT => {
            let mut d = Rational::zero();
            for (_, a, b) in &rows {
                let diff = rat(a) - r * rat(b);
                if diff.is_positive() {
                    d += diff;
                }
            }
            Ok(Real::Exact(d))
        }
        _ => {
            let f = eps.to_f64().exp();
            let d: f64 = rows.iter().map(|(_, a, b)| (a.as_f64() - f * b.as_f64()).max(0.0)).sum();
            Ok(Real::Float(d))
        }
    }
}

/// `P ≈_{ε,δ} Q` in both directions.
pub fn indistinguishable<A: Atom, P: Prob>(
    eps: &Eps,
    delta: &Real,
    p: &FiniteDistribution<A, P>,
    q: &FiniteDistribution<A, P>,
) -> Result<bool> {
    let tol = 1e-12;
    Ok(hockey_stick(eps, p, q)?.le(delta, tol) && hockey_stick(eps, q, p)?.le(delta, tol))
}

/// Pushforward of `P` through a channel `x ↦ F(·|x)`.
pub fn push_through<A: Atom, B: Atom, P: Prob>(
    p: &FiniteDistribution<A, P>,
    channel: impl Fn(&A) -> FiniteDistribution<B, P>,
) -> FiniteDistribution<B, P> {
    let mut map: BTreeMap<B, P> = BTreeMap::new();
    for (a, pa) in p.iter() {
        for (b, pb) in channel(a).iter() {
            let slot = map.entry(b.clone()).or_insert_with(P::nil);
            *slot = slot.plus(&pa.times(pb));
        }
    }
    let (atoms, probs) = map.into_iter().unzip();
    FiniteDistribution::from_sorted_unchecked(atoms, probs)
}

/// Joint `P(x)·Q(y|x)`.
pub fn joint_from<X: Atom, Y: Atom, P: Prob>(
    marginal: &FiniteDistribution<X, P>,
    cond: &BTreeMap<X, FiniteDistribution<Y, P>>,
) -> Result<FiniteDistribution<(X, Y), P>> {
    let mut pairs = Vec::new();
    for (x, px) in marginal.iter() {
        let c = cond.get(x).ok_or_else(|| Error::MismatchedUniverse(format!("no conditional for {x:?}")))?;
        for (y, py) in c.iter() {
            pairs.push(((x.clone(), y.clone()), px.times(py)));
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let (atoms, probs) = pairs.into_iter().unzip();
    Ok(FiniteDistribution::from_sorted_unchecked(atoms, probs))
}
