//! Domains, hypotheses, classes, samples and losses.
//!
//! Points are indices `0..n`. Builtin classes follow the usual convention of
//! naming points `1..=n`, so point index `i` stands for the value `i + 1`
//! (e.g. the threshold `1[x > k]` labels index `i` with 1 iff `i >= k`).

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::prob::{Prob, Rational};

pub const MAX_DOMAIN: usize = 64;
/// Largest domain whose full function universe may be enumerated.
pub const FULL_UNIVERSE_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Domain {
    size: usize,
}

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size > MAX_DOMAIN {
            return Err(Error::InvalidDomain(size));
        }
        Ok(Domain { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mask(&self) -> u64 {
        if self.size == 64 {
            u64::MAX
        } else {
            (1u64 << self.size) - 1
        }
    }

    /// Every function on the domain, in canonical order.
    pub fn all_functions(&self) -> Result<Vec<Hypothesis>> {
        self.check_enumerable()?;
        let mut all: Vec<Hypothesis> =
            (0..(1u64 << self.size)).map(|b| Hypothesis { bits: b, len: self.size as u8 }).collect();
        all.sort();
        Ok(all)
    }

    pub fn check_enumerable(&self) -> Result<()> {
        if self.size > FULL_UNIVERSE_LIMIT {
            return Err(Error::DomainTooLarge { size: self.size, limit: FULL_UNIVERSE_LIMIT });
        }
        Ok(())
    }

    /// All `2n` labeled examples.
    pub fn examples(&self) -> Vec<Example> {
        let mut v = Vec::with_capacity(2 * self.size);
        for x in 0..self.size as u32 {
            v.push(Example::new(x, false));
            v.push(Example::new(x, true));
        }
        v
    }
}

/// A boolean function on a domain of at most 64 points.
///
/// Ordered lexicographically by its 0/1 string (point 0 first).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    bits: u64,
    len: u8,
}

impl Hypothesis {
    pub fn new(len: usize, bits: u64) -> Result<Self> {
        let d = Domain::new(len)?;
        if bits & !d.mask() != 0 {
            return Err(Error::InvalidParameter(format!("bits {bits:#x} exceed domain of size {len}")));
        }
        Ok(Hypothesis { bits, len: len as u8 })
    }

    pub(crate) fn from_raw(len: usize, bits: u64) -> Self {
        Hypothesis { bits, len: len as u8 }
    }

    pub fn from_labels(labels: &[bool]) -> Result<Self> {
        let mut bits = 0u64;
        for (i, &l) in labels.iter().enumerate() {
            if l {
                bits |= 1 << i;
            }
        }
        Hypothesis::new(labels.len(), bits)
    }

    pub fn zeros(len: usize) -> Self {
        Hypothesis { bits: 0, len: len as u8 }
    }

    pub fn ones(len: usize) -> Self {
        Hypothesis { bits: Domain { size: len }.mask(), len: len as u8 }
    }

    /// `1[x > k]` with points named `1..=len`.
    pub fn threshold(len: usize, k: usize) -> Self {
        let mask = Domain { size: len }.mask();
        let bits = if k >= 64 { 0 } else { (mask >> k) << k };
        Hypothesis { bits: bits & mask, len: len as u8 }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn label(&self, x: u32) -> bool {
        (self.bits >> x) & 1 == 1
    }

    pub fn with_label(&self, x: u32, y: bool) -> Self {
        let bits = if y { self.bits | (1 << x) } else { self.bits & !(1 << x) };
        Hypothesis { bits, len: self.len }
    }

    pub fn complement(&self) -> Self {
        Hypothesis { bits: !self.bits & Domain { size: self.len() }.mask(), len: self.len }
    }

    pub fn agrees(&self, e: &Example) -> bool {
        self.label(e.x) == e.y
    }

    pub fn render(&self) -> String {
        (0..self.len as u32).map(|i| if self.label(i) { '1' } else { '0' }).collect()
    }
}

impl Ord for Hypothesis {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.bits ^ other.bits;
        let by_bits = if diff == 0 {
            Ordering::Equal
        } else if (self.bits >> diff.trailing_zeros()) & 1 == 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        };
        by_bits.then(self.len.cmp(&other.len))
    }
}

impl PartialOrd for Hypothesis {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.render())
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let labels = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("invalid hypothesis string '{s}'"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Hypothesis::from_labels(&labels)
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for Hypothesis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Atom for Hypothesis {
    fn universe_key(&self) -> u64 {
        self.len as u64
    }
}

/// One labeled example `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Example {
    pub x: u32,
    pub y: bool,
}

impl Example {
    pub fn new(x: u32, y: bool) -> Self {
        Example { x, y }
    }
}

impl Atom for Example {}

impl Atom for LabeledSample {}

#[derive(Clone)]
pub struct HypothesisClass {
    domain: Domain,
    members: Vec<Hypothesis>,
    index: HashMap<Hypothesis, usize>,
}

impl fmt::Debug for HypothesisClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HypothesisClass").field("n", &self.domain.size).field("members", &self.members).finish()
    }
}

impl PartialEq for HypothesisClass {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.members == other.members
    }
}

impl HypothesisClass {
    pub fn new(domain: Domain, members: Vec<Hypothesis>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyClass);
        }
        let mut index = HashMap::with_capacity(members.len());
        for (i, h) in members.iter().enumerate() {
            if h.len() != domain.size() {
                return Err(Error::LengthMismatch { expected: domain.size(), got: h.len() });
            }
            if index.insert(*h, i).is_some() {
                return Err(Error::DuplicateHypothesis(h.render()));
            }
        }
        Ok(HypothesisClass { domain, members, index })
    }

    /// `{1[x > k] : k = 1..=n}`.
    pub fn thresholds(n: usize) -> Result<Self> {
        let d = Domain::new(n)?;
        HypothesisClass::new(d, (1..=n).map(|k| Hypothesis::threshold(n, k)).collect())
    }

    /// All `2^n` functions.
    pub fn full(n: usize) -> Result<Self> {
        let d = Domain::new(n)?;
        if n > 16 {
            return Err(Error::DomainTooLarge { size: n, limit: 16 });
        }
        HypothesisClass::new(d, d.all_functions()?)
    }

    /// `{1[x = i] : i in domain}`.
    pub fn singletons(n: usize) -> Result<Self> {
        let d = Domain::new(n)?;
        HypothesisClass::new(d, (0..n).map(|i| Hypothesis::from_raw(n, 1 << i)).collect())
    }

    /// Singletons plus the all-zero function.
    pub fn points(n: usize) -> Result<Self> {
        let d = Domain::new(n)?;
        let mut members = vec![Hypothesis::zeros(n)];
        members.extend((0..n).map(|i| Hypothesis::from_raw(n, 1 << i)));
        HypothesisClass::new(d, members)
    }

    /// Parse `thresholds:n`, `full:n`, `singletons:n` or `points:n`.
    pub fn builtin(spec: &str) -> Result<Self> {
        let (kind, n) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("class spec '{spec}' is not kind:n")))?;
        let n: usize = n.trim().parse().map_err(|_| Error::Parse(format!("bad size in class spec '{spec}'")))?;
        match kind.trim() {
            "thresholds" => Self::thresholds(n),
            "full" => Self::full(n),
            "singletons" => Self::singletons(n),
            "points" => Self::points(n),
            other => Err(Error::Parse(format!("unknown builtin class '{other}'"))),
        }
    }

    /// One 0/1 string per line; blank lines and `#` comments ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut members = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let h: Hypothesis =
                line.parse().map_err(|e: Error| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if let Some(first) = members.first() {
                let first: &Hypothesis = first;
                if first.len() != h.len() {
                    return Err(Error::Parse(format!(
                        "line {}: length {} differs from first row length {}",
                        lineno + 1,
                        h.len(),
                        first.len()
                    )));
                }
            }
            members.push(h);
        }
        let n = members.first().map(|h| h.len()).ok_or(Error::EmptyClass)?;
        HypothesisClass::new(Domain::new(n)?, members)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for h in &self.members {
            s.push_str(&h.render());
            s.push('\n');
        }
        s
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, h: &Hypothesis) -> Option<usize> {
        self.index.get(h).copied()
    }

    pub fn contains(&self, h: &Hypothesis) -> bool {
        self.index.contains_key(h)
    }

    pub fn uniform_prior(&self) -> FiniteDistribution<Hypothesis> {
        FiniteDistribution::uniform(self.members.clone()).expect("class is nonempty and distinct")
    }
}

/// An ordered sample; repeats and contradictory pairs are legal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledSample {
    pairs: Vec<Example>,
}

impl LabeledSample {
    pub fn new(domain: Domain, pairs: Vec<Example>) -> Result<Self> {
        for e in &pairs {
            if e.x as usize >= domain.size() {
                return Err(Error::PointOutOfRange { point: e.x, size: domain.size() });
            }
        }
        Ok(LabeledSample { pairs })
    }

    pub fn empty() -> Self {
        LabeledSample { pairs: Vec::new() }
    }

    pub(crate) fn from_pairs_unchecked(pairs: Vec<Example>) -> Self {
        LabeledSample { pairs }
    }

    /// The sample `h` labels on the given points.
    pub fn labeled_by(h: &Hypothesis, points: &[u32]) -> Self {
        LabeledSample { pairs: points.iter().map(|&x| Example::new(x, h.label(x))).collect() }
    }

    pub fn pairs(&self) -> &[Example] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sorted distinct pairs.
    pub fn distinct(&self) -> Vec<Example> {
        let set: BTreeSet<Example> = self.pairs.iter().copied().collect();
        set.into_iter().collect()
    }

    pub fn distinct_sample(&self) -> LabeledSample {
        LabeledSample { pairs: self.distinct() }
    }

    /// `(mask, values)` of the labels the sample pins down, or `None` when it
    /// labels some point both ways.
    pub fn constraints(&self) -> Option<(u64, u64)> {
        let mut mask = 0u64;
        let mut values = 0u64;
        for e in &self.pairs {
            let bit = 1u64 << e.x;
            let v = if e.y { bit } else { 0 };
            if mask & bit != 0 {
                if values & bit != v {
                    return None;
                }
            } else {
                mask |= bit;
                values |= v;
            }
        }
        Some((mask, values))
    }

    pub fn is_consistent_with(&self, h: &Hypothesis) -> bool {
        self.pairs.iter().all(|e| h.agrees(e))
    }

    pub fn push(&mut self, e: Example) {
        self.pairs.push(e);
    }

    /// CSV rows `point,label`; an optional `point,label` header is skipped.
    pub fn from_csv(domain: Domain, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line == "point,label") {
                continue;
            }
            let err = || Error::Parse(format!("line {}: expected 'point,label', got '{line}'", lineno + 1));
            let (p, l) = line.split_once(',').ok_or_else(err)?;
            let x: u32 = p.trim().parse().map_err(|_| err())?;
            let y = match l.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(err()),
            };
            pairs.push(Example::new(x, y));
        }
        LabeledSample::new(domain, pairs)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("point,label\n");
        for e in &self.pairs {
            s.push_str(&format!("{},{}\n", e.x, e.y as u8));
        }
        s
    }
}

/// A population over labeled examples.
pub type PopulationDistribution<P = Rational> = FiniteDistribution<Example, P>;

pub fn empirical_loss(sample: &LabeledSample, h: &Hypothesis) -> Result<Rational> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let wrong = sample.pairs().iter().filter(|e| !h.agrees(e)).count();
    Ok(Rational::new(BigInt::from(wrong), BigInt::from(sample.len())))
}

pub fn population_loss<P: Prob>(pop: &PopulationDistribution<P>, h: &Hypothesis) -> P {
    let mut total = P::nil();
    for (e, p) in pop.iter() {
        if !h.agrees(e) {
            total = total.plus(p);
        }
    }
    total
}

/// First class member (in class order) with zero population loss.
pub fn is_realizable<P: Prob>(pop: &PopulationDistribution<P>, class: &HypothesisClass) -> Option<Hypothesis> {
    let support: Vec<Example> = pop.iter().filter(|(_, p)| !p.is_nil()).map(|(e, _)| *e).collect();
    class.members().iter().copied().find(|h| support.iter().all(|e| h.agrees(e)))
}

/// Where consistent hypotheses are drawn from.
#[derive(Debug, Clone)]
pub enum Universe {
    Full(Domain),
    Class(HypothesisClass),
}

impl Universe {
    pub fn domain(&self) -> Domain {
        match self {
            Universe::Full(d) => *d,
            Universe::Class(c) => c.domain(),
        }
    }

    pub fn hypotheses(&self) -> Result<Vec<Hypothesis>> {
        match self {
            Universe::Full(d) => d.all_functions(),
            Universe::Class(c) => Ok(c.members().to_vec()),
        }
    }
}

/// `cons(S)` within a universe.
#[derive(Debug, Clone, PartialEq)]
pub enum ConsistentSet {
    /// Functions agreeing with `values` on `fixed`; other bits free.
    Product { domain: Domain, fixed: u64, values: u64 },
    Members(Vec<Hypothesis>),
}

impl ConsistentSet {
    pub fn contains(&self, h: &Hypothesis) -> bool {
        match self {
            ConsistentSet::Product { fixed, values, .. } => h.bits() & fixed == *values,
            ConsistentSet::Members(v) => v.binary_search(h).is_ok(),
        }
    }

    pub fn count(&self) -> u128 {
        match self {
            ConsistentSet::Product { domain, fixed, .. } => 1u128 << (domain.size() - fixed.count_ones() as usize),
            ConsistentSet::Members(v) => v.len() as u128,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn free_mask(&self) -> Option<u64> {
        match self {
            ConsistentSet::Product { domain, fixed, .. } => Some(domain.mask() & !fixed),
            ConsistentSet::Members(_) => None,
        }
    }

    /// Sorted members.
    pub fn enumerate(&self) -> Result<Vec<Hypothesis>> {
        match self {
            ConsistentSet::Product { domain, fixed, values } => {
                domain.check_enumerable()?;
                let free = domain.mask() & !fixed;
                let mut out = Vec::with_capacity(1 << free.count_ones());
                // iterate over subsets of the free mask
                let mut sub = 0u64;
                loop {
                    out.push(Hypothesis::from_raw(domain.size(), values | sub));
                    if sub == free {
                        break;
                    }
                    sub = (sub.wrapping_sub(free)) & free;
                }
                out.sort();
                Ok(out)
            }
            ConsistentSet::Members(v) => Ok(v.clone()),
        }
    }
}

pub fn consistent_set(sample: &LabeledSample, universe: &Universe) -> Result<ConsistentSet> {
    match universe {
        Universe::Full(d) => {
            d.check_enumerable()?;
            match sample.constraints() {
                Some((fixed, values)) => Ok(ConsistentSet::Product { domain: *d, fixed, values }),
                None => Ok(ConsistentSet::Members(Vec::new())),
            }
        }
        Universe::Class(c) => {
            let mut v: Vec<Hypothesis> =
                c.members().iter().copied().filter(|h| sample.is_consistent_with(h)).collect();
            v.sort();
            Ok(ConsistentSet::Members(v))
        }
    }
}

/// Sum of masses of the hypotheses in `cons(S)`.
pub fn consistent_mass<P: Prob>(dist: &FiniteDistribution<Hypothesis, P>, sample: &LabeledSample) -> P {
    let mut total = P::nil();
    match sample.constraints() {
        None => total,
        Some((fixed, values)) => {
            for (h, p) in dist.iter() {
                if h.bits() & fixed == values {
                    total = total.plus(p);
                }
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::rational;

    fn ex(x: u32, y: u8) -> Example {
        Example::new(x, y == 1)
    }

    #[test]
    fn hypothesis_order_is_lexicographic() {
        let mut v: Vec<Hypothesis> = ["011", "100", "000", "010", "111"].iter().map(|s| s.parse().unwrap()).collect();
        v.sort();
        let r: Vec<String> = v.iter().map(|h| h.render()).collect();
        assert_eq!(r, ["000", "010", "011", "100", "111"]);
    }

    #[test]
    fn threshold_encoding() {
        assert_eq!(Hypothesis::threshold(4, 1).render(), "0111");
        assert_eq!(Hypothesis::threshold(4, 4).render(), "0000");
        let t = HypothesisClass::thresholds(4).unwrap();
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn empirical_loss_examples() {
        let s = LabeledSample::new(Domain::new(4).unwrap(), vec![ex(0, 0), ex(2, 1), ex(2, 0)]).unwrap();
        // 1[x > 2] with points named 1..=4: indices 0 and 2 are the values 1 and 3
        let h = Hypothesis::threshold(4, 2);
        assert_eq!(empirical_loss(&s, &h).unwrap(), rational(1, 3));
        let agree = LabeledSample::labeled_by(&h, &[0, 1, 3]);
        assert_eq!(empirical_loss(&agree, &h).unwrap(), rational(0, 1));
        assert_eq!(empirical_loss(&agree, &h.complement()).unwrap(), rational(1, 1));
        assert_eq!(empirical_loss(&LabeledSample::empty(), &h), Err(Error::EmptySample));
    }

    #[test]
    fn population_loss_examples() {
        let pop = FiniteDistribution::new(vec![ex(0, 1), ex(1, 0)], vec![rational(7, 10), rational(3, 10)]).unwrap();
        assert_eq!(population_loss(&pop, &Hypothesis::zeros(2)), rational(7, 10));
        let sym: PopulationDistribution = FiniteDistribution::uniform(vec![ex(1, 0), ex(1, 1)]).unwrap();
        for h in Domain::new(2).unwrap().all_functions().unwrap() {
            assert_eq!(population_loss(&sym, &h), rational(1, 2));
        }
    }

    #[test]
    fn realizability_examples() {
        let t = HypothesisClass::thresholds(4).unwrap();
        let pop: PopulationDistribution = FiniteDistribution::uniform(vec![ex(0, 0), ex(3, 1)]).unwrap();
        assert_eq!(is_realizable(&pop, &t), Some(Hypothesis::threshold(4, 1)));
        let bad: PopulationDistribution = FiniteDistribution::uniform(vec![ex(2, 0), ex(2, 1)]).unwrap();
        assert_eq!(is_realizable(&bad, &t), None);
    }

    #[test]
    fn consistent_set_examples() {
        let d = Domain::new(3).unwrap();
        let s = LabeledSample::new(d, vec![ex(0, 1)]).unwrap();
        let c = consistent_set(&s, &Universe::Full(d)).unwrap();
        assert_eq!(c.count(), 4);
        assert_eq!(c.free_mask(), Some(0b110));
        assert_eq!(c.enumerate().unwrap().len(), 4);
        let all = consistent_set(&LabeledSample::empty(), &Universe::Full(d)).unwrap();
        assert_eq!(all.count(), 8);
        let h: Hypothesis = "101".parse().unwrap();
        let one = consistent_set(&LabeledSample::labeled_by(&h, &[0, 1, 2]), &Universe::Full(d)).unwrap();
        assert_eq!(one.enumerate().unwrap(), vec![h]);
        let big = Domain::new(30).unwrap();
        assert!(matches!(consistent_set(&s, &Universe::Full(big)), Err(Error::DomainTooLarge { .. })));
    }

    #[test]
    fn contradictory_sample_has_empty_consistent_set() {
        let d = Domain::new(2).unwrap();
        let s = LabeledSample::new(d, vec![ex(1, 0), ex(1, 1)]).unwrap();
        assert!(consistent_set(&s, &Universe::Full(d)).unwrap().is_empty());
    }

    #[test]
    fn text_round_trips() {
        let c = HypothesisClass::thresholds(5).unwrap();
        assert_eq!(HypothesisClass::from_text(&c.to_text()).unwrap(), c);
        let d = Domain::new(5).unwrap();
        let s = LabeledSample::new(d, vec![ex(4, 1), ex(0, 0)]).unwrap();
        assert_eq!(LabeledSample::from_csv(d, &s.to_csv()).unwrap(), s);
        assert!(HypothesisClass::from_text("01\n011\n").is_err());
        assert!(LabeledSample::from_csv(d, "7,1").is_err());
    }
}
