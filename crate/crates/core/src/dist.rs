//! Finite probability distributions and harmonic mixtures.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::prob::{format_rational, parse_rational, LogProb, Prob, Rational};

/// Seeded generator used everywhere randomness is needed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Something a distribution can be over.
pub trait Atom: Clone + Ord + fmt::Debug + Send + Sync + 'static {
    /// Atoms with different keys live in different universes.
    fn universe_key(&self) -> u64 {
        0
    }
}

impl Atom for bool {}
impl Atom for u32 {}
impl Atom for u64 {}
impl Atom for usize {}
impl Atom for String {}
impl<A: Atom, B: Atom> Atom for (A, B) {
    fn universe_key(&self) -> u64 {
        self.0.universe_key().wrapping_mul(1_000_003).wrapping_add(self.1.universe_key())
    }
}
impl<A: Atom> Atom for Vec<A> {
    fn universe_key(&self) -> u64 {
        self.iter().fold(self.len() as u64, |k, a| k.wrapping_mul(31).wrapping_add(a.universe_key()))
    }
}

/// Probability vector over sorted, distinct atoms. Zero-mass atoms may be
/// kept so two distributions can share an explicit universe.
#[derive(Clone, PartialEq)]
pub struct FiniteDistribution<A: Atom, P: Prob = Rational> {
    atoms: Vec<A>,
    probs: Vec<P>,
}

impl<A: Atom, P: Prob> fmt::Debug for FiniteDistribution<A, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.atoms.iter().zip(self.probs.iter().map(|p| p.render()))).finish()
    }
}

fn check_nonnegative<P: Prob>(p: &P) -> Result<()> {
    let ok = match p.as_rational() {
        Some(r) => !r.is_negative(),
        None => !(p.as_f64() < 0.0 || p.as_f64().is_nan()),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::NegativeProbability(p.render()))
    }
}

impl<A: Atom, P: Prob> FiniteDistribution<A, P> {
    pub fn new(atoms: Vec<A>, probs: Vec<P>) -> Result<Self> {
        if atoms.len() != probs.len() {
            return Err(Error::InvalidParameter(format!("{} atoms but {} probabilities", atoms.len(), probs.len())));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("distribution needs at least one atom".into()));
        }
        let mut pairs: Vec<(A, P)> = atoms.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidParameter(format!("duplicate atom {:?}", w[0].0)));
            }
        }
        let key = pairs[0].0.universe_key();
        if pairs.iter().any(|(a, _)| a.universe_key() != key) {
            return Err(Error::MismatchedUniverse("atoms from different universes".into()));
        }
        let mut total = P::nil();
        for (_, p) in &pairs {
            check_nonnegative(p)?;
            total = total.plus(p);
        }
        if !P::is_normalized(&total) {
            return Err(Error::NotNormalized(total.render()));
        }
        let (atoms, probs) = pairs.into_iter().unzip();
        Ok(FiniteDistribution { atoms, probs })
    }

    /// Construction without the normalization check, for internal results
    /// that are normalized by construction up to float rounding.
    pub(crate) fn from_sorted_unchecked(atoms: Vec<A>, probs: Vec<P>) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0] < w[1]));
        FiniteDistribution { atoms, probs }
    }

    /// Normalize nonnegative weights; duplicate atoms are merged.
    pub fn from_weights(pairs: impl IntoIterator<Item = (A, P)>) -> Result<Self> {
        let mut map: BTreeMap<A, P> = BTreeMap::new();
        for (a, w) in pairs {
            check_nonnegative(&w)?;
            let slot = map.entry(a).or_insert_with(P::nil);
            *slot = slot.plus(&w);
        }
        let total = map.values().fold(P::nil(), |t, p| t.plus(p));
        if total.is_nil() {
            return Err(Error::NotNormalized("0".into()));
        }
        let (atoms, probs): (Vec<A>, Vec<P>) = map.into_iter().map(|(a, p)| (a, p.over(&total))).unzip();
        Ok(FiniteDistribution { atoms, probs })
    }

    /// Like [`FiniteDistribution::from_weights`] but the weights must already sum to one.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (A, P)>) -> Result<Self> {
        let mut map: BTreeMap<A, P> = BTreeMap::new();
        for (a, w) in pairs {
            let slot = map.entry(a).or_insert_with(P::nil);
            *slot = slot.plus(&w);
        }
        let (atoms, probs) = map.into_iter().unzip();
        Self::new(atoms, probs)
    }

    pub fn point_mass(a: A) -> Self {
        FiniteDistribution { atoms: vec![a], probs: vec![P::certain()] }
    }

    pub fn uniform(atoms: Vec<A>) -> Result<Self> {
        let n = atoms.len() as u64;
        if n == 0 {
            return Err(Error::InvalidParameter("uniform over no atoms".into()));
        }
        let probs = vec![P::from_ratio(1, n); atoms.len()];
        let mut pairs: Vec<(A, P)> = atoms.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate atom in uniform distribution".into()));
        }
        let (atoms, probs) = pairs.into_iter().unzip();
        Ok(FiniteDistribution { atoms, probs })
    }

    pub fn atoms(&self) -> &[A] {
        &self.atoms
    }

    pub fn probs(&self) -> &[P] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, &P)> {
        self.atoms.iter().zip(self.probs.iter())
    }

    /// Atoms with nonzero mass.
    pub fn support(&self) -> impl Iterator<Item = (&A, &P)> {
        self.iter().filter(|(_, p)| !p.is_nil())
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| !p.is_nil()).count()
    }

    pub fn mass(&self, index: usize) -> Result<&P> {
        self.probs.get(index).ok_or(Error::IndexOutOfRange { index, len: self.probs.len() })
    }

    pub fn index_of(&self, a: &A) -> Option<usize> {
        self.atoms.binary_search(a).ok()
    }

    /// Mass of an atom; zero when absent.
    pub fn prob_of(&self, a: &A) -> P {
        match self.index_of(a) {
            Some(i) => self.probs[i].clone(),
            None => P::nil(),
        }
    }

    pub fn total(&self) -> P {
        self.probs.iter().fold(P::nil(), |t, p| t.plus(p))
    }

    /// Drop zero-mass atoms.
    pub fn trimmed(&self) -> Self {
        let (atoms, probs) = self.support().map(|(a, p)| (a.clone(), p.clone())).unzip();
        FiniteDistribution { atoms, probs }
    }

    pub fn universe_key(&self) -> u64 {
        self.atoms[0].universe_key()
    }

    pub fn check_same_universe<B: Prob>(&self, other: &FiniteDistribution<A, B>) -> Result<()> {
        if self.universe_key() != other.universe_key() {
            return Err(Error::MismatchedUniverse(format!("{:?} vs {:?}", self.atoms[0], other.atoms[0])));
        }
        Ok(())
    }

    /// Pushforward under `f`.
    pub fn map<B: Atom>(&self, f: impl Fn(&A) -> B) -> FiniteDistribution<B, P> {
        let mut map: BTreeMap<B, P> = BTreeMap::new();
        for (a, p) in self.iter() {
            let slot = map.entry(f(a)).or_insert_with(P::nil);
            *slot = slot.plus(p);
        }
        let (atoms, probs) = map.into_iter().unzip();
        FiniteDistribution { atoms, probs }
    }

    /// Conditional on an event; `None` if the event has zero mass.
    pub fn condition(&self, event: impl Fn(&A) -> bool) -> Option<Self> {
        let mut total = P::nil();
        let mut kept = Vec::new();
        for (a, p) in self.support() {
            if event(a) {
                total = total.plus(p);
                kept.push((a.clone(), p.clone()));
            }
        }
        if total.is_nil() {
            return None;
        }
        let (atoms, probs) = kept.into_iter().map(|(a, p)| (a, p.over(&total))).unzip();
        Some(FiniteDistribution { atoms, probs })
    }

    pub fn event_mass(&self, event: impl Fn(&A) -> bool) -> P {
        self.iter().filter(|(a, _)| event(a)).fold(P::nil(), |t, (_, p)| t.plus(p))
    }

    pub fn product<B: Atom>(&self, other: &FiniteDistribution<B, P>) -> FiniteDistribution<(A, B), P> {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for (a, p) in self.iter() {
            for (b, q) in other.iter() {
                atoms.push((a.clone(), b.clone()));
                probs.push(p.times(q));
            }
        }
        FiniteDistribution { atoms, probs }
    }

    pub fn convert<Q: Prob>(&self, f: impl Fn(&P) -> Q) -> FiniteDistribution<A, Q> {
        FiniteDistribution { atoms: self.atoms.clone(), probs: self.probs.iter().map(f).collect() }
    }

    pub fn to_f64(&self) -> FiniteDistribution<A, f64> {
        self.convert(|p| p.as_f64())
    }

    pub fn to_log(&self) -> FiniteDistribution<A, LogProb> {
        self.convert(|p| match p.as_rational() {
            Some(r) => LogProb::from_rational(r),
            None => LogProb(p.ln()),
        })
    }

    /// Inverse-CDF lookup of `u / 2^64` over the fixed atom order.
    pub fn cdf_index(&self, u: u64) -> usize {
        let last = self.probs.iter().rposition(|p| !p.is_nil()).unwrap_or(self.len() - 1);
        if P::EXACT {
            let target = Rational::new(BigInt::from(u), BigInt::one() << 64u32);
            let mut cum = Rational::zero();
            for (i, p) in self.probs.iter().enumerate().take(last) {
                cum += p.as_rational().expect("exact mode");
                if target < cum {
                    return i;
                }
            }
        } else {
            let target = u as f64 / 18446744073709551616.0;
            let mut cum = 0.0;
            for (i, p) in self.probs.iter().enumerate().take(last) {
                cum += p.as_f64();
                if target < cum {
                    return i;
                }
            }
        }
        last
    }

    pub fn sample_with<R: RngCore>(&self, rng: &mut R) -> &A {
        let u: u64 = rng.gen();
        &self.atoms[self.cdf_index(u)]
    }

    /// One draw, determined by `seed`.
    pub fn sample(&self, seed: u64) -> &A {
        self.sample_with(&mut rng_from_seed(seed))
    }
}

/// `{(a, p(a), q(a))}` over the union of both atom lists.
pub fn align<'a, A: Atom, P: Prob, Q: Prob>(
    p: &'a FiniteDistribution<A, P>,
    q: &'a FiniteDistribution<A, Q>,
) -> Vec<(&'a A, P, Q)> {
    let mut out = Vec::with_capacity(p.len().max(q.len()));
    let (mut i, mut j) = (0, 0);
    while i < p.len() || j < q.len() {
        if j == q.len() || (i < p.len() && p.atoms[i] < q.atoms[j]) {
            out.push((&p.atoms[i], p.probs[i].clone(), Q::nil()));
            i += 1;
        } else if i == p.len() || q.atoms[j] < p.atoms[i] {
            out.push((&q.atoms[j], P::nil(), q.probs[j].clone()));
            j += 1;
        } else {
            out.push((&p.atoms[i], p.probs[i].clone(), q.probs[j].clone()));
            i += 1;
            j += 1;
        }
    }
    out
}

/// `Σ w_i · D_i` for weights summing to one.
pub fn mixture<A: Atom, P: Prob>(parts: &[(P, &FiniteDistribution<A, P>)]) -> Result<FiniteDistribution<A, P>> {
    if parts.is_empty() {
        return Err(Error::InvalidParameter("empty mixture".into()));
    }
    let key = parts[0].1.universe_key();
    let mut map: BTreeMap<A, P> = BTreeMap::new();
    for (w, d) in parts {
        if d.universe_key() != key {
            return Err(Error::MismatchedUniverse("mixture components".into()));
        }
        for (a, p) in d.iter() {
            let slot = map.entry(a.clone()).or_insert_with(P::nil);
            *slot = slot.plus(&w.times(p));
        }
    }
    let (atoms, probs) = map.into_iter().unzip();
    Ok(FiniteDistribution { atoms, probs })
}

#[derive(Serialize, Deserialize)]
struct DistributionJson<A> {
    atoms: Vec<A>,
    probs: Vec<String>,
}

impl<A: Atom + Serialize> Serialize for FiniteDistribution<A, Rational> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionJson { atoms: self.atoms.clone(), probs: self.probs.iter().map(format_rational).collect() }
            .serialize(s)
    }
}

impl<'de, A: Atom + Deserialize<'de>> Deserialize<'de> for FiniteDistribution<A, Rational> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DistributionJson::<A>::deserialize(d)?;
        let probs = raw
            .probs
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        FiniteDistribution::new(raw.atoms, probs).map_err(serde::de::Error::custom)
    }
}

/// Precomputed inverse CDF; picks the same atom as [`FiniteDistribution::cdf_index`].
#[derive(Debug, Clone)]
pub struct CdfTable {
    bounds: Vec<u128>,
}

impl CdfTable {
    pub fn new<A: Atom>(d: &FiniteDistribution<A>) -> Self {
        // u < cum·2^64  ⇔  u < ⌈cum·2^64⌉ for integer u
        let last = d.probs.iter().rposition(|p| !p.is_nil()).unwrap_or(d.len() - 1);
        let scale = Rational::from_integer(BigInt::one() << 64u32);
        let mut cum = Rational::zero();
        let mut bounds = Vec::with_capacity(last);
        for p in &d.probs[..last] {
            cum += p;
            let c = (&cum * &scale).ceil().to_integer();
            bounds.push(u128::try_from(c).unwrap_or(u128::MAX));
        }
        CdfTable { bounds }
    }

    pub fn index(&self, u: u64) -> usize {
        self.bounds.partition_point(|&b| b <= u as u128)
    }

    pub fn sample_with<R: RngCore>(&self, rng: &mut R) -> usize {
        self.index(rng.gen())
    }
}

/// `z_L = Σ_{ℓ=1}^{L} 1/ℓ²`.
pub fn harmonic_z(l: usize) -> Rational {
    let mut z = Rational::zero();
    for i in 1..=l {
        z += Rational::new(BigInt::one(), BigInt::from(i * i));
    }
    z
}

/// Weight `1/(z_L ℓ²)` of component `ℓ`.
pub fn harmonic_weight(z_l: &Rational, ell: usize) -> Rational {
    (z_l * Rational::from_integer(BigInt::from(ell * ell))).recip()
}

/// `(1/z_L) Σ_{ℓ≤L} D_ℓ/ℓ²`, components indexed from 1.
#[derive(Debug, Clone)]
pub struct TruncatedHarmonicMixture<A: Atom, P: Prob = Rational> {
    components: Vec<FiniteDistribution<A, P>>,
    z_l: Rational,
}

impl<A: Atom, P: Prob> TruncatedHarmonicMixture<A, P> {
    pub fn new(components: Vec<FiniteDistribution<A, P>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("truncation L must be at least 1".into()));
        }
        let key = components[0].universe_key();
        if components.iter().any(|c| c.universe_key() != key) {
            return Err(Error::MismatchedUniverse("mixture components".into()));
        }
        let z_l = harmonic_z(components.len());
        Ok(TruncatedHarmonicMixture { components, z_l })
    }

    pub fn truncation(&self) -> usize {
        self.components.len()
    }

    pub fn z_l(&self) -> &Rational {
        &self.z_l
    }

    pub fn component(&self, ell: usize) -> Option<&FiniteDistribution<A, P>> {
        ell.checked_sub(1).and_then(|i| self.components.get(i))
    }

    pub fn weight(&self, ell: usize) -> Rational {
        harmonic_weight(&self.z_l, ell)
    }

    /// `1 − z_L/z` with `z = π²/6`.
    pub fn mass_deficit(&self) -> f64 {
        1.0 - crate::prob::rational_to_f64(&self.z_l) / (std::f64::consts::PI.powi(2) / 6.0)
    }

    pub fn flatten(&self) -> FiniteDistribution<A, P> {
        let weights: Vec<P> = (1..=self.truncation()).map(|l| P::from_rational(&self.weight(l))).collect();
        let parts: Vec<(P, &FiniteDistribution<A, P>)> = weights.into_iter().zip(self.components.iter()).collect();
        mixture(&parts).expect("components checked at construction")
    }
}

/// Mixture of the first `l` components with weights `1/(z_L ℓ²)`.
pub fn truncated_prior_mixture<A: Atom, P: Prob>(
    components: &[FiniteDistribution<A, P>],
    l: usize,
) -> Result<TruncatedHarmonicMixture<A, P>> {
    if l == 0 || l > components.len() {
        return Err(Error::InvalidParameter(format!("truncation {l} with {} components", components.len())));
    }
    TruncatedHarmonicMixture::new(components[..l].to_vec())
}
