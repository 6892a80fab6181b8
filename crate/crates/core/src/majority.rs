//! Coordinate-wise majority votes and the laws they induce.
//!
//! `maj(g₁,…,g_T)` labels a point 1 when at least `⌈T/2⌉` of the votes are 1,
//! so even-count ties go to label 1 on every coordinate.
//!
//! The law of the majority of independent draws is computed by the first
//! strategy that applies:
//! * **chain**: the union of supports is totally ordered pointwise, so the
//!   majority is an order statistic and each tail is a Poisson-binomial tail;
//! * **product**: every component has independent coordinates, so the
//!   majority has independent coordinates too;
//! * **enumeration** of all tuples under a budget.
//!
//! Monte Carlo is available separately with a TV confidence radius.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dist::{rng_from_seed, FiniteDistribution};
use crate::error::{Error, Result};
use crate::exec::{shard_seed, Executor};
use crate::prob::{Prob, Rational};
use crate::types::Hypothesis;

/// Human-readable statement of the tie rule, embedded in reports.
pub const TIE_RULE: &str = "even-count majority ties resolve to label 1 on every coordinate";

/// Largest number of free coordinates a product law is flattened over.
pub const PRODUCT_FLATTEN_LIMIT: u32 = 20;

/// Votes for label 1 needed out of `t`.
pub fn ones_needed(t: usize) -> usize {
    t.div_ceil(2)
}

pub fn majority(hs: &[Hypothesis]) -> Result<Hypothesis> {
    let first = hs.first().ok_or_else(|| Error::InvalidParameter("majority of no hypotheses".into()))?;
    let n = first.len();
    let need = ones_needed(hs.len());
    let mut bits = 0u64;
    for x in 0..n as u32 {
        let mut ones = 0;
        for h in hs {
            if h.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: h.len() });
            }
            ones += h.label(x) as usize;
        }
        if ones >= need {
            bits |= 1 << x;
        }
    }
    Ok(Hypothesis::from_raw(n, bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MajorityMethod {
    Identity,
    Chain,
    Product,
    Enumeration,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct MajorityLaw<P: Prob> {
    pub dist: FiniteDistribution<Hypothesis, P>,
    pub method: MajorityMethod,
    /// Monte Carlo only.
    pub trials: Option<u64>,
    /// TV radius at 99% confidence (Monte Carlo only).
    pub tv_radius: Option<f64>,
}

impl<P: Prob> MajorityLaw<P> {
    fn exact(dist: FiniteDistribution<Hypothesis, P>, method: MajorityMethod) -> Self {
        MajorityLaw { dist, method, trials: None, tv_radius: None }
    }

    pub fn is_exact(&self) -> bool {
        self.method != MajorityMethod::MonteCarlo
    }
}

/// Sorted chain if the atoms are totally ordered pointwise.
pub fn as_chain<'a>(atoms: impl IntoIterator<Item = &'a Hypothesis>) -> Option<Vec<Hypothesis>> {
    let mut v: Vec<Hypothesis> = atoms.into_iter().copied().collect();
    v.sort_by_key(|h| (h.bits().count_ones(), h.bits()));
    v.dedup();
    for w in v.windows(2) {
        if w[0].bits() & !w[1].bits() != 0 {
            return None;
        }
    }
    Some(v)
}

/// Per-coordinate `(P[h(x)=0], P[h(x)=1])` if the distribution is the product
/// of its marginals.
pub fn as_product(d: &FiniteDistribution<Hypothesis>) -> Option<Vec<(Rational, Rational)>> {
    let n = d.atoms()[0].len();
    let mut margins = vec![(Rational::zero(), Rational::zero()); n];
    for (h, p) in d.support() {
        for (x, m) in margins.iter_mut().enumerate() {
            if h.label(x as u32) {
                m.1 += p;
            } else {
                m.0 += p;
            }
        }
    }
    let free = margins.iter().filter(|(a, b)| !a.is_zero() && !b.is_zero()).count();
    if free >= 64 || d.support_size() as u64 != 1u64 << free {
        return None;
    }
    for (h, p) in d.support() {
        let mut q = Rational::one();
        for (x, m) in margins.iter().enumerate() {
            q *= if h.label(x as u32) { &m.1 } else { &m.0 };
        }
        if &q != p {
            return None;
        }
    }
    Some(margins)
}

/// `(P[K ≥ r], P[K < r])` for `K` a sum of independent Bernoullis given as
/// `(P[0], P[1])` pairs; both tails are summed directly.
pub fn poisson_binomial_tails<P: Prob>(coins: &[(P, P)], r: usize) -> (P, P) {
    let mut offset = 0usize;
    let mut uncertain: Vec<&(P, P)> = Vec::new();
    for c in coins {
        if c.0.is_nil() {
            offset += 1;
        } else if !c.1.is_nil() {
            uncertain.push(c);
        }
    }
    if offset >= r {
        return (P::certain(), P::nil());
    }
    let r = r - offset;
    if r > uncertain.len() {
        return (P::nil(), P::certain());
    }
    let mut dp: Vec<P> = vec![P::certain()];
    for (q0, q1) in uncertain {
        let mut next = vec![P::nil(); dp.len() + 1];
        for (k, v) in dp.iter().enumerate() {
            next[k] = next[k].plus(&v.times(q0));
            next[k + 1] = next[k + 1].plus(&v.times(q1));
        }
        dp = next;
    }
    let upper = dp[r..].iter().fold(P::nil(), |t, v| t.plus(v));
    let lower = dp[..r].iter().fold(P::nil(), |t, v| t.plus(v));
    (upper, lower)
}

/// `C(ℓ, j)` for `j = 0..=ℓ`.
pub fn binomial_row(ell: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(ell + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for j in 1..=ell {
        c = c * BigUint::from(ell - j + 1) / BigUint::from(j);
        row.push(c.clone());
    }
    row
}

/// `(P[Bin(ℓ,q) ≥ r], P[Bin(ℓ,q) < r])` from `(1−q, q)` given directly.
pub fn binomial_tails<P: Prob>(row: &[BigUint], q0: &P, q1: &P, r: usize) -> (P, P) {
    let ell = row.len() - 1;
    let mut upper = P::nil();
    let mut lower = P::nil();
    for (j, c) in row.iter().enumerate() {
        let term = P::from_biguint(c).times(&q1.powi(j as u64)).times(&q0.powi((ell - j) as u64));
        if j >= r {
            upper = upper.plus(&term);
        } else {
            lower = lower.plus(&term);
        }
    }
    (upper, lower)
}

/// Atom masses of an order statistic from its upper tails `S(c) = P[M ≥ c]`
/// and lower tails `F(c) = P[M < c]`, differencing on the smaller side.
fn chain_masses<P: Prob>(upper: &[P], lower: &[P]) -> Vec<P> {
    let k = upper.len();
    (0..k)
        .map(|c| {
            let (s_hi, f_hi) = if c + 1 < k { (upper[c + 1].clone(), lower[c + 1].clone()) } else { (P::nil(), P::certain()) };
            if upper[c].as_f64() <= 0.5 {
                upper[c].minus(&s_hi)
            } else {
                f_hi.minus(&lower[c])
            }
        })
        .collect()
}

fn flatten_product<P: Prob>(n: usize, coords: &[(P, P)]) -> Result<FiniteDistribution<Hypothesis, P>> {
    let mut base = 0u64;
    let mut free = Vec::new();
    for (x, (p0, p1)) in coords.iter().enumerate() {
        if p0.is_nil() {
            base |= 1 << x;
        } else if !p1.is_nil() {
            free.push(x);
        }
    }
    if free.len() as u32 > PRODUCT_FLATTEN_LIMIT {
        return Err(Error::BudgetExceeded { needed: 1u128 << free.len(), budget: 1u128 << PRODUCT_FLATTEN_LIMIT });
    }
    let mut pairs = Vec::with_capacity(1 << free.len());
    for sub in 0u64..(1u64 << free.len()) {
        let mut bits = base;
        let mut p = P::certain();
        for (i, &x) in free.iter().enumerate() {
            if (sub >> i) & 1 == 1 {
                bits |= 1 << x;
                p = p.times(&coords[x].1);
            } else {
                p = p.times(&coords[x].0);
            }
        }
        pairs.push((Hypothesis::from_raw(n, bits), p));
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let (atoms, probs) = pairs.into_iter().unzip();
    Ok(FiniteDistribution::from_sorted_unchecked(atoms, probs))
}

fn from_map<P: Prob>(map: BTreeMap<Hypothesis, P>) -> FiniteDistribution<Hypothesis, P> {
    let (atoms, probs) = map.into_iter().filter(|(_, p)| !p.is_nil()).unzip();
    FiniteDistribution::from_sorted_unchecked(atoms, probs)
}

fn check_components(components: &[&FiniteDistribution<Hypothesis>]) -> Result<usize> {
    let first = components.first().ok_or_else(|| Error::InvalidParameter("majority of no components".into()))?;
    let n = first.atoms()[0].len();
    for c in components {
        if c.atoms().iter().any(|h| h.len() != n) {
            return Err(Error::MismatchedUniverse("majority components over different domains".into()));
        }
    }
    Ok(n)
}

/// Law of `maj(g₁,…,g_T)` for independent `g_t ∼ components[t]`.
pub fn majority_of_independent<P: Prob>(
    components: &[&FiniteDistribution<Hypothesis>],
    budget: u128,
) -> Result<MajorityLaw<P>> {
    let n = check_components(components)?;
    let t = components.len();
    let need = ones_needed(t);
    if t == 1 {
        return Ok(MajorityLaw::exact(components[0].trimmed().convert(P::from_rational), MajorityMethod::Identity));
    }

    if let Some(chain) = as_chain(components.iter().flat_map(|c| c.support().map(|(h, _)| h))) {
        // per component, (P[g < chain[c]], P[g ≥ chain[c]]) for every c
        let k = chain.len();
        let coins: Vec<Vec<(P, P)>> = components
            .iter()
            .map(|comp| {
                let mut masses = vec![P::nil(); k];
                for (h, p) in comp.support() {
                    let i = chain.binary_search_by_key(&(h.bits().count_ones(), h.bits()), |g| (g.bits().count_ones(), g.bits()))
                        .expect("chain covers every support");
                    masses[i] = P::from_rational(p);
                }
                let mut below = vec![P::nil(); k];
                let mut above = vec![P::nil(); k];
                for c in 1..k {
                    below[c] = below[c - 1].plus(&masses[c - 1]);
                }
                above[k - 1] = masses[k - 1].clone();
                for c in (0..k - 1).rev() {
                    above[c] = above[c + 1].plus(&masses[c]);
                }
                below.into_iter().zip(above).collect()
            })
            .collect();
        let tails: Vec<(P, P)> = Executor::default().map(k, |c| {
            let col: Vec<(P, P)> = coins.iter().map(|v| v[c].clone()).collect();
            poisson_binomial_tails(&col, need)
        });
        let (upper, lower): (Vec<P>, Vec<P>) = tails.into_iter().unzip();
        let masses = chain_masses(&upper, &lower);
        let mut map = BTreeMap::new();
        for (h, p) in chain.into_iter().zip(masses) {
            map.insert(h, p);
        }
        return Ok(MajorityLaw::exact(from_map(map), MajorityMethod::Chain));
    }

    let products: Option<Vec<Vec<(Rational, Rational)>>> = components.iter().map(|c| as_product(c)).collect();
    if let Some(products) = products {
        let coords: Vec<(P, P)> = Executor::default().map(n, |x| {
            let col: Vec<(P, P)> =
                products.iter().map(|m| (P::from_rational(&m[x].0), P::from_rational(&m[x].1))).collect();
            let (one, zero) = poisson_binomial_tails(&col, need);
            (zero, one)
        });
        if let Ok(dist) = flatten_product(n, &coords) {
            return Ok(MajorityLaw::exact(dist, MajorityMethod::Product));
        }
    }

    enumerate_majority(components, budget).map(|d| MajorityLaw::exact(d, MajorityMethod::Enumeration))
}

fn enumerate_majority<P: Prob>(
    components: &[&FiniteDistribution<Hypothesis>],
    budget: u128,
) -> Result<FiniteDistribution<Hypothesis, P>> {
    let supports: Vec<Vec<(Hypothesis, P)>> =
        components.iter().map(|c| c.support().map(|(h, p)| (*h, P::from_rational(p))).collect()).collect();
    let mut needed: u128 = 1;
    for s in &supports {
        needed = needed.saturating_mul(s.len() as u128);
    }
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let t = supports.len();
    let mut map: BTreeMap<Hypothesis, P> = BTreeMap::new();
    let mut idx = vec![0usize; t];
    let mut tuple: Vec<Hypothesis> = supports.iter().map(|s| s[0].0).collect();
    loop {
        let mut p = P::certain();
        for (s, &i) in supports.iter().zip(&idx) {
            p = p.times(&s[i].1);
        }
        let m = majority(&tuple)?;
        let slot = map.entry(m).or_insert_with(P::nil);
        *slot = slot.plus(&p);
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == t {
                return Ok(from_map(map));
            }
            idx[pos] += 1;
            if idx[pos] < supports[pos].len() {
                tuple[pos] = supports[pos][idx[pos]].0;
                break;
            }
            idx[pos] = 0;
            tuple[pos] = supports[pos][0].0;
            pos += 1;
        }
    }
}

/// Law of the majority of `ell` i.i.d. draws from `prior`.
///
/// Exact for chains and products at any `ell` (closed-form binomial tails);
/// otherwise enumerates `|support|^ell` tuples under `budget`.
pub fn majority_push<P: Prob>(
    prior: &FiniteDistribution<Hypothesis>,
    ell: usize,
    budget: u128,
) -> Result<MajorityLaw<P>> {
    if ell == 0 {
        return Err(Error::InvalidParameter("majority of zero draws".into()));
    }
    if ell == 1 || prior.support_size() == 1 {
        return Ok(MajorityLaw::exact(prior.trimmed().convert(P::from_rational), MajorityMethod::Identity));
    }
    let n = prior.atoms()[0].len();
    let need = ones_needed(ell);
    let row = binomial_row(ell);
    if let Some(chain) = as_chain(prior.support().map(|(h, _)| h)) {
        let k = chain.len();
        let masses: Vec<P> = chain.iter().map(|h| P::from_rational(&prior.prob_of(h))).collect();
        let mut below = vec![P::nil(); k];
        let mut above = vec![P::nil(); k];
        for c in 1..k {
            below[c] = below[c - 1].plus(&masses[c - 1]);
        }
        above[k - 1] = masses[k - 1].clone();
        for c in (0..k - 1).rev() {
            above[c] = above[c + 1].plus(&masses[c]);
        }
        let tails: Vec<(P, P)> = Executor::default().map(k, |c| {
            if c == 0 {
                (P::certain(), P::nil())
            } else {
                binomial_tails(&row, &below[c], &above[c], need)
            }
        });
        let (upper, lower): (Vec<P>, Vec<P>) = tails.into_iter().unzip();
        let masses = chain_masses(&upper, &lower);
        let mut map = BTreeMap::new();
        for (h, p) in chain.into_iter().zip(masses) {
            map.insert(h, p);
        }
        return Ok(MajorityLaw::exact(from_map(map), MajorityMethod::Chain));
    }
    if let Some(margins) = as_product(prior) {
        let coords: Vec<(P, P)> = Executor::default().map(n, |x| {
            let (q0, q1) = (P::from_rational(&margins[x].0), P::from_rational(&margins[x].1));
            let (one, zero) = binomial_tails(&row, &q0, &q1, need);
            (zero, one)
        });
        if let Ok(dist) = flatten_product(n, &coords) {
            return Ok(MajorityLaw::exact(dist, MajorityMethod::Product));
        }
    }
    let comps = vec![prior; ell];
    let needed = (prior.support_size() as u128).saturating_pow(ell as u32).saturating_mul(ell as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    enumerate_majority(&comps, u128::MAX).map(|d| MajorityLaw::exact(d, MajorityMethod::Enumeration))
}

/// Radius `r` with `TV(empirical, truth) ≤ r` at 99% confidence for `trials`
/// samples of a law on at most `k` atoms.
pub fn mc_tv_radius(k: usize, trials: u64) -> f64 {
    let n = trials as f64;
    0.5 * (k as f64 / n).sqrt() + ((100f64).ln() / (2.0 * n)).sqrt()
}

/// Empirical law of `maj` over independent draws from `components`.
pub fn majority_monte_carlo(
    components: &[&FiniteDistribution<Hypothesis>],
    trials: u64,
    seed: u64,
    exec: Executor,
) -> Result<MajorityLaw<f64>> {
    let n = check_components(components)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least one trial".into()));
    }
    const SHARD: u64 = 4096;
    let shards = trials.div_ceil(SHARD) as usize;
    let counts: Vec<BTreeMap<Hypothesis, u64>> = exec.map(shards, |s| {
        let mut rng = rng_from_seed(shard_seed(seed, s));
        let lo = s as u64 * SHARD;
        let hi = (lo + SHARD).min(trials);
        let mut local = BTreeMap::new();
        let mut tuple = Vec::with_capacity(components.len());
        for _ in lo..hi {
            tuple.clear();
            for c in components {
                tuple.push(*c.sample_with(&mut rng));
            }
            let m = majority(&tuple).expect("components checked");
            *local.entry(m).or_insert(0u64) += 1;
        }
        local
    });
    let mut total: BTreeMap<Hypothesis, u64> = BTreeMap::new();
    for c in counts {
        for (h, k) in c {
            *total.entry(h).or_insert(0) += k;
        }
    }
    let mut possible: u128 = 1;
    for c in components {
        possible = possible.saturating_mul(c.support_size() as u128);
    }
    let k = possible.min(1u128 << n.min(100)).min(trials as u128).max(total.len() as u128) as usize;
    let (atoms, probs) = total.into_iter().map(|(h, c)| (h, c as f64 / trials as f64)).unzip();
    Ok(MajorityLaw {
        dist: FiniteDistribution::from_sorted_unchecked(atoms, probs),
        method: MajorityMethod::MonteCarlo,
        trials: Some(trials),
        tv_radius: Some(mc_tv_radius(k, trials)),
    })
}

/// Monte Carlo version of [`majority_push`].
pub fn majority_push_monte_carlo(
    prior: &FiniteDistribution<Hypothesis>,
    ell: usize,
    trials: u64,
    seed: u64,
    exec: Executor,
) -> Result<MajorityLaw<f64>> {
    if ell == 0 {
        return Err(Error::InvalidParameter("majority of zero draws".into()));
    }
    let comps = vec![prior; ell];
    majority_monte_carlo(&comps, trials, seed, exec)
}
