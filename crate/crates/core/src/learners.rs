//! Learning rules as exact posterior maps with seeded samplers.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::dist::{rng_from_seed, CdfTable};
use crate::divergences::{kl, DivergenceValue, Eps};
use crate::error::{Error, Result};
use crate::exact::LogSum;
use crate::exec::{shard_seed, Executor};
use crate::prob::{format_rational, rational_to_f64, Rational};
use crate::types::{
    consistent_mass, population_loss, Domain, Example, Hypothesis, HypothesisClass, LabeledSample,
    PopulationDistribution,
};
use crate::FiniteDistribution;

/// Fallback rejection cap when no consistency floor is known.
pub const DEFAULT_DRAW_CAP: u64 = 1 << 20;

/// Declared `(k, γ, b)` of a weak learner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakParams {
    pub k: usize,
    #[serde(serialize_with = "ser_opt_rational")]
    pub gamma: Option<Rational>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub b: Option<Rational>,
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&format_rational(r)),
        None => s.serialize_none(),
    }
}

/// `A: samples → Δ(functions)` with a seeded sampler.
///
/// `draw(S, seed)` is `A(S; r)` with internal randomness `r` fixed by the seed,
/// so two calls with the same seed share their coins.
pub trait LearningRule: Send + Sync {
    fn name(&self) -> String;

    fn domain(&self) -> Domain;

    fn posterior(&self, sample: &LabeledSample) -> Result<FiniteDistribution<Hypothesis>>;

    fn draw(&self, sample: &LabeledSample, seed: u64) -> Result<Hypothesis> {
        Ok(*self.posterior(sample)?.sample(seed))
    }

    fn is_interpolating(&self) -> bool {
        false
    }

    /// Prior the rule is measured against, if it has one.
    fn prior(&self) -> Option<&FiniteDistribution<Hypothesis>> {
        None
    }

    fn weak_params(&self) -> Option<&WeakParams> {
        None
    }

    /// `KL(posterior(S) ‖ prior)`.
    fn kl_to_prior(&self, sample: &LabeledSample) -> Result<DivergenceValue> {
        let prior = self.prior().ok_or_else(|| Error::PosteriorUnavailable(format!("{} has no prior", self.name())))?;
        kl(&self.posterior(sample)?, prior)
    }

    /// Finite law of the internal coins, when `A(S; r)` factors through one.
    fn coins(&self) -> Option<FiniteDistribution<u64>> {
        None
    }

    fn decide(&self, _sample: &LabeledSample, _coin: u64) -> Result<Hypothesis> {
        Err(Error::NotSeedSplittable(self.name()))
    }

    /// `Pr_r[A(S₁; r) = A(S₂; r)]`.
    fn agreement(&self, s1: &LabeledSample, s2: &LabeledSample) -> Result<Rational> {
        let coins = self.coins().ok_or_else(|| Error::NotSeedSplittable(self.name()))?;
        let mut total = Rational::zero();
        for (r, p) in coins.support() {
            if self.decide(s1, *r)? == self.decide(s2, *r)? {
                total += p;
            }
        }
        Ok(total)
    }
}

impl fmt::Debug for dyn LearningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LearningRule({})", self.name())
    }
}

/// Draw `h ∼ prior` until `h` is consistent with the sample.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    name: String,
    domain: Domain,
    prior: FiniteDistribution<Hypothesis>,
    table: CdfTable,
    floor: Option<Rational>,
    cap: u64,
    weak: Option<WeakParams>,
}

pub fn rejection_sampler(prior: FiniteDistribution<Hypothesis>) -> Result<RejectionSampler> {
    let prior = prior.trimmed();
    let domain = match prior.atoms().first() {
        Some(h) => Domain::new(h.len())?,
        None => return Err(Error::InvalidParameter("empty prior".into())),
    };
    let table = CdfTable::new(&prior);
    Ok(RejectionSampler { name: "rejection".into(), domain, prior, table, floor: None, cap: DEFAULT_DRAW_CAP, weak: None })
}

impl RejectionSampler {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Known lower bound `1/q` on the prior mass of `cons(S)`; the draw cap becomes `⌈64·q⌉`.
    pub fn with_consistency_floor(mut self, floor: Rational) -> Result<Self> {
        if floor <= Rational::zero() || floor > Rational::one() {
            return Err(Error::InvalidParameter(format!("consistency floor {}", format_rational(&floor))));
        }
        self.floor = Some(floor);
        Ok(self)
    }

    pub fn with_draw_cap(mut self, cap: u64) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn with_weak_params(mut self, params: WeakParams) -> Self {
        self.weak = Some(params);
        self
    }

    pub fn draw_cap(&self) -> u64 {
        match &self.floor {
            Some(f) => {
                let q = (Rational::from_integer(BigInt::from(64)) / f).ceil().to_integer();
                q.to_u64().unwrap_or(u64::MAX)
            }
            None => self.cap,
        }
    }

    pub fn consistency_floor(&self) -> Option<&Rational> {
        self.floor.as_ref()
    }

    /// Prior mass of `cons(S)`.
    pub fn consistency_mass(&self, sample: &LabeledSample) -> Rational {
        consistent_mass(&self.prior, sample)
    }

    /// The do-while loop; also reports how many prior draws it took.
    pub fn draw_counted(&self, sample: &LabeledSample, seed: u64) -> Result<(Hypothesis, u64)> {
        let Some((fixed, values)) = sample.constraints() else {
            return Err(Error::PriorNeverConsistent);
        };
        if !self.prior.atoms().iter().any(|h| h.bits() & fixed == values) {
            return Err(Error::PriorNeverConsistent);
        }
        let cap = self.draw_cap();
        let mut rng = rng_from_seed(seed);
        for attempt in 1..=cap {
            let h = self.prior.atoms()[self.table.sample_with(&mut rng)];
            if h.bits() & fixed == values {
                return Ok((h, attempt));
            }
        }
        Err(Error::DrawCapExceeded { attempts: cap })
    }

    /// `ln(1/q)` where `q` is the prior mass of `cons(S)`.
    pub fn posterior_kl(&self, sample: &LabeledSample) -> Result<LogSum> {
        let q = self.consistency_mass(sample);
        if q.is_zero() {
            return Err(Error::PriorNeverConsistent);
        }
        Ok(LogSum::ln(&q.recip()))
    }
}

impl LearningRule for RejectionSampler {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn posterior(&self, sample: &LabeledSample) -> Result<FiniteDistribution<Hypothesis>> {
        self.prior.condition(|h| sample.is_consistent_with(h)).ok_or(Error::PriorNeverConsistent)
    }

    fn draw(&self, sample: &LabeledSample, seed: u64) -> Result<Hypothesis> {
        self.draw_counted(sample, seed).map(|(h, _)| h)
    }

    fn is_interpolating(&self) -> bool {
        true
    }

    fn prior(&self) -> Option<&FiniteDistribution<Hypothesis>> {
        Some(&self.prior)
    }

    fn weak_params(&self) -> Option<&WeakParams> {
        self.weak.as_ref()
    }

    fn kl_to_prior(&self, sample: &LabeledSample) -> Result<DivergenceValue> {
        self.posterior_kl(sample).map(DivergenceValue::Exact)
    }

    /// The first prior draw landing in `C₁ ∪ C₂` decides both runs, so they
    /// agree iff it lands in `C₁ ∩ C₂`.
    fn agreement(&self, s1: &LabeledSample, s2: &LabeledSample) -> Result<Rational> {
        let (mut both, mut either) = (Rational::zero(), Rational::zero());
        for (h, p) in self.prior.support() {
            let (a, b) = (s1.is_consistent_with(h), s2.is_consistent_with(h));
            if a && b {
                both += p;
            }
            if a || b {
                either += p;
            }
        }
        if self.consistency_mass(s1).is_zero() || self.consistency_mass(s2).is_zero() {
            return Err(Error::PriorNeverConsistent);
        }
        Ok(both / either)
    }
}

/// Rejection sampler restricted to `class`, fed `k`-subsamples.
///
/// Every realizable sample keeps some member, so the minimum prior mass is a
/// consistency floor and `b ≤ ln(1/min mass)`.
pub fn finite_class_weak_learner(
    class: &HypothesisClass,
    prior: FiniteDistribution<Hypothesis>,
    k: usize,
) -> Result<RejectionSampler> {
    let prior = prior.trimmed();
    if prior.support_size() != class.len() || prior.atoms().iter().any(|h| !class.contains(h)) {
        return Err(Error::InvalidParameter("weak-learner prior must have full support over the class".into()));
    }
    let floor = prior.probs().iter().min().cloned().expect("nonempty class");
    Ok(rejection_sampler(prior)?
        .with_name(format!("weak:k={k}"))
        .with_consistency_floor(floor)?
        .with_weak_params(WeakParams { k, gamma: None, b: None }))
}

pub fn exact_posterior_kl(
    rule: &dyn LearningRule,
    sample: &LabeledSample,
    prior: &FiniteDistribution<Hypothesis>,
) -> Result<DivergenceValue> {
    kl(&rule.posterior(sample)?, prior)
}

/// Same output distribution on every sample.
#[derive(Debug, Clone)]
pub struct ConstantRule {
    output: FiniteDistribution<Hypothesis>,
}

impl ConstantRule {
    pub fn new(output: FiniteDistribution<Hypothesis>) -> Result<Self> {
        let output = output.trimmed();
        if output.is_empty() {
            return Err(Error::InvalidParameter("empty constant output".into()));
        }
        Ok(ConstantRule { output })
    }
}

impl LearningRule for ConstantRule {
    fn name(&self) -> String {
        "const".into()
    }

    fn domain(&self) -> Domain {
        Domain::new(self.output.atoms()[0].len()).expect("valid hypothesis")
    }

    fn posterior(&self, _sample: &LabeledSample) -> Result<FiniteDistribution<Hypothesis>> {
        Ok(self.output.clone())
    }

    fn draw(&self, sample: &LabeledSample, seed: u64) -> Result<Hypothesis> {
        let coin = *coin_law(self.output.probs()).sample(seed);
        self.decide(sample, coin)
    }

    fn prior(&self) -> Option<&FiniteDistribution<Hypothesis>> {
        Some(&self.output)
    }

    fn coins(&self) -> Option<FiniteDistribution<u64>> {
        Some(coin_law(self.output.probs()))
    }

    fn decide(&self, _sample: &LabeledSample, coin: u64) -> Result<Hypothesis> {
        self.output
            .atoms()
            .get(coin as usize)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: coin as usize, len: self.output.len() })
    }
}

fn coin_law(probs: &[Rational]) -> FiniteDistribution<u64> {
    FiniteDistribution::from_sorted_unchecked((0..probs.len() as u64).collect(), probs.to_vec())
}

/// Deterministic rule wrapper: coins are a single point.
trait Deterministic {
    fn output(&self, sample: &LabeledSample) -> Result<Hypothesis>;
}

macro_rules! deterministic_rule {
    ($t:ty, $name:expr, $interp:expr) => {
        impl LearningRule for $t {
            fn name(&self) -> String {
                $name(self)
            }

            fn domain(&self) -> Domain {
                self.domain
            }

            fn posterior(&self, sample: &LabeledSample) -> Result<FiniteDistribution<Hypothesis>> {
                Ok(FiniteDistribution::point_mass(self.output(sample)?))
            }

            fn draw(&self, sample: &LabeledSample, _seed: u64) -> Result<Hypothesis> {
                self.output(sample)
            }

            fn is_interpolating(&self) -> bool {
                $interp
            }

            fn coins(&self) -> Option<FiniteDistribution<u64>> {
                Some(FiniteDistribution::point_mass(0))
            }

            fn decide(&self, sample: &LabeledSample, _coin: u64) -> Result<Hypothesis> {
                self.output(sample)
            }
        }
    };
}

/// Prior-ignoring ERM over a class; ties go to the lexicographically first member.
#[derive(Debug, Clone)]
pub struct ErmRule {
    domain: Domain,
    members: Vec<Hypothesis>,
}

impl ErmRule {
    pub fn new(class: &HypothesisClass) -> Self {
        let mut members = class.members().to_vec();
        members.sort();
        ErmRule { domain: class.domain(), members }
    }
}

impl Deterministic for ErmRule {
    fn output(&self, sample: &LabeledSample) -> Result<Hypothesis> {
        let mistakes = |h: &Hypothesis| sample.pairs().iter().filter(|e| !h.agrees(e)).count();
        let mut best = self.members[0];
        let mut best_err = mistakes(&best);
        for h in &self.members[1..] {
            let e = mistakes(h);
            if e < best_err {
                best = *h;
                best_err = e;
            }
        }
        Ok(best)
    }
}

deterministic_rule!(ErmRule, |_: &ErmRule| "erm".to_string(), true);

/// Labels each sample point as first seen, 0 elsewhere.
#[derive(Debug, Clone)]
pub struct MemorizeRule {
    domain: Domain,
}

impl MemorizeRule {
    pub fn new(domain: Domain) -> Self {
        MemorizeRule { domain }
    }
}

impl Deterministic for MemorizeRule {
    fn output(&self, sample: &LabeledSample) -> Result<Hypothesis> {
        let mut seen = 0u64;
        let mut bits = 0u64;
        for e in sample.pairs() {
            if e.x as usize >= self.domain.size() {
                return Err(Error::PointOutOfRange { point: e.x, size: self.domain.size() });
            }
            let m = 1u64 << e.x;
            if seen & m == 0 {
                seen |= m;
                if e.y {
                    bits |= m;
                }
            }
        }
        Hypothesis::new(self.domain.size(), bits)
    }
}

deterministic_rule!(MemorizeRule, |_: &MemorizeRule| "memorize".to_string(), true);

/// Randomized response on the first label: the constant function equal to it
/// with probability `r/(1+r)`, its complement otherwise (`r = e^ε`).
/// The empty sample gets a fair coin.
#[derive(Debug, Clone)]
pub struct RandomizedResponse {
    domain: Domain,
    ratio: Rational,
}

impl RandomizedResponse {
    pub fn new(domain: Domain, eps: &Eps) -> Result<Self> {
        let ratio = match eps {
            Eps::ExpRatio(r) => r.clone(),
            Eps::Nats(v) => exp_as_rational(*v)?,
        };
        if ratio < Rational::one() {
            return Err(Error::InvalidParameter("randomized response needs e^eps ≥ 1".into()));
        }
        Ok(RandomizedResponse { domain, ratio })
    }

    /// The exact `ε = ln(ratio)` the rule satisfies.
    pub fn eps(&self) -> Eps {
        Eps::ExpRatio(self.ratio.clone())
    }

    fn keep(&self, sample: &LabeledSample) -> Rational {
        if sample.is_empty() {
            Rational::new(BigInt::one(), BigInt::from(2))
        } else {
            &self.ratio / (&self.ratio + Rational::one())
        }
    }

    fn constant(&self, y: bool) -> Hypothesis {
        if y {
            Hypothesis::ones(self.domain.size())
        } else {
            Hypothesis::zeros(self.domain.size())
        }
    }

    fn first_label(sample: &LabeledSample) -> bool {
        sample.pairs().first().map(|e| e.y).unwrap_or(true)
    }
}

/// `e^v` rounded to a rational within `1e-12` relative error.
fn exp_as_rational(v: f64) -> Result<Rational> {
    if !(v >= 0.0) || v > 40.0 {
        return Err(Error::InvalidParameter(format!("eps {v} outside [0, 40]")));
    }
    let scale = 1u64 << 40;
    let num = (v.exp() * scale as f64).round();
    Ok(Rational::new(BigInt::from(num as u128), BigInt::from(scale)))
}

impl LearningRule for RandomizedResponse {
    fn name(&self) -> String {
        format!("rr:eps={}", self.eps().render())
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn posterior(&self, sample: &LabeledSample) -> Result<FiniteDistribution<Hypothesis>> {
        let y = Self::first_label(sample);
        let keep = self.keep(sample);
        let flip = Rational::one() - &keep;
        FiniteDistribution::from_weights(vec![(self.constant(y), keep), (self.constant(!y), flip)])
    }

    fn draw(&self, sample: &LabeledSample, seed: u64) -> Result<Hypothesis> {
        let keep = self.keep(sample);
        let coin = *coin_law(&[keep.clone(), Rational::one() - keep]).sample(seed);
        let y = Self::first_label(sample);
        Ok(self.constant(if coin == 0 { y } else { !y }))
    }

    /// Coins for nonempty samples.
    fn coins(&self) -> Option<FiniteDistribution<u64>> {
        let keep = &self.ratio / (&self.ratio + Rational::one());
        Some(coin_law(&[keep.clone(), Rational::one() - keep]))
    }

    fn decide(&self, sample: &LabeledSample, coin: u64) -> Result<Hypothesis> {
        if sample.is_empty() {
            return Err(Error::NotSeedSplittable("randomized response on the empty sample".into()));
        }
        let y = Self::first_label(sample);
        Ok(self.constant(if coin == 0 { y } else { !y }))
    }
}

/// Lookup table from ordered samples to output distributions.
#[derive(Debug, Clone)]
pub struct TableRule {
    domain: Domain,
    table: BTreeMap<Vec<Example>, FiniteDistribution<Hypothesis>>,
}

impl TableRule {
    pub fn new(domain: Domain, table: BTreeMap<Vec<Example>, FiniteDistribution<Hypothesis>>) -> Self {
        TableRule { domain, table }
    }

    /// Independent random posteriors over `outputs` (weights in `1..=denom`) for every size-`m` sample.
    pub fn random(domain: Domain, m: usize, outputs: &[Hypothesis], denom: u32, seed: u64) -> Result<Self> {
        if outputs.is_empty() || denom == 0 {
            return Err(Error::InvalidParameter("random table rule needs outputs and denom ≥ 1".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut table = BTreeMap::new();
        for s in ordered_samples(domain, m, 1 << 20)? {
            let weights: Vec<(Hypothesis, Rational)> = outputs
                .iter()
                .map(|h| {
                    let w = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..=denom) };
                    (*h, Rational::from_integer(BigInt::from(w)))
                })
                .collect();
            let weights = if weights.iter().all(|(_, w)| w.is_zero()) {
                vec![(outputs[rng.gen_range(0..outputs.len())], Rational::one())]
            } else {
                weights
            };
            table.insert(s.pairs().to_vec(), FiniteDistribution::from_weights(weights)?);
        }
        Ok(TableRule { domain, table })
    }
}

impl LearningRule for TableRule {
    fn name(&self) -> String {
        "table".into()
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn posterior(&self, sample: &LabeledSample) -> Result<FiniteDistribution<Hypothesis>> {
        self.table
            .get(sample.pairs())
            .cloned()
            .ok_or_else(|| Error::PosteriorUnavailable(format!("table has no entry for {sample:?}")))
    }

    /// Deterministic tables need no coins.
    fn coins(&self) -> Option<FiniteDistribution<u64>> {
        self.table.values().all(|d| d.support_size() == 1).then(|| FiniteDistribution::point_mass(0))
    }

    fn decide(&self, sample: &LabeledSample, _coin: u64) -> Result<Hypothesis> {
        let post = self.posterior(sample)?;
        if post.support_size() != 1 {
            return Err(Error::NotSeedSplittable("randomized table".into()));
        }
        let h = *post.support().next().expect("one atom").0;
        Ok(h)
    }
}

/// All `(2n)^m` ordered samples of size `m`, in lexicographic order.
pub fn ordered_samples(domain: Domain, m: usize, budget: u128) -> Result<Vec<LabeledSample>> {
    let base = 2 * domain.size() as u128;
    let needed = base.checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let examples = domain.examples();
    let mut out = Vec::with_capacity(needed as usize);
    let mut idx = vec![0usize; m];
    loop {
        out.push(LabeledSample::from_pairs_unchecked(idx.iter().map(|&i| examples[i]).collect()));
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < examples.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Measured weak-learner edge and KL budget on a realizable battery.
#[derive(Debug, Clone, Serialize)]
pub struct WeakMeasurement {
    pub k: usize,
    pub trials: u64,
    pub exact: bool,
    pub targets: usize,
    /// Largest mean loss over the battery.
    pub worst_loss: f64,
    /// Largest mean `KL(A(S)‖P)` over the battery.
    pub worst_kl: f64,
    pub loss_radius: f64,
    pub kl_radius: f64,
    /// Certified `γ`, rounded down to thousandths.
    #[serde(serialize_with = "ser_rational")]
    pub gamma: Rational,
    /// Certified `b`, rounded up to thousandths.
    #[serde(serialize_with = "ser_rational")]
    pub b: Rational,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

/// Uniform marginal over the domain labeled by `target`.
pub fn uniform_marginal(target: &Hypothesis) -> PopulationDistribution {
    let n = target.len();
    let p = Rational::new(BigInt::one(), BigInt::from(n));
    FiniteDistribution::from_pairs((0..n as u32).map(|x| (Example::new(x, target.label(x)), p.clone())))
        .expect("uniform marginal")
}

/// Two-sided 99% Hoeffding radius for a mean of `trials` values in a range of width `width`.
pub fn hoeffding_radius(trials: u64, width: f64) -> f64 {
    width * ((2.0f64 / 0.01).ln() / (2.0 * trials as f64)).sqrt()
}

/// `γ = ½ − max_D E[L_D(A(S))]` and `b = max_D E[KL(A(S)‖P)]` over the
/// uniform-marginal populations of every class member, `S ∼ D^k`.
///
/// Exact when `n^k ≤ budget`, else Monte Carlo with `trials` samples per
/// target and a conservative Hoeffding radius folded into both numbers.
pub fn measure_weak_learner(
    rule: &RejectionSampler,
    class: &HypothesisClass,
    trials: u64,
    budget: u128,
    seed: u64,
    exec: Executor,
) -> Result<WeakMeasurement> {
    let k = rule.weak_params().map(|w| w.k).ok_or_else(|| Error::InvalidParameter("rule has no declared k".into()))?;
    let n = class.domain().size();
    let floor = rule.consistency_floor().cloned().unwrap_or_else(|| rule.prior.probs().iter().min().cloned().unwrap());
    let kl_width = crate::prob::ln_rational(&floor.recip());
    let exact = (n as u128).checked_pow(k as u32).map(|c| c <= budget).unwrap_or(false);
    let targets = class.members();
    let per_target: Vec<Result<(f64, f64)>> = exec.map(targets.len(), |ti| {
        let target = targets[ti];
        let pop = uniform_marginal(&target);
        let eval = |points: &[u32]| -> Result<(f64, f64)> {
            let s = LabeledSample::labeled_by(&target, points);
            let post = rule.posterior(&s)?;
            let loss: Rational = post.iter().map(|(h, p)| p * population_loss(&pop, h)).sum();
            Ok((rational_to_f64(&loss), rule.posterior_kl(&s)?.to_f64()))
        };
        let (mut loss, mut klsum) = (0.0, 0.0);
        if exact {
            let count = n.pow(k as u32);
            let mut points = vec![0u32; k];
            for mut code in 0..count {
                for p in points.iter_mut() {
                    *p = (code % n) as u32;
                    code /= n;
                }
                let (l, d) = eval(&points)?;
                loss += l;
                klsum += d;
            }
            Ok((loss / count as f64, klsum / count as f64))
        } else {
            let mut rng = rng_from_seed(shard_seed(seed, ti));
            let mut points = vec![0u32; k];
            for _ in 0..trials {
                for p in points.iter_mut() {
                    *p = rng.gen_range(0..n as u32);
                }
                let (l, d) = eval(&points)?;
                loss += l;
                klsum += d;
            }
            Ok((loss / trials as f64, klsum / trials as f64))
        }
    });
    let mut worst_loss: f64 = 0.0;
    let mut worst_kl: f64 = 0.0;
    for r in per_target {
        let (l, d) = r?;
        worst_loss = worst_loss.max(l);
        worst_kl = worst_kl.max(d);
    }
    let (loss_radius, kl_radius) =
        if exact { (0.0, 0.0) } else { (hoeffding_radius(trials, 1.0), hoeffding_radius(trials, kl_width)) };
    let gamma_hat = 0.5 - worst_loss - loss_radius;
    let b_hat = (worst_kl + kl_radius).min(kl_width);
    let thousand = BigInt::from(1000);
    let gamma = Rational::new(BigInt::from((gamma_hat * 1000.0).floor() as i64), thousand.clone());
    let b = Rational::new(BigInt::from((b_hat * 1000.0).ceil() as i64), thousand);
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    if gamma <= Rational::zero() || gamma >= half {
        return Err(Error::InvalidParameter(format!("measured edge {gamma_hat:.4} leaves no weak-learning margin")));
    }
    Ok(WeakMeasurement {
        k,
        trials: if exact { 0 } else { trials },
        exact,
        targets: targets.len(),
        worst_loss,
        worst_kl,
        loss_radius,
        kl_radius,
        gamma,
        b,
    })
}

/// Build a rule from a registry spec.
///
/// `rejection:uniform` (all functions), `rejection:class`, `weak:k=K`, `erm`,
/// `memorize`, `rr:eps=E`, `const:uniform`, `const:<0/1 string>`.
pub fn rule_from_spec(spec: &str, class: &HypothesisClass) -> Result<Box<dyn LearningRule>> {
    let spec = spec.trim();
    let (kind, arg) = spec.split_once(':').map(|(a, b)| (a, Some(b))).unwrap_or((spec, None));
    let domain = class.domain();
    let bad = || Error::Parse(format!("invalid rule spec '{spec}'"));
    match (kind, arg) {
        ("rejection", Some("uniform")) => {
            let prior: FiniteDistribution<Hypothesis> = FiniteDistribution::uniform(domain.all_functions()?)?;
            let floor = prior.probs()[0].clone();
            Ok(Box::new(rejection_sampler(prior)?.with_name(spec).with_consistency_floor(floor)?))
        }
        ("rejection", Some("class")) => {
            let prior = class.uniform_prior();
            let floor = prior.probs().iter().min().cloned().unwrap();
            Ok(Box::new(rejection_sampler(prior)?.with_name(spec).with_consistency_floor(floor)?))
        }
        ("weak", Some(a)) => {
            let k: usize = a.strip_prefix("k=").and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            Ok(Box::new(finite_class_weak_learner(class, class.uniform_prior(), k)?))
        }
        ("erm", None) => Ok(Box::new(ErmRule::new(class))),
        ("memorize", None) => Ok(Box::new(MemorizeRule::new(domain))),
        ("rr", Some(a)) => {
            let e = a.strip_prefix("eps=").ok_or_else(bad)?;
            Ok(Box::new(RandomizedResponse::new(domain, &Eps::parse(e)?)?))
        }
        ("const", Some("uniform")) => Ok(Box::new(ConstantRule::new(class.uniform_prior())?)),
        ("const", Some(bits)) => {
            let h: Hypothesis = bits.parse()?;
            if h.len() != domain.size() {
                return Err(Error::LengthMismatch { expected: domain.size(), got: h.len() });
            }
            Ok(Box::new(ConstantRule::new(FiniteDistribution::point_mass(h))?))
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::{renyi, tv, Alpha};
    use crate::prob::rational;
    use crate::types::{consistent_set, Universe};
    use proptest::prelude::*;
    use rand::Rng;

    fn sample(pairs: &[(u32, bool)]) -> LabeledSample {
        LabeledSample::from_pairs_unchecked(pairs.iter().map(|&(x, y)| Example::new(x, y)).collect())
    }

    fn uniform_full(n: usize) -> RejectionSampler {
        rejection_sampler(FiniteDistribution::uniform(Domain::new(n).unwrap().all_functions().unwrap()).unwrap())
            .unwrap()
    }

    #[test]
    fn rejection_examples() {
        let r = uniform_full(3);
        assert_eq!(r.posterior(&LabeledSample::empty()).unwrap(), *r.prior().unwrap());
        let post = r.posterior(&sample(&[(0, true)])).unwrap();
        assert_eq!(post.support_size(), 4);
        assert!(post.iter().all(|(h, p)| h.label(0) && *p == rational(1, 4)));

        let h: Hypothesis = "101".parse().unwrap();
        let point = rejection_sampler(FiniteDistribution::point_mass(h)).unwrap();
        let s = sample(&[(0, true), (1, false)]);
        assert_eq!(point.posterior(&s).unwrap(), FiniteDistribution::point_mass(h));
        assert_eq!(point.posterior(&sample(&[(1, true)])), Err(Error::PriorNeverConsistent));
        assert_eq!(point.draw(&sample(&[(1, true)]), 0), Err(Error::PriorNeverConsistent));
        assert_eq!(r.posterior(&sample(&[(0, true), (0, false)])), Err(Error::PriorNeverConsistent));
    }

    #[test]
    fn draw_cap_surfaces() {
        // consistent mass 1/8 but a cap of one attempt
        let r = uniform_full(3).with_draw_cap(1);
        let s = sample(&[(0, true), (1, true), (2, true)]);
        let mut failures = 0;
        for seed in 0..50 {
            match r.draw(&s, seed) {
                Ok(h) => assert!(s.is_consistent_with(&h)),
                Err(Error::DrawCapExceeded { attempts }) => {
                    assert_eq!(attempts, 1);
                    failures += 1;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(failures > 30);
        let floored = uniform_full(3).with_consistency_floor(rational(1, 8)).unwrap();
        assert_eq!(floored.draw_cap(), 512);
    }

    #[test]
    fn posterior_kl_examples() {
        let r = uniform_full(3);
        let prior = r.prior().unwrap().clone();
        assert_eq!(exact_posterior_kl(&r, &LabeledSample::empty(), &prior).unwrap().to_f64(), 0.0);
        let s = sample(&[(0, true)]);
        let d = exact_posterior_kl(&r, &s, &prior).unwrap();
        assert!((d.to_f64() - 2f64.ln()).abs() < 1e-12);
        let fast = r.posterior_kl(&s).unwrap();
        assert!(d.compare(&DivergenceValue::Exact(fast), 0.0).is_eq());
    }

    fn brute_condition(prior: &FiniteDistribution<Hypothesis>, s: &LabeledSample) -> Option<Vec<(Hypothesis, Rational)>> {
        let total: Rational = prior.iter().filter(|(h, _)| s.is_consistent_with(h)).map(|(_, p)| p.clone()).sum();
        if total.is_zero() {
            return None;
        }
        Some(
            prior
                .iter()
                .filter(|(h, p)| !p.is_zero() && s.is_consistent_with(h))
                .map(|(h, p)| (*h, p / &total))
                .collect(),
        )
    }

    #[test]
    fn posterior_matches_brute_force_exhaustively() {
        for n in 1..=6usize {
            let d = Domain::new(n).unwrap();
            let all = d.all_functions().unwrap();
            let mut rng = rng_from_seed(n as u64);
            let prior = FiniteDistribution::from_weights(
                all.iter().map(|h| (*h, Rational::from_integer(BigInt::from(rng.gen_range(0..4u32))))).collect::<Vec<_>>(),
            )
            .unwrap();
            let r = rejection_sampler(prior.clone()).unwrap();
            let m = if n <= 3 { 2 } else { 1 };
            for s in ordered_samples(d, m, 1 << 20).unwrap() {
                match (r.posterior(&s), brute_condition(&prior, &s)) {
                    (Ok(post), Some(expect)) => {
                        let got: Vec<(Hypothesis, Rational)> = post.support().map(|(h, p)| (*h, p.clone())).collect();
                        assert_eq!(got, expect);
                        // Q_S ≤ q·P pointwise, with R_∞(Q_S‖P) = ln q exactly
                        let q = r.consistency_mass(&s).recip();
                        for (h, p) in post.support() {
                            assert!(*p <= &q * prior.prob_of(h));
                        }
                        let rinf = renyi(&Alpha::Infinity, &post, &prior).unwrap();
                        assert!(rinf.compare(&DivergenceValue::Exact(LogSum::ln(&q)), 0.0).is_eq());
                        let cons = consistent_set(&s, &Universe::Full(d)).unwrap();
                        assert!(post.support().all(|(h, _)| cons.contains(h)));
                    }
                    (Err(Error::PriorNeverConsistent), None) => {}
                    (a, b) => panic!("mismatch on {s:?}: {a:?} vs {b:?}"),
                }
            }
        }
    }

    fn empirical(rule: &dyn LearningRule, s: &LabeledSample, trials: u64) -> FiniteDistribution<Hypothesis> {
        let mut counts: BTreeMap<Hypothesis, u64> = BTreeMap::new();
        for seed in 0..trials {
            *counts.entry(rule.draw(s, seed).unwrap()).or_default() += 1;
        }
        FiniteDistribution::from_weights(counts.into_iter().map(|(h, c)| (h, Rational::from_integer(BigInt::from(c)))))
            .unwrap()
    }

    #[test]
    fn draws_match_posteriors() {
        let class = HypothesisClass::thresholds(4).unwrap();
        let rules: Vec<Box<dyn LearningRule>> = vec![
            Box::new(uniform_full(3)),
            rule_from_spec("rejection:class", &class).unwrap(),
            rule_from_spec("rr:eps=ln(3)", &class).unwrap(),
            rule_from_spec("const:uniform", &class).unwrap(),
        ];
        let samples = [sample(&[]), sample(&[(0, false)]), sample(&[(2, true), (0, false)])];
        for rule in &rules {
            for s in &samples {
                let post = rule.posterior(s).unwrap();
                let emp = empirical(rule.as_ref(), s, 100_000);
                let d = tv(&emp.to_f64(), &post.to_f64()).unwrap().to_f64();
                assert!(d <= 0.01, "{} on {s:?}: tv {d}", rule.name());
            }
        }
    }

    #[test]
    fn weak_learner_examples() {
        let class = HypothesisClass::thresholds(16).unwrap();
        let w = finite_class_weak_learner(&class, class.uniform_prior(), 8).unwrap();
        let prior = w.prior().unwrap().clone();
        assert_eq!(w.posterior(&LabeledSample::empty()).unwrap(), prior);
        let ln16 = LogSum::ln(&rational(16, 1));
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let target = class.members()[rng.gen_range(0..16)];
            let points: Vec<u32> = (0..8).map(|_| rng.gen_range(0..16)).collect();
            let s = LabeledSample::labeled_by(&target, &points);
            let d = w.kl_to_prior(&s).unwrap();
            assert!(d.le_logsum(&ln16, 0.0));
            let h = w.draw(&s, rng.gen()).unwrap();
            assert!(class.contains(&h) && s.is_consistent_with(&h));
        }
        assert!(finite_class_weak_learner(&class, FiniteDistribution::point_mass(class.members()[0]), 8).is_err());
    }

    #[test]
    fn weak_edge_on_thresholds_16() {
        let class = HypothesisClass::thresholds(16).unwrap();
        let w = finite_class_weak_learner(&class, class.uniform_prior(), 8).unwrap();
        let m = measure_weak_learner(&w, &class, 10_000, 0, 11, Executor::default()).unwrap();
        assert!(!m.exact);
        assert!(m.gamma >= rational(1, 4), "gamma {}", format_rational(&m.gamma));
        assert!(m.b <= rational(2773, 1000));
        let small = HypothesisClass::thresholds(4).unwrap();
        let w4 = finite_class_weak_learner(&small, small.uniform_prior(), 3).unwrap();
        let e = measure_weak_learner(&w4, &small, 0, 1 << 10, 0, Executor::default()).unwrap();
        assert!(e.exact && e.loss_radius == 0.0);
    }

    #[test]
    fn baseline_behaviour() {
        let class = HypothesisClass::full(3).unwrap();
        let erm = ErmRule::new(&class);
        assert_eq!(erm.draw(&LabeledSample::empty(), 0).unwrap(), Hypothesis::zeros(3));
        let s = sample(&[(1, true), (1, false), (2, true)]);
        assert_eq!(erm.draw(&s, 0).unwrap().render(), "001");
        let mem = MemorizeRule::new(Domain::new(3).unwrap());
        assert_eq!(mem.draw(&s, 0).unwrap().render(), "011");
        assert!(mem.agreement(&s, &s).unwrap().is_one());

        let rr = RandomizedResponse::new(Domain::new(2).unwrap(), &Eps::ExpRatio(rational(3, 1))).unwrap();
        let p1 = rr.posterior(&sample(&[(0, true)])).unwrap();
        let p0 = rr.posterior(&sample(&[(0, false)])).unwrap();
        assert_eq!(p1.prob_of(&Hypothesis::ones(2)), rational(3, 4));
        assert_eq!(p0.prob_of(&Hypothesis::ones(2)), rational(1, 4));
        assert_eq!(rr.agreement(&sample(&[(0, true)]), &sample(&[(1, true)])).unwrap(), rational(1, 1));
        assert_eq!(rr.agreement(&sample(&[(0, true)]), &sample(&[(1, false)])).unwrap(), rational(0, 1));
        let nats = RandomizedResponse::new(Domain::new(2).unwrap(), &Eps::Nats(1.0)).unwrap();
        assert!((nats.eps().to_f64() - 1.0).abs() < 1e-9);

        let c = ConstantRule::new(class.uniform_prior()).unwrap();
        assert_eq!(c.agreement(&s, &sample(&[(0, false)])).unwrap(), rational(1, 1));
    }

    #[test]
    fn rejection_agreement_matches_coin_enumeration() {
        // first hit of the shared prior sequence in C1 ∪ C2 decides both runs
        let r = uniform_full(2);
        let s1 = sample(&[(0, true)]);
        let s2 = sample(&[(1, true)]);
        assert_eq!(r.agreement(&s1, &s2).unwrap(), rational(1, 3));
        let same = 2000;
        let hits = (0..same).filter(|&seed| r.draw(&s1, seed).unwrap() == r.draw(&s2, seed).unwrap()).count();
        assert!((hits as f64 / same as f64 - 1.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn registry_parses() {
        let class = HypothesisClass::thresholds(4).unwrap();
        for spec in ["rejection:uniform", "rejection:class", "weak:k=3", "erm", "memorize", "rr:eps=1.0", "const:0011"] {
            let r = rule_from_spec(spec, &class).unwrap();
            assert_eq!(r.domain().size(), 4, "{spec}");
        }
        for bad in ["rejection", "weak:k", "rr:eps=-1", "const:01", "nope"] {
            assert!(rule_from_spec(bad, &class).is_err(), "{bad}");
        }
        assert_eq!(ordered_samples(Domain::new(2).unwrap(), 2, 100).unwrap().len(), 16);
        assert!(ordered_samples(Domain::new(2).unwrap(), 4, 100).is_err());
    }

    #[test]
    fn table_rule_lookup() {
        let d = Domain::new(1).unwrap();
        let outs = d.all_functions().unwrap();
        let t = TableRule::random(d, 2, &outs, 4, 9).unwrap();
        for s in ordered_samples(d, 2, 100).unwrap() {
            let p = t.posterior(&s).unwrap();
            assert!(p.total().is_one());
        }
        assert!(t.posterior(&sample(&[(0, true)])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kl_bounded_by_log_inverse_min_mass(seed in any::<u64>(), m in 0usize..6) {
            let class = HypothesisClass::thresholds(8).unwrap();
            let w = finite_class_weak_learner(&class, class.uniform_prior(), m).unwrap();
            let mut rng = rng_from_seed(seed);
            let target = class.members()[rng.gen_range(0..8)];
            let points: Vec<u32> = (0..m).map(|_| rng.gen_range(0..8)).collect();
            let s = LabeledSample::labeled_by(&target, &points);
            let d = w.kl_to_prior(&s).unwrap();
            prop_assert!(d.le_logsum(&LogSum::ln(&rational(8, 1)), 0.0));
            let generic = exact_posterior_kl(&w, &s, w.prior().unwrap()).unwrap();
            prop_assert!(generic.compare(&d, 0.0).is_eq());
        }
    }
}
