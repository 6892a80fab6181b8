//! Stability boosting: majority of weak-learner outputs under multiplicative weights.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::dist::{rng_from_seed, TruncatedHarmonicMixture};
use crate::divergences::{kl, DivergenceValue, FLOAT_COMPARE_TOL};
use crate::error::{Error, Result};
use crate::exact::LogSum;
use crate::experts::{regret_bound, MultiplicativeWeights};
use crate::learners::LearningRule;
use crate::majority::{majority, majority_of_independent, majority_push, MajorityMethod};
use crate::prob::{format_rational, rational_to_f64, Prob, Rational};
use crate::types::{consistent_mass, empirical_loss, Example, Hypothesis, LabeledSample};
use crate::FiniteDistribution;

/// Enumeration cap for the joint law of `(f₁,…,f_T)` in the ledger.
pub const JOINT_ENUMERATION_BUDGET: u128 = 1 << 16;

fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoostConfig {
    #[serde(serialize_with = "ser_rational")]
    pub gamma: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub b: Rational,
    pub k: usize,
    #[serde(serialize_with = "ser_rational")]
    pub kl_gate: Rational,
    pub resample_cap: u64,
}

impl BoostConfig {
    /// `γ ∈ (0, ½]`, `b ≥ 0`, `k ≥ 1`; gate `2b/γ`, cap `⌈64/γ⌉`.
    pub fn new(gamma: Rational, b: Rational, k: usize) -> Result<Self> {
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        if gamma <= Rational::zero() || gamma > half {
            return Err(Error::InvalidParameter(format!("gamma {} outside (0, 1/2]", format_rational(&gamma))));
        }
        if b < Rational::zero() {
            return Err(Error::InvalidParameter(format!("b {} is negative", format_rational(&b))));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        let kl_gate = Rational::from_integer(BigInt::from(2)) * &b / &gamma;
        let cap = (Rational::from_integer(BigInt::from(64)) / &gamma).ceil().to_integer();
        Ok(BoostConfig { gamma, b, k, kl_gate, resample_cap: cap.to_u64().unwrap_or(u64::MAX) })
    }

    /// From the rule's declared `(k, γ, b)`.
    pub fn from_rule(rule: &dyn LearningRule) -> Result<Self> {
        let w = rule
            .weak_params()
            .ok_or_else(|| Error::InvalidParameter(format!("{} declares no weak-learner parameters", rule.name())))?;
        match (&w.gamma, &w.b) {
            (Some(g), Some(b)) => BoostConfig::new(g.clone(), b.clone(), w.k),
            _ => Err(Error::InvalidParameter(format!("{} has not measured (gamma, b)", rule.name()))),
        }
    }

    pub fn with_resample_cap(mut self, cap: u64) -> Self {
        self.resample_cap = cap.max(1);
        self
    }

    /// `T = ⌈8 ln(m)/γ²⌉ + 1`, natural log.
    pub fn rounds(&self, m: usize) -> usize {
        rounds_for(&self.gamma, m)
    }
}

pub fn rounds_for(gamma: &Rational, m: usize) -> usize {
    if m <= 1 {
        return 1;
    }
    let coef = Rational::from_integer(BigInt::from(8)) / (gamma * gamma);
    let x = LogSum::scaled_ln(&coef, &Rational::from_integer(BigInt::from(m)));
    let guess = x.to_f64().ceil() as i64;
    // settle the ceiling exactly around the float guess
    let mut c = guess.max(1);
    while x.compare(&LogSum::constant(Rational::from_integer(BigInt::from(c - 1)))) != Some(Ordering::Greater) && c > 1 {
        c -= 1;
    }
    while x.compare(&LogSum::constant(Rational::from_integer(BigInt::from(c)))) == Some(Ordering::Greater) {
        c += 1;
    }
    c as usize + 1
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostRound {
    pub weights: Vec<f64>,
    /// Indices into the input sample.
    pub subsample: Vec<usize>,
    pub resamples: u64,
    /// `KL(A(S_t)‖P)` of the rejected draws, then the accepted one.
    pub kl_trace: Vec<f64>,
    pub hypothesis: Hypothesis,
    /// `1(f_t(x_i) ≠ y_i)` per example.
    pub utilities: Vec<bool>,
    /// `E_{w_t}[1(f_t(x) ≠ y)]`.
    pub learner_utility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostTranscript {
    pub config: BoostConfig,
    pub m: usize,
    pub rounds: usize,
    pub log_base: &'static str,
    pub eta: f64,
    pub sample: LabeledSample,
    pub history: Vec<BoostRound>,
    pub output: Hypothesis,
    #[serde(serialize_with = "ser_rational")]
    pub empirical_loss: Rational,
    /// `Σ_t E_{w_t}[utility]`.
    pub learner_total: f64,
    /// `(½ − γ/2)·T`; compared, not asserted.
    pub utility_bound: f64,
    pub regret: f64,
    pub regret_bound: f64,
    pub resample_total: u64,
}

impl BoostTranscript {
    pub fn interpolates(&self) -> bool {
        self.empirical_loss.is_zero()
    }

    pub fn utility_within_bound(&self) -> bool {
        self.learner_total <= self.utility_bound + 1e-9
    }

    /// `U + √(2T ln m) < T/2` forces every example to be labeled correctly
    /// by a strict majority of rounds.
    pub fn regret_certifies_interpolation(&self) -> bool {
        self.learner_total + self.regret_bound < self.rounds as f64 / 2.0
    }

    pub fn subsample(&self, t: usize) -> LabeledSample {
        let pairs: Vec<Example> = self.history[t].subsample.iter().map(|&i| self.sample.pairs()[i]).collect();
        LabeledSample::new(self.sample_domain(), pairs).expect("subsample of a valid sample")
    }

    fn sample_domain(&self) -> crate::types::Domain {
        crate::types::Domain::new(self.output.len()).expect("valid output")
    }
}

/// Algorithm: MW over the examples of `S` against the weak learner on gated
/// `k`-subsamples; returns the majority of the `T` weak hypotheses.
pub fn boost(
    weak: &dyn LearningRule,
    config: &BoostConfig,
    sample: &LabeledSample,
    seed: u64,
) -> Result<(Hypothesis, BoostTranscript)> {
    let m = sample.len();
    if m == 0 {
        return Err(Error::EmptySample);
    }
    let prior = weak.prior().ok_or_else(|| Error::PosteriorUnavailable(format!("{} has no prior", weak.name())))?;
    if consistent_mass(prior, sample).is_zero() {
        return Err(Error::NoConsistentTarget);
    }
    let t_rounds = config.rounds(m);
    let gate = DivergenceValue::Exact(LogSum::constant(config.kl_gate.clone()));
    let mut mw = MultiplicativeWeights::new(m, t_rounds);
    let mut rng = rng_from_seed(seed);
    let mut history = Vec::with_capacity(t_rounds);
    let mut outputs = Vec::with_capacity(t_rounds);
    let mut resample_total = 0;
    for round in 0..t_rounds {
        let weights = mw.weights();
        let picker = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(format!("MW weights: {e}")))?;
        let mut kl_trace = Vec::new();
        let mut resamples = 0u64;
        let subsample = loop {
            let idx: Vec<usize> = (0..config.k).map(|_| picker.sample(&mut rng)).collect();
            let s_t = LabeledSample::new(weak.domain(), idx.iter().map(|&i| sample.pairs()[i]).collect())?;
            let d = weak.kl_to_prior(&s_t)?;
            kl_trace.push(d.to_f64());
            if d.compare(&gate, 0.0) == Ordering::Less {
                break (idx, s_t);
            }
            resamples += 1;
            if resamples >= config.resample_cap {
                return Err(Error::GateNeverPassed { round, attempts: resamples, observed: kl_trace });
            }
        };
        let f = weak.draw(&subsample.1, rng.gen())?;
        let utilities: Vec<bool> = sample.pairs().iter().map(|e| !f.agrees(e)).collect();
        let learner_utility: f64 = weights.iter().zip(&utilities).filter(|(_, &u)| u).map(|(w, _)| w).sum();
        mw.update(&utilities)?;
        resample_total += resamples;
        outputs.push(f);
        history.push(BoostRound {
            weights,
            subsample: subsample.0,
            resamples,
            kl_trace,
            hypothesis: f,
            utilities,
            learner_utility,
        });
    }
    let output = majority(&outputs)?;
    let learner_total: f64 = history.iter().map(|r| r.learner_utility).sum();
    let best = mw.totals().iter().copied().max().unwrap_or(0) as f64;
    let gamma = rational_to_f64(&config.gamma);
    let transcript = BoostTranscript {
        config: config.clone(),
        m,
        rounds: t_rounds,
        log_base: "e",
        eta: mw.eta(),
        sample: sample.clone(),
        history,
        output,
        empirical_loss: empirical_loss(sample, &output)?,
        learner_total,
        utility_bound: (0.5 - gamma / 2.0) * t_rounds as f64,
        regret: best - learner_total,
        regret_bound: regret_bound(m, t_rounds),
        resample_total,
    };
    Ok((output, transcript))
}

/// `P* = (1/z_L) Σ_{ℓ≤L} P*_ℓ/ℓ²` with `P*_ℓ` the law of the majority of `ℓ`
/// draws from `prior`, truncated at the largest `T(m)` over `ms`.
pub fn boosted_prior<P: Prob>(
    prior: &FiniteDistribution<Hypothesis>,
    gamma: &Rational,
    ms: &[usize],
    budget: u128,
) -> Result<TruncatedHarmonicMixture<Hypothesis, P>> {
    let l = ms.iter().map(|&m| rounds_for(gamma, m)).max().unwrap_or(1);
    boosted_prior_to::<P>(prior, l, budget)
}

/// `P*` truncated at `L`.
pub fn boosted_prior_to<P: Prob>(
    prior: &FiniteDistribution<Hypothesis>,
    l: usize,
    budget: u128,
) -> Result<TruncatedHarmonicMixture<Hypothesis, P>> {
    let components: Vec<FiniteDistribution<Hypothesis, P>> =
        (1..=l.max(1)).map(|ell| majority_push::<P>(prior, ell, budget).map(|law| law.dist)).collect::<Result<_>>()?;
    TruncatedHarmonicMixture::new(components)
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Every step of the boosted KL bound for one run, evaluated on the law of
/// `maj(g₁,…,g_T)` with `g_t ∼ A(S_t)` independent given the recorded `S_t`.
#[derive(Debug, Clone, Serialize)]
pub struct KlLedger {
    pub rounds: usize,
    pub exact: bool,
    pub per_round: Vec<DivergenceValue>,
    /// `Σ_t KL(A(S_t)‖P)`.
    pub sum_per_round: DivergenceValue,
    /// `KL(⊗A(S_t) ‖ P^T)`.
    pub joint: DivergenceValue,
    pub joint_method: &'static str,
    /// `KL(maj ‖ P*_T)`.
    pub majority: DivergenceValue,
    pub majority_method: MajorityMethod,
    /// `T·2b/γ`.
    pub gate_total: LogSum,
    /// `ln(z_L T²)`.
    pub mixture_penalty: LogSum,
    /// `KL(maj ‖ P*)`.
    pub total: DivergenceValue,
    /// `T·2b/γ + ln(z_L T²)`.
    pub total_bound: LogSum,
    pub checks: Vec<LedgerCheck>,
}

impl KlLedger {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn check(name: &'static str, lhs: &DivergenceValue, rhs: &DivergenceValue, strict: bool) -> LedgerCheck {
    let ord = lhs.compare(rhs, FLOAT_COMPARE_TOL);
    let holds = if strict { ord == Ordering::Less } else { ord != Ordering::Greater };
    let (l, r) = (lhs.to_f64(), rhs.to_f64());
    LedgerCheck { name, lhs: l, rhs: r, slack: r - l, holds }
}

/// Re-evaluates the chain
/// `KL(maj‖P*_T) ≤ KL(joint) = Σ_t KL(A(S_t)‖P) ≤ T·2b/γ` and
/// `KL(maj‖P*) ≤ KL(maj‖P*_T) + ln(z_L T²)`.
///
/// Runs in exact arithmetic when `P` is exact. Any violated step is an error.
pub fn kl_ledger<P: Prob>(
    transcript: &BoostTranscript,
    weak: &dyn LearningRule,
    pstar: &TruncatedHarmonicMixture<Hypothesis, P>,
) -> Result<KlLedger> {
    kl_ledger_with_law(transcript, weak, pstar).map(|(l, _)| l)
}

/// As [`kl_ledger`], also returning the law of `maj(g₁,…,g_T)`.
pub fn kl_ledger_with_law<P: Prob>(
    transcript: &BoostTranscript,
    weak: &dyn LearningRule,
    pstar: &TruncatedHarmonicMixture<Hypothesis, P>,
) -> Result<(KlLedger, FiniteDistribution<Hypothesis, P>)> {
    let prior = weak.prior().ok_or_else(|| Error::PosteriorUnavailable(format!("{} has no prior", weak.name())))?;
    let t = transcript.rounds;
    let pstar_t = pstar
        .component(t)
        .ok_or_else(|| Error::InvalidParameter(format!("P* truncated at {} < T = {t}", pstar.truncation())))?;
    let posteriors: Vec<FiniteDistribution<Hypothesis>> =
        (0..t).map(|i| weak.posterior(&transcript.subsample(i))).collect::<Result<_>>()?;
    let prior_p = prior.convert(P::from_rational);
    let per_round: Vec<DivergenceValue> =
        posteriors.iter().map(|q| kl(&q.convert(P::from_rational), &prior_p)).collect::<Result<_>>()?;
    let sum_per_round = per_round.iter().fold(DivergenceValue::zero(), |acc, d| acc.add(d));

    let mut tuples: u128 = 1;
    for q in &posteriors {
        tuples = tuples.saturating_mul(q.support_size() as u128);
    }
    let (joint, joint_method) = if tuples <= JOINT_ENUMERATION_BUDGET {
        (joint_kl::<P>(&posteriors, prior)?, "enumeration")
    } else {
        (sum_per_round.clone(), "chain-rule")
    };

    let refs: Vec<&FiniteDistribution<Hypothesis>> = posteriors.iter().collect();
    let law = majority_of_independent::<P>(&refs, JOINT_ENUMERATION_BUDGET)?;
    let majority = kl(&law.dist, pstar_t)?;
    let flat = pstar.flatten();
    let total = kl(&law.dist, &flat)?;

    let t_big = BigInt::from(t);
    let gate_total = LogSum::constant(&transcript.config.kl_gate * Rational::from_integer(t_big.clone()));
    let mixture_penalty = LogSum::ln(&(pstar.z_l() * Rational::from_integer(&t_big * &t_big)));
    let total_bound = gate_total.add(&mixture_penalty);

    let gate = DivergenceValue::Exact(LogSum::constant(transcript.config.kl_gate.clone()));
    let mut checks = Vec::new();
    for d in &per_round {
        let c = check("round KL < gate", d, &gate, true);
        if !c.holds || checks.is_empty() {
            checks.push(c);
        }
    }
    checks.push(check("KL(maj) ≤ KL(joint)", &majority, &joint, false));
    checks.push(check("KL(joint) ≤ Σ round KL", &joint, &sum_per_round, false));
    checks.push(check("Σ round KL ≤ T·gate", &sum_per_round, &DivergenceValue::Exact(gate_total.clone()), false));
    checks.push(check(
        "KL(maj‖P*) ≤ KL(maj‖P*_T) + ln(z_L T²)",
        &total,
        &majority.add(&DivergenceValue::Exact(mixture_penalty.clone())),
        false,
    ));
    checks.push(check("KL(maj‖P*) ≤ T·gate + ln(z_L T²)", &total, &DivergenceValue::Exact(total_bound.clone()), false));

    let ledger = KlLedger {
        rounds: t,
        exact: P::EXACT && law.is_exact(),
        per_round,
        sum_per_round,
        joint,
        joint_method,
        majority,
        majority_method: law.method,
        gate_total,
        mixture_penalty,
        total,
        total_bound,
        checks,
    };
    if let Some(bad) = ledger.checks.iter().find(|c| !c.holds) {
        return Err(Error::InvariantViolation(format!(
            "KL ledger step '{}' fails: {} > {}",
            bad.name, bad.lhs, bad.rhs
        )));
    }
    Ok((ledger, law.dist))
}

/// `KL(⊗_t Q_t ‖ P^T)` by enumerating the support of the product.
fn joint_kl<P: Prob>(posteriors: &[FiniteDistribution<Hypothesis>], prior: &FiniteDistribution<Hypothesis>) -> Result<DivergenceValue> {
    let supports: Vec<Vec<(Hypothesis, Rational)>> =
        posteriors.iter().map(|q| q.support().map(|(h, p)| (*h, p.clone())).collect()).collect();
    let t = supports.len();
    let mut idx = vec![0usize; t];
    let mut exact_terms: Vec<LogSum> = Vec::new();
    let mut float_total = 0.0;
    loop {
        let mut q = Rational::one();
        let mut p = Rational::one();
        for (s, &i) in supports.iter().zip(&idx) {
            q *= &s[i].1;
            p *= prior.prob_of(&s[i].0);
        }
        if p.is_zero() {
            return Ok(DivergenceValue::Infinite);
        }
        if P::EXACT {
            exact_terms.push(LogSum::scaled_ln(&q, &(&q / &p)));
        } else {
            float_total += rational_to_f64(&q) * (crate::prob::ln_rational(&q) - crate::prob::ln_rational(&p));
        }
        let mut pos = 0;
        loop {
            if pos == t {
                return Ok(if P::EXACT {
                    DivergenceValue::Exact(LogSum::sum(exact_terms.iter()))
                } else {
                    DivergenceValue::Float(float_total.max(0.0))
                });
            }
            idx[pos] += 1;
            if idx[pos] < supports[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::kl;
    use crate::exec::Executor;
    use crate::learners::{finite_class_weak_learner, measure_weak_learner, rejection_sampler, WeakParams};
    use crate::prob::{rational, LogProb};
    use crate::types::{Domain, HypothesisClass};
    use rand::Rng;

    fn weak_with(class: &HypothesisClass, k: usize, gamma: Rational, b: Rational) -> crate::learners::RejectionSampler {
        finite_class_weak_learner(class, class.uniform_prior(), k)
            .unwrap()
            .with_weak_params(WeakParams { k, gamma: Some(gamma), b: Some(b) })
    }

    #[test]
    fn config_examples() {
        let c = BoostConfig::new(rational(1, 4), rational(3, 2), 8).unwrap();
        assert_eq!(c.kl_gate, rational(12, 1));
        assert_eq!(c.resample_cap, 256);
        // 8 ln 16 / (1/16) = 354.9…
        assert_eq!(c.rounds(16), 356);
        assert_eq!(c.rounds(1), 1);
        for m in 2..200usize {
            let x = 8.0 * (m as f64).ln() / 0.0625;
            assert_eq!(c.rounds(m), x.ceil() as usize + 1, "m = {m}");
        }
        assert!(BoostConfig::new(rational(0, 1), rational(1, 1), 1).is_err());
        assert!(BoostConfig::new(rational(3, 4), rational(1, 1), 1).is_err());
        assert!(BoostConfig::new(rational(1, 4), rational(-1, 1), 1).is_err());
        assert!(BoostConfig::new(rational(1, 2), rational(0, 1), 1).is_ok());
    }

    #[test]
    fn single_point_sample() {
        let class = HypothesisClass::thresholds(4).unwrap();
        let w = weak_with(&class, 2, rational(1, 4), rational(2, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let s = LabeledSample::labeled_by(&class.members()[1], &[2]);
        let (h, tr) = boost(&w, &cfg, &s, 1).unwrap();
        assert_eq!(tr.rounds, 1);
        assert_eq!(h.label(2), s.pairs()[0].y);
        assert!(tr.interpolates());
    }

    #[test]
    fn perfect_weak_learner() {
        // k covers the whole sample often enough; γ = 1/2 only changes T and the gate
        let class = HypothesisClass::thresholds(6).unwrap();
        let w = weak_with(&class, 12, rational(1, 2), rational(2, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let target = class.members()[3];
        let s = LabeledSample::labeled_by(&target, &[0, 5, 2, 3]);
        let (h, tr) = boost(&w, &cfg, &s, 7).unwrap();
        assert!(tr.interpolates());
        assert!(s.is_consistent_with(&h));
        assert!(tr.history.iter().all(|r| r.kl_trace.len() == 1 + r.resamples as usize));
    }

    #[test]
    fn non_realizable_sample_errors() {
        let class = HypothesisClass::thresholds(4).unwrap();
        let w = weak_with(&class, 2, rational(1, 4), rational(2, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let s = LabeledSample::new(Domain::new(4).unwrap(), vec![Example::new(0, true), Example::new(3, false)]).unwrap();
        assert_eq!(boost(&w, &cfg, &s, 0).unwrap_err(), Error::NoConsistentTarget);
    }

    #[test]
    fn gate_failure_surfaces() {
        // b = 0 makes the gate 0, which no nonempty informative subsample passes
        let class = HypothesisClass::thresholds(4).unwrap();
        let w = weak_with(&class, 2, rational(1, 4), rational(0, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap().with_resample_cap(5);
        let s = LabeledSample::labeled_by(&class.members()[1], &[0, 1, 2, 3]);
        match boost(&w, &cfg, &s, 0) {
            Err(Error::GateNeverPassed { attempts, observed, .. }) => {
                assert_eq!(attempts, 5);
                assert_eq!(observed.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boosted_prior_examples() {
        let d = Domain::new(2).unwrap();
        let uniform = FiniteDistribution::uniform(d.all_functions().unwrap()).unwrap();
        let one = boosted_prior::<Rational>(&uniform, &rational(1, 4), &[1], 1 << 20).unwrap();
        assert_eq!(one.truncation(), 1);
        assert_eq!(*one.component(1).unwrap(), uniform);
        let h = Hypothesis::threshold(2, 1);
        let point = boosted_prior::<Rational>(&FiniteDistribution::point_mass(h), &rational(1, 4), &[4], 1 << 20).unwrap();
        assert_eq!(point.flatten(), FiniteDistribution::point_mass(h));

        // P*_3 by enumerating the 64 triples
        let p3 = boosted_prior_to::<Rational>(&uniform, 3, 1 << 20).unwrap();
        let all = d.all_functions().unwrap();
        let mut expect = std::collections::BTreeMap::<Hypothesis, Rational>::new();
        for a in &all {
            for b in &all {
                for c in &all {
                    *expect.entry(majority(&[*a, *b, *c]).unwrap()).or_insert_with(Rational::zero) += rational(1, 64);
                }
            }
        }
        let got: Vec<(Hypothesis, Rational)> = p3.component(3).unwrap().support().map(|(h, p)| (*h, p.clone())).collect();
        let want: Vec<(Hypothesis, Rational)> = expect.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        assert_eq!(got, want);
        let z = rational(1, 1) + rational(1, 4) + rational(1, 9);
        assert_eq!(p3.z_l(), &z);
    }

    #[test]
    fn ledger_exact_on_small_fixture() {
        // n = 2, T = 3: data processing checked against the 64-atom joint
        let class = HypothesisClass::full(2).unwrap();
        let w = weak_with(&class, 1, rational(1, 2), rational(1, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let s = LabeledSample::labeled_by(&Hypothesis::threshold(2, 1), &[0, 1]);
        assert_eq!(cfg.rounds(2), 24);
        let (_, tr) = boost(&w, &cfg, &s, 3).unwrap();
        let mut short = tr.clone();
        short.rounds = 3;
        short.history.truncate(3);
        let pstar = boosted_prior_to::<Rational>(w.prior().unwrap(), 3, 1 << 20).unwrap();
        let ledger = kl_ledger(&short, &w, &pstar).unwrap();
        assert!(ledger.exact);
        assert_eq!(ledger.joint_method, "enumeration");
        assert!(ledger.holds());
        assert!(ledger.joint.compare(&ledger.sum_per_round, 0.0).is_eq());

        let pstar_full = boosted_prior::<Rational>(w.prior().unwrap(), &cfg.gamma, &[2], 1 << 20).unwrap();
        let full = kl_ledger(&tr, &w, &pstar_full).unwrap();
        assert!(full.exact && full.holds());
    }

    #[test]
    fn ledger_trivial_cases() {
        // T = 1: collapses to the gate
        let class = HypothesisClass::thresholds(4).unwrap();
        let w = weak_with(&class, 1, rational(1, 4), rational(2, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let s = LabeledSample::labeled_by(&class.members()[0], &[1]);
        let (_, tr) = boost(&w, &cfg, &s, 0).unwrap();
        let pstar = boosted_prior_to::<Rational>(w.prior().unwrap(), 1, 1 << 20).unwrap();
        let ledger = kl_ledger(&tr, &w, &pstar).unwrap();
        assert!(ledger.majority.compare(&ledger.per_round[0], 0.0).is_eq());

        // point-mass prior: every term is zero
        let h = Hypothesis::threshold(3, 1);
        let single = HypothesisClass::new(Domain::new(3).unwrap(), vec![h]).unwrap();
        let pw = finite_class_weak_learner(&single, FiniteDistribution::point_mass(h), 2)
            .unwrap()
            .with_weak_params(WeakParams { k: 2, gamma: Some(rational(1, 2)), b: Some(rational(1, 100)) });
        let cfg = BoostConfig::from_rule(&pw).unwrap();
        let s = LabeledSample::labeled_by(&h, &[0, 1, 2]);
        let (out, tr) = boost(&pw, &cfg, &s, 0).unwrap();
        assert_eq!(out, h);
        let pstar = boosted_prior::<Rational>(pw.prior().unwrap(), &cfg.gamma, &[3], 1 << 20).unwrap();
        let ledger = kl_ledger(&tr, &pw, &pstar).unwrap();
        assert_eq!(ledger.sum_per_round.to_f64(), 0.0);
        assert_eq!(ledger.majority.to_f64(), 0.0);
        assert_eq!(ledger.total.to_f64(), 0.0);
    }

    #[test]
    fn ledger_log_mode_matches_exact_mode() {
        let class = HypothesisClass::thresholds(5).unwrap();
        let w = weak_with(&class, 2, rational(1, 2), rational(1, 1));
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let s = LabeledSample::labeled_by(&class.members()[2], &[0, 4, 2]);
        let (_, tr) = boost(&w, &cfg, &s, 9).unwrap();
        let exact = kl_ledger(&tr, &w, &boosted_prior_to::<Rational>(w.prior().unwrap(), tr.rounds, 1 << 20).unwrap()).unwrap();
        let logs = kl_ledger(&tr, &w, &boosted_prior_to::<LogProb>(w.prior().unwrap(), tr.rounds, 1 << 20).unwrap()).unwrap();
        assert!(!logs.exact);
        assert!((exact.majority.to_f64() - logs.majority.to_f64()).abs() < 1e-9);
        assert!((exact.total.to_f64() - logs.total.to_f64()).abs() < 1e-9);
    }

    #[test]
    fn thresholds_interpolate_with_measured_edge() {
        let class = HypothesisClass::thresholds(32).unwrap();
        let base = finite_class_weak_learner(&class, class.uniform_prior(), 8).unwrap();
        let meas = measure_weak_learner(&base, &class, 2000, 0, 1, Executor::default()).unwrap();
        let w = base.with_weak_params(WeakParams { k: 8, gamma: Some(meas.gamma.clone()), b: Some(meas.b.clone()) });
        let cfg = BoostConfig::from_rule(&w).unwrap();
        let pstar = boosted_prior::<LogProb>(w.prior().unwrap(), &cfg.gamma, &[16], 1 << 20).unwrap();
        let mut rng = rng_from_seed(4);
        for trial in 0..3 {
            let target = class.members()[rng.gen_range(0..32)];
            let points: Vec<u32> = (0..16).map(|_| rng.gen_range(0..32)).collect();
            let s = LabeledSample::labeled_by(&target, &points);
            let (h, tr) = boost(&w, &cfg, &s, trial).unwrap();
            assert!(s.is_consistent_with(&h));
            assert!(tr.regret <= tr.regret_bound);
            let ledger = kl_ledger(&tr, &w, &pstar).unwrap();
            assert!(ledger.holds());
        }
    }

    #[test]
    fn joint_enumeration_matches_product_kl() {
        let prior = FiniteDistribution::uniform(Domain::new(2).unwrap().all_functions().unwrap()).unwrap();
        let r = rejection_sampler(prior.clone()).unwrap();
        let qs: Vec<FiniteDistribution<Hypothesis>> = [vec![(0u32, true)], vec![(1, false)], vec![]]
            .iter()
            .map(|p| r.posterior(&LabeledSample::new(Domain::new(2).unwrap(), p.iter().map(|&(x, y)| Example::new(x, y)).collect()).unwrap()).unwrap())
            .collect();
        let joint = joint_kl::<Rational>(&qs, &prior).unwrap();
        let sum = qs.iter().map(|q| kl(q, &prior).unwrap()).fold(DivergenceValue::zero(), |a, d| a.add(&d));
        assert!(joint.compare(&sum, 0.0).is_eq());
        assert!((joint.to_f64() - 2.0 * 2f64.ln()).abs() < 1e-12);
    }
}
