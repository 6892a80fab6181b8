//! Checkers for the stability definitions, exact by enumeration or Monte Carlo.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::dist::{mixture, rng_from_seed, CdfTable};
use crate::divergences::{hockey_stick, kl, renyi, tv, Alpha, DivergenceValue, Eps, Real, FLOAT_COMPARE_TOL};
use crate::error::{Error, Result};
use crate::exact::LogSum;
use crate::exec::{shard_seed, Executor};
use crate::learners::{ordered_samples, LearningRule};
use crate::prob::{format_rational, rational_to_f64, Prob, Rational};
use crate::types::{empirical_loss, population_loss, Domain, Example, Hypothesis, LabeledSample, PopulationDistribution};
use crate::FiniteDistribution;

/// `z` for a two-sided 99% normal interval.
pub const Z99: f64 = 2.5758293035489004;

/// Weighted list of ordered samples.
pub type SampleLaw = Vec<(LabeledSample, Rational)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

/// Definition tag plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum StabilityBudget {
    Dp { eps: Eps, delta: Rational },
    Replicability { rho: Rational },
    GlobalStability { eta: Rational },
    MutualInformation { bound: f64 },
    KlStability { g: f64, beta: f64 },
    Tv { bound: f64 },
    PerfectGeneralization { eps: Eps, delta: Rational, beta: Rational },
    MaxInformation { eps: Eps, delta: Rational },
    PacBayes { beta: Rational },
}

impl StabilityBudget {
    pub fn tag(&self) -> &'static str {
        match self {
            StabilityBudget::Dp { .. } => "dp",
            StabilityBudget::Replicability { .. } => "rep",
            StabilityBudget::GlobalStability { .. } => "gs",
            StabilityBudget::MutualInformation { .. } => "mi",
            StabilityBudget::KlStability { .. } => "kl",
            StabilityBudget::Tv { .. } => "tv",
            StabilityBudget::PerfectGeneralization { .. } => "pg",
            StabilityBudget::MaxInformation { .. } => "maxinfo",
            StabilityBudget::PacBayes { .. } => "pacbayes",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |r: &Rational, what: &str| {
            if r.is_negative() || *r > Rational::one() {
                Err(Error::InvalidParameter(format!("{what} = {} outside [0, 1]", format_rational(r))))
            } else {
                Ok(())
            }
        };
        let nonneg = |v: f64, what: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} = {v} must be finite and nonnegative")))
            }
        };
        match self {
            StabilityBudget::Dp { delta, .. } | StabilityBudget::MaxInformation { delta, .. } => unit(delta, "delta"),
            StabilityBudget::Replicability { rho } => unit(rho, "rho"),
            StabilityBudget::GlobalStability { eta } => unit(eta, "eta"),
            StabilityBudget::MutualInformation { bound } | StabilityBudget::Tv { bound } => nonneg(*bound, "bound"),
            StabilityBudget::KlStability { g, beta } => {
                nonneg(*g, "g")?;
                if *beta > 1.0 {
                    return Err(Error::InvalidParameter(format!("beta = {beta} > 1")));
                }
                nonneg(*beta, "beta")
            }
            StabilityBudget::PerfectGeneralization { delta, beta, .. } => {
                unit(delta, "delta")?;
                unit(beta, "beta")
            }
            StabilityBudget::PacBayes { beta } => {
                if beta.is_zero() {
                    return Err(Error::InvalidParameter("beta must be positive".into()));
                }
                unit(beta, "beta")
            }
        }
    }
}

/// What made a check pass or fail.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<LabeledSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub definition: &'static str,
    pub m: usize,
    pub exact: bool,
    pub estimate: f64,
    /// Exact rendering when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate_exact: Option<String>,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl StabilityReport {
    fn exact(definition: &'static str, m: usize, estimate: f64, rendered: String) -> Self {
        StabilityReport {
            definition,
            m,
            exact: true,
            estimate,
            estimate_exact: Some(rendered),
            radius: 0.0,
            trials: None,
            threshold: None,
            pass: None,
            witness: None,
        }
    }

    fn monte_carlo(definition: &'static str, m: usize, estimate: f64, radius: f64, trials: u64) -> Self {
        StabilityReport {
            definition,
            m,
            exact: false,
            estimate,
            estimate_exact: None,
            radius,
            trials: Some(trials),
            threshold: None,
            pass: None,
            witness: None,
        }
    }
}

impl StabilityReport {
    /// Pass iff `estimate + radius ≤ bound`.
    pub fn judge_at_most(&mut self, bound: f64) -> bool {
        let ok = self.estimate + self.radius <= bound + FLOAT_COMPARE_TOL;
        self.threshold = Some(bound);
        self.pass = Some(ok);
        ok
    }

    /// Pass iff `estimate − radius ≥ bound`.
    pub fn judge_at_least(&mut self, bound: f64) -> bool {
        let ok = self.estimate - self.radius >= bound - FLOAT_COMPARE_TOL;
        self.threshold = Some(bound);
        self.pass = Some(ok);
        ok
    }
}

/// Wilson score interval at 99%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z99 * Z99;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Law of an ordered `m`-tuple drawn i.i.d. from `pop`.
pub fn sample_law(pop: &PopulationDistribution, m: usize, budget: u128) -> Result<SampleLaw> {
    let support: Vec<(Example, Rational)> = pop.support().map(|(e, p)| (*e, p.clone())).collect();
    let needed = (support.len() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut out = Vec::with_capacity(needed as usize);
    let mut idx = vec![0usize; m];
    loop {
        let mut p = Rational::one();
        let mut pairs = Vec::with_capacity(m);
        for &i in &idx {
            p *= &support[i].1;
            pairs.push(support[i].0);
        }
        out.push((LabeledSample::new(Domain::new(64).expect("max domain"), pairs)?, p));
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < support.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Uniform law over a list of samples.
pub fn uniform_law(samples: Vec<LabeledSample>) -> Result<SampleLaw> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = Rational::new(BigInt::one(), BigInt::from(samples.len()));
    Ok(samples.into_iter().map(|s| (s, p.clone())).collect())
}

struct PopSampler<'a> {
    pop: &'a PopulationDistribution,
    table: CdfTable,
}

impl<'a> PopSampler<'a> {
    fn new(pop: &'a PopulationDistribution) -> Self {
        PopSampler { pop, table: CdfTable::new(pop) }
    }

    fn draw(&self, m: usize, rng: &mut impl rand::RngCore) -> LabeledSample {
        let pairs = (0..m).map(|_| self.pop.atoms()[self.table.sample_with(rng)]).collect();
        LabeledSample::new(Domain::new(64).expect("max domain"), pairs).expect("population examples")
    }
}

fn posteriors(rule: &dyn LearningRule, law: &SampleLaw) -> Result<Vec<FiniteDistribution<Hypothesis>>> {
    Executor::default().map_slice(law, |(s, _)| rule.posterior(s)).into_iter().collect()
}

/// Samples differing from `s` in exactly one position.
pub fn neighbors(s: &LabeledSample, domain: Domain) -> Vec<LabeledSample> {
    let examples = domain.examples();
    let mut out = Vec::new();
    for i in 0..s.len() {
        for e in &examples {
            if *e != s.pairs()[i] {
                let mut pairs = s.pairs().to_vec();
                pairs[i] = *e;
                out.push(LabeledSample::new(domain, pairs).expect("domain examples"));
            }
        }
    }
    out
}

/// `(ε, δ)`-DP: the largest two-sided hockey-stick over neighboring pairs.
///
/// Exact mode scans all `(2n)^m` samples; Monte Carlo mode searches random
/// neighbor pairs and reports the worst `δ` found (a lower bound). Pairs
/// where the rule has no output (an interpolating rule on an unrealizable
/// sample) are skipped and counted in the witness note.
pub fn dp_check(
    rule: &dyn LearningRule,
    m: usize,
    eps: &Eps,
    delta: &Rational,
    mode: Mode,
    budget: u128,
) -> Result<StabilityReport> {
    let domain = rule.domain();
    let pairs: Vec<(LabeledSample, LabeledSample)> = match mode {
        Mode::Exact => {
            let samples = ordered_samples(domain, m, budget)?;
            samples.iter().flat_map(|s| neighbors(s, domain).into_iter().map(move |t| (s.clone(), t))).collect()
        }
        Mode::MonteCarlo { trials, seed } => {
            let examples = domain.examples();
            let mut rng = rng_from_seed(seed);
            (0..trials)
                .filter_map(|_| {
                    use rand::Rng;
                    if m == 0 {
                        return None;
                    }
                    let pairs: Vec<Example> = (0..m).map(|_| examples[rng.gen_range(0..examples.len())]).collect();
                    let s = LabeledSample::new(domain, pairs).expect("domain examples");
                    let ns = neighbors(&s, domain);
                    let t = ns[rng.gen_range(0..ns.len())].clone();
                    Some((s, t))
                })
                .collect()
        }
    };
    let mut cache: BTreeMap<LabeledSample, Option<FiniteDistribution<Hypothesis>>> = BTreeMap::new();
    let mut worst: Option<(Real, usize)> = None;
    let mut undefined = 0u64;
    for (i, (s, t)) in pairs.iter().enumerate() {
        for x in [s, t] {
            if !cache.contains_key(x) {
                cache.insert(x.clone(), defined_posterior(rule, x)?);
            }
        }
        let (Some(ps), Some(pt)) = (&cache[s], &cache[t]) else {
            undefined += 1;
            continue;
        };
        let fwd = hockey_stick(eps, ps, pt)?;
        let bwd = hockey_stick(eps, pt, ps)?;
        let d = if fwd.le(&bwd, 0.0) { bwd } else { fwd };
        let better = match &worst {
            None => true,
            Some((w, _)) => !d.le(w, 0.0),
        };
        if better {
            worst = Some((d, i));
        }
    }
    let (value, witness) = match worst {
        Some((d, i)) => (d, Some(Witness { samples: vec![pairs[i].0.clone(), pairs[i].1.clone()], ..Default::default() })),
        None => (Real::zero(), None),
    };
    let witness = match (witness, undefined) {
        (w, 0) => w,
        (w, k) => {
            let mut w = w.unwrap_or_default();
            w.note = format!("{k} neighbor pairs skipped: the rule has no output on an unrealizable sample");
            Some(w)
        }
    };
    let pass = value.le(&Real::Exact(delta.clone()), FLOAT_COMPARE_TOL);
    let mut r = match mode {
        Mode::Exact => StabilityReport::exact("dp", m, value.to_f64(), value.render()),
        Mode::MonteCarlo { trials, .. } => {
            let mut r = StabilityReport::monte_carlo("dp", m, value.to_f64(), 0.0, trials);
            r.estimate_exact = Some(value.render());
            r
        }
    };
    r.exact = matches!(mode, Mode::Exact) && value.is_exact();
    r.threshold = Some(rational_to_f64(delta));
    r.pass = Some(pass);
    r.witness = witness;
    Ok(r)
}

/// `None` for samples on which an interpolating rule has no output.
fn defined_posterior(rule: &dyn LearningRule, s: &LabeledSample) -> Result<Option<FiniteDistribution<Hypothesis>>> {
    match rule.posterior(s) {
        Ok(p) => Ok(Some(p)),
        Err(Error::PriorNeverConsistent) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `Pr[A(S₁; r) = A(S₂; r)]` with `S₁, S₂ ∼ D^m` and shared coins `r`.
pub fn replicability(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    mode: Mode,
    budget: u128,
) -> Result<StabilityReport> {
    match mode {
        Mode::Exact => {
            let law = sample_law(pop, m, budget)?;
            let needed = (law.len() as u128).saturating_mul(law.len() as u128);
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget });
            }
            let rows: Vec<Result<Rational>> = Executor::default().map(law.len(), |i| {
                let mut acc = Rational::zero();
                for (s2, p2) in &law {
                    acc += rule.agreement(&law[i].0, s2)? * p2;
                }
                Ok(acc * &law[i].1)
            });
            let mut rho = Rational::zero();
            for r in rows {
                rho += r?;
            }
            Ok(StabilityReport::exact("rep", m, rational_to_f64(&rho), format_rational(&rho)))
        }
        Mode::MonteCarlo { trials, seed } => {
            let sampler = PopSampler::new(pop);
            let hits: Vec<Result<bool>> = Executor::default().map(trials as usize, |i| {
                let mut rng = rng_from_seed(shard_seed(seed, i));
                let s1 = sampler.draw(m, &mut rng);
                let s2 = sampler.draw(m, &mut rng);
                let r = rand::Rng::gen::<u64>(&mut rng);
                Ok(rule.draw(&s1, r)? == rule.draw(&s2, r)?)
            });
            let mut k = 0;
            for h in hits {
                k += h? as u64;
            }
            let (lo, hi) = wilson_interval(k, trials);
            let est = k as f64 / trials as f64;
            Ok(StabilityReport::monte_carlo("rep", m, est, (est - lo).max(hi - est), trials))
        }
    }
}

/// `ρ = Σ_r Pr(r) Σ_h Pr_S[A(S; r) = h]²`, for rules with finite coins.
pub fn replicability_by_collision(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    budget: u128,
) -> Result<Rational> {
    let coins = rule.coins().ok_or_else(|| Error::NotSeedSplittable(rule.name()))?;
    let law = sample_law(pop, m, budget)?;
    let mut rho = Rational::zero();
    for (r, pr) in coins.support() {
        let mut by_h: BTreeMap<Hypothesis, Rational> = BTreeMap::new();
        for (s, ps) in &law {
            *by_h.entry(rule.decide(s, *r)?).or_insert_with(Rational::zero) += ps;
        }
        let sq: Rational = by_h.values().map(|p| p * p).sum();
        rho += sq * pr;
    }
    Ok(rho)
}

/// `ρ`-replicable ⇒ `((ρ−ν)/(1−ν), ν)`-replicable, for `ν < 1`.
pub fn rho_to_eta_nu(rho: &Rational, nu: &Rational) -> Result<(Rational, Rational)> {
    let one = Rational::one();
    for (v, what) in [(rho, "rho"), (nu, "nu")] {
        if v.is_negative() || *v > one {
            return Err(Error::InvalidParameter(format!("{what} = {} outside [0, 1]", format_rational(v))));
        }
    }
    if *nu == one {
        return Err(Error::InvalidParameter("nu must be below 1".into()));
    }
    Ok(((rho - nu) / (&one - nu), nu.clone()))
}

/// `(η, ν)`-replicable ⇒ `max(0, 2η+ν−2)`-replicable.
///
/// A good `r` (mass `ν`) makes both runs hit `h_r` with probability `≥ η²`,
/// so `ρ ≥ νη² ≥ 2η+ν−2`.
pub fn eta_nu_to_rho(eta: &Rational, nu: &Rational) -> Result<Rational> {
    let one = Rational::one();
    for (v, what) in [(eta, "eta"), (nu, "nu")] {
        if v.is_negative() || *v > one {
            return Err(Error::InvalidParameter(format!("{what} = {} outside [0, 1]", format_rational(v))));
        }
    }
    let two = Rational::from_integer(BigInt::from(2));
    let r = &two * eta + nu - &two;
    Ok(if r.is_negative() { Rational::zero() } else { r })
}

/// `E_S[A(S)]`.
pub fn dd_prior_from_marginal(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    budget: u128,
) -> Result<FiniteDistribution<Hypothesis>> {
    let law = sample_law(pop, m, budget)?;
    let posts = posteriors(rule, &law)?;
    marginal_of(&law, &posts)
}

fn marginal_of(law: &SampleLaw, posts: &[FiniteDistribution<Hypothesis>]) -> Result<FiniteDistribution<Hypothesis>> {
    let parts: Vec<(Rational, &FiniteDistribution<Hypothesis>)> =
        law.iter().zip(posts).map(|((_, p), q)| (p.clone(), q)).collect();
    mixture(&parts)
}

/// Mode of the output law and its mass `η`.
pub fn global_stability(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    mode: Mode,
    budget: u128,
) -> Result<StabilityReport> {
    match mode {
        Mode::Exact => {
            let marginal = dd_prior_from_marginal(rule, pop, m, budget)?;
            let (h, eta) = mode_of(marginal.support().map(|(h, p)| (*h, p.clone())));
            let mut r = StabilityReport::exact("gs", m, rational_to_f64(&eta), format_rational(&eta));
            r.witness = Some(Witness { hypothesis: Some(h), ..Default::default() });
            Ok(r)
        }
        Mode::MonteCarlo { trials, seed } => {
            let sampler = PopSampler::new(pop);
            let outs: Vec<Result<Hypothesis>> = Executor::default().map(trials as usize, |i| {
                let mut rng = rng_from_seed(shard_seed(seed, i));
                let s = sampler.draw(m, &mut rng);
                rule.draw(&s, rand::Rng::gen(&mut rng))
            });
            let mut counts: BTreeMap<Hypothesis, u64> = BTreeMap::new();
            for h in outs {
                *counts.entry(h?).or_default() += 1;
            }
            let (h, k) = mode_of(counts.into_iter());
            let (lo, hi) = wilson_interval(k, trials);
            let est = k as f64 / trials as f64;
            let mut r = StabilityReport::monte_carlo("gs", m, est, (est - lo).max(hi - est), trials);
            r.witness = Some(Witness { hypothesis: Some(h), ..Default::default() });
            Ok(r)
        }
    }
}

/// Heaviest atom; ties go to the smallest hypothesis.
fn mode_of<W: PartialOrd + Default>(items: impl Iterator<Item = (Hypothesis, W)>) -> (Hypothesis, W) {
    let mut best: Option<(Hypothesis, W)> = None;
    for (h, w) in items {
        if best.as_ref().map(|(_, b)| w > *b).unwrap_or(true) {
            best = Some((h, w));
        }
    }
    best.unwrap_or((Hypothesis::zeros(1), W::default()))
}

/// `I(A(S); S) = Σ_s Pr(s)·KL(A(s) ‖ E_S[A(S)])`.
pub fn mutual_information(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    budget: u128,
) -> Result<(DivergenceValue, StabilityReport)> {
    let law = sample_law(pop, m, budget)?;
    let posts = posteriors(rule, &law)?;
    let marginal = marginal_of(&law, &posts)?;
    let info = mi_from(&law, &posts, &marginal)?;
    let r = StabilityReport::exact("mi", m, info.to_f64(), info.render());
    Ok((info, r))
}

fn mi_from(
    law: &SampleLaw,
    posts: &[FiniteDistribution<Hypothesis>],
    marginal: &FiniteDistribution<Hypothesis>,
) -> Result<DivergenceValue> {
    let mut total = DivergenceValue::zero();
    for ((_, p), q) in law.iter().zip(posts) {
        total = total.add(&kl(q, marginal)?.scale(p));
    }
    Ok(total)
}

/// `KL ≥ √(m·I)`, decided on rigorous intervals; undecided counts as true.
fn kl_at_least_sqrt(d: &LogSum, m: usize, info: &LogSum) -> bool {
    let mm = Rational::from_integer(BigInt::from(m));
    for prec in [64u64, 128, 256, 512, 1024] {
        let (klo, khi) = d.bounds(prec);
        let (ilo, ihi) = info.bounds(prec);
        let klo = if klo.is_negative() { Rational::zero() } else { klo };
        if &klo * &klo > &mm * &ihi {
            return true;
        }
        if &khi * &khi < &mm * &ilo {
            return false;
        }
    }
    true
}

/// Markov step from mutual information to KL stability:
/// `Pr_S[KL(A(S)‖P_D) ≥ √(m·I)] ≤ √(I/m)` with `P_D = E_S[A(S)]`.
///
/// When `I = 0` the event is taken as `KL > 0` (Markov needs a positive threshold).
pub fn dd_kl_stability_check(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    budget: u128,
) -> Result<StabilityReport> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let law = sample_law(pop, m, budget)?;
    let posts = posteriors(rule, &law)?;
    let marginal = marginal_of(&law, &posts)?;
    let info = match mi_from(&law, &posts, &marginal)? {
        DivergenceValue::Exact(l) => l,
        other => return Err(Error::InvalidParameter(format!("mutual information not exact: {}", other.render()))),
    };
    let info_zero = info.signum() == Some(Ordering::Equal);
    let mut prob = Rational::zero();
    let mut worst: Option<(f64, usize)> = None;
    for (i, ((_, p), q)) in law.iter().zip(&posts).enumerate() {
        let d = match kl(q, &marginal)? {
            DivergenceValue::Exact(l) => l,
            DivergenceValue::Infinite => return Err(Error::InvariantViolation("posterior outside its own marginal".into())),
            DivergenceValue::Float(_) => unreachable!("exact inputs"),
        };
        let hit = if info_zero { d.signum() == Some(Ordering::Greater) } else { kl_at_least_sqrt(&d, m, &info) };
        if hit {
            prob += p;
        }
        let v = d.to_f64();
        if worst.map(|(w, _)| v > w).unwrap_or(true) {
            worst = Some((v, i));
        }
    }
    let mm = Rational::from_integer(BigInt::from(m));
    let pass = if info_zero {
        prob.is_zero()
    } else {
        info.compare(&LogSum::constant(&prob * &prob * &mm)) != Some(Ordering::Less)
    };
    let mut r = StabilityReport::exact("kl", m, rational_to_f64(&prob), format_rational(&prob));
    r.threshold = Some((info.to_f64() / m as f64).sqrt());
    r.pass = Some(pass);
    r.witness = worst.map(|(v, i)| Witness {
        samples: vec![law[i].0.clone()],
        note: format!("I = {:.6e}, max KL = {v:.6e}", info.to_f64()),
        ..Default::default()
    });
    Ok(r)
}

/// `E_S[TV(A(S), P)]`; `P = E_S[A(S)]` when no prior is given.
pub fn tv_stability(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    prior: Option<&FiniteDistribution<Hypothesis>>,
    mode: Mode,
    budget: u128,
) -> Result<StabilityReport> {
    match mode {
        Mode::Exact => {
            let law = sample_law(pop, m, budget)?;
            let posts = posteriors(rule, &law)?;
            let owned;
            let reference = match prior {
                Some(p) => p,
                None => {
                    owned = marginal_of(&law, &posts)?;
                    &owned
                }
            };
            let mut total = Rational::zero();
            for ((_, p), q) in law.iter().zip(&posts) {
                match tv(q, reference)? {
                    Real::Exact(d) => total += d * p,
                    Real::Float(_) => unreachable!("exact inputs"),
                }
            }
            Ok(StabilityReport::exact("tv", m, rational_to_f64(&total), format_rational(&total)))
        }
        Mode::MonteCarlo { trials, seed } => {
            let reference = prior.ok_or_else(|| {
                Error::InvalidParameter("Monte Carlo TV stability needs an explicit prior".into())
            })?;
            let sampler = PopSampler::new(pop);
            let vals: Vec<Result<f64>> = Executor::default().map(trials as usize, |i| {
                let mut rng = rng_from_seed(shard_seed(seed, i));
                let s = sampler.draw(m, &mut rng);
                Ok(tv(&rule.posterior(&s)?, reference)?.to_f64())
            });
            let mut sum = 0.0;
            for v in vals {
                sum += v?;
            }
            let est = sum / trials as f64;
            Ok(StabilityReport::monte_carlo("tv", m, est, crate::learners::hoeffding_radius(trials, 1.0), trials))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PgMode {
    Pure,
    Approx,
}

fn eps_value(eps: &Eps) -> DivergenceValue {
    match eps.as_logsum() {
        Some(l) => DivergenceValue::Exact(l),
        None => DivergenceValue::Float(eps.to_f64()),
    }
}

/// Per-sample perfect-generalization check against a fixed prior.
///
/// Pure: `R_∞(A(S)‖P) ≤ ε`. Approx: `max_O A(S)(O) − e^ε P(O) ≤ δ`.
/// Reports `Pr_S[check holds]`, passing when it is at least `1 − β`.
pub fn perfect_generalization(
    rule: &dyn LearningRule,
    law: &SampleLaw,
    prior: &FiniteDistribution<Hypothesis>,
    eps: &Eps,
    delta: &Rational,
    mode: PgMode,
    beta: &Rational,
) -> Result<StabilityReport> {
    let posts = posteriors(rule, law)?;
    let eps_v = eps_value(eps);
    let mut held = Rational::zero();
    let mut worst: Option<(f64, usize, String)> = None;
    let mut all_exact = true;
    for (i, ((_, p), q)) in law.iter().zip(&posts).enumerate() {
        let (ok, score, rendered) = match mode {
            PgMode::Pure => {
                let d = renyi(&Alpha::Infinity, q, prior)?;
                all_exact &= d.is_exact() || d.is_infinite();
                (d.le(&eps_v, FLOAT_COMPARE_TOL), d.to_f64(), d.render())
            }
            PgMode::Approx => {
                let d = hockey_stick(eps, q, prior)?;
                all_exact &= d.is_exact();
                (d.le(&Real::Exact(delta.clone()), FLOAT_COMPARE_TOL), d.to_f64(), d.render())
            }
        };
        if ok {
            held += p;
        }
        if worst.as_ref().map(|(w, _, _)| score > *w).unwrap_or(true) {
            worst = Some((score, i, rendered));
        }
    }
    let definition = match mode {
        PgMode::Pure => "pg-pure",
        PgMode::Approx => "pg-approx",
    };
    let mut r = StabilityReport::exact(definition, law.first().map(|(s, _)| s.len()).unwrap_or(0), rational_to_f64(&held), format_rational(&held));
    r.exact = all_exact;
    let need = Rational::one() - beta;
    r.threshold = Some(rational_to_f64(&need));
    r.pass = Some(held >= need);
    r.witness = worst.map(|(_, i, rendered)| Witness {
        samples: vec![law[i].0.clone()],
        note: format!("worst per-sample value {rendered}"),
        ..Default::default()
    });
    Ok(r)
}

/// `δ = max_O Pr[(A(S),S) ∈ O] − e^ε Pr[(A(S),S') ∈ O]` with `S'` an independent copy.
pub fn max_information(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    eps: &Eps,
    budget: u128,
) -> Result<StabilityReport> {
    let (joint, product) = information_joints(rule, pop, m, budget)?;
    let d = hockey_stick(eps, &joint, &product)?;
    let mut r = StabilityReport::exact("maxinfo", m, d.to_f64(), d.render());
    r.exact = d.is_exact();
    Ok(r)
}

type JointLaw = FiniteDistribution<(Hypothesis, LabeledSample)>;

/// True joint of `(A(S), S)` and the product of its marginals.
pub fn information_joints(
    rule: &dyn LearningRule,
    pop: &PopulationDistribution,
    m: usize,
    budget: u128,
) -> Result<(JointLaw, JointLaw)> {
    let law = sample_law(pop, m, budget)?;
    let posts = posteriors(rule, &law)?;
    let marginal = marginal_of(&law, &posts)?;
    let needed = (law.len() as u128).saturating_mul(marginal.support_size() as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut joint = Vec::new();
    let mut product = Vec::new();
    for ((s, p), q) in law.iter().zip(&posts) {
        for (h, ph) in marginal.support() {
            joint.push(((*h, s.clone()), q.prob_of(h) * p));
            product.push(((*h, s.clone()), ph * p));
        }
    }
    Ok((FiniteDistribution::from_pairs(joint)?, FiniteDistribution::from_pairs(product)?))
}

/// `L_S(Q) + √((KL(Q‖P) + ln(m/β)) / (2(m−1)))`.
pub fn pac_bayes_bound(empirical: f64, kl_value: f64, m: usize, beta: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter("PAC-Bayes needs m ≥ 2".into()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} outside (0, 1]")));
    }
    if kl_value.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(empirical + ((kl_value + (m as f64 / beta).ln()) / (2.0 * (m as f64 - 1.0))).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct PacBayesTrial {
    pub population_loss: f64,
    pub empirical_loss: f64,
    pub kl: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PacBayesReport {
    pub m: usize,
    pub beta: f64,
    pub trials: u64,
    pub violations: u64,
    pub rate: f64,
    pub wilson: (f64, f64),
    /// `β + 3·√(β(1−β)/trials)`.
    pub allowed: f64,
    pub pass: bool,
    pub mean_bound: f64,
    pub mean_population_loss: f64,
}

/// One bound evaluation for posterior `q` on sample `s`.
pub fn pac_bayes_trial<P: Prob>(
    prior: &FiniteDistribution<Hypothesis, P>,
    q: &FiniteDistribution<Hypothesis, P>,
    pop: &PopulationDistribution,
    s: &LabeledSample,
    beta: f64,
) -> Result<PacBayesTrial> {
    let mut ld = 0.0;
    let mut ls = 0.0;
    for (h, p) in q.support() {
        let w = p.as_f64();
        ld += w * rational_to_f64(&population_loss(pop, h));
        ls += w * rational_to_f64(&empirical_loss(s, h)?);
    }
    let d = kl(q, prior)?.to_f64();
    let bound = pac_bayes_bound(ls, d, s.len(), beta)?;
    Ok(PacBayesTrial { population_loss: ld, empirical_loss: ls, kl: d, bound, violated: ld > bound + FLOAT_COMPARE_TOL })
}

/// Empirical violation rate of the PAC-Bayes bound over `trials` samples
/// `S ∼ D^m`, with `posterior(S, seed)` giving the learner's output law.
pub fn pac_bayes_certificate<P: Prob>(
    prior: &FiniteDistribution<Hypothesis, P>,
    pop: &PopulationDistribution,
    m: usize,
    beta: &Rational,
    trials: u64,
    seed: u64,
    posterior: impl Fn(&LabeledSample, u64) -> Result<FiniteDistribution<Hypothesis, P>> + Sync,
) -> Result<(PacBayesReport, Vec<PacBayesTrial>)> {
    let b = rational_to_f64(beta);
    pac_bayes_bound(0.0, 0.0, m, b)?;
    let sampler = PopSampler::new(pop);
    let rows: Vec<Result<PacBayesTrial>> = Executor::default().map(trials as usize, |i| {
        let mut rng = rng_from_seed(shard_seed(seed, i));
        let s = sampler.draw(m, &mut rng);
        let q = posterior(&s, rand::Rng::gen(&mut rng))?;
        pac_bayes_trial(prior, &q, pop, &s, b)
    });
    let rows: Vec<PacBayesTrial> = rows.into_iter().collect::<Result<_>>()?;
    let violations = rows.iter().filter(|r| r.violated).count() as u64;
    let rate = violations as f64 / trials.max(1) as f64;
    let allowed = b + 3.0 * (b * (1.0 - b) / trials.max(1) as f64).sqrt();
    let n = rows.len().max(1) as f64;
    let report = PacBayesReport {
        m,
        beta: b,
        trials,
        violations,
        rate,
        wilson: wilson_interval(violations, trials),
        allowed,
        pass: rate <= allowed,
        mean_bound: rows.iter().map(|r| r.bound).sum::<f64>() / n,
        mean_population_loss: rows.iter().map(|r| r.population_loss).sum::<f64>() / n,
    };
    Ok((report, rows))
}

/// PAC-Bayes certificate for a rule's own posterior.
pub fn pac_bayes_for_rule(
    rule: &dyn LearningRule,
    prior: &FiniteDistribution<Hypothesis>,
    pop: &PopulationDistribution,
    m: usize,
    beta: &Rational,
    trials: u64,
    seed: u64,
) -> Result<PacBayesReport> {
    pac_bayes_certificate(prior, pop, m, beta, trials, seed, |s, _| rule.posterior(s)).map(|(r, _)| r)
}

/// Both sides of the subsample construction for one sample.
#[derive(Debug, Clone, Serialize)]
pub struct SubsampleWitness {
    pub m: usize,
    /// `m' = ⌈m ln(4m)⌉`.
    pub m_prime: usize,
    pub exact: bool,
    /// `C·ln m`, the certified per-sample KL cap.
    pub kl_cap: f64,
    pub c: f64,
    /// `k = 2C ln m`.
    pub k: f64,
    /// `KL(Q‖P*)` for `Q` the law of `A*(S')`.
    pub kl_q: f64,
    /// `E_{S'} KL(A*(S')‖P*)`, at most `kl_cap` when certified.
    pub mean_kl: f64,
    pub certificate_holds: bool,
    /// `Q(ℰ)` with `ℰ = {h : L_S(h) = 0}`.
    pub q_event: f64,
    /// `1 − m(1 − 1/m)^{m'}`.
    pub q_event_floor: f64,
    /// `Q[ln(Q/P*) > k]`.
    pub tail: f64,
    /// `KL(Q‖P*)/k` as stated, and the rigorous `(KL(Q‖P*) + 1/e)/k`.
    pub markov_stated: f64,
    pub markov_rigorous: f64,
    /// `P*(ℰ)`.
    pub prior_event: f64,
    /// `(Q(ℰ) − tail)·e^{−k}`.
    pub construction_bound: f64,
    /// `¼·e^{−k}`.
    pub target: f64,
    pub q_event_ok: bool,
    pub tail_ok: bool,
    pub bound_ok: bool,
}

impl SubsampleWitness {
    pub fn holds(&self) -> bool {
        self.bound_ok
    }
}

/// Law of the set of distinct indices seen in `draws` uniform picks from `m`:
/// `Pr[seen = T] = Σ_{J ⊆ T} (−1)^{|T|−|J|} (|J|/m)^{draws}`.
fn seen_set_law(m: usize, draws: usize) -> Vec<(u64, Rational)> {
    let mut out = Vec::new();
    let mm = BigInt::from(m);
    let denom = num_traits::pow(mm, draws);
    for t in 1u64..(1 << m) {
        let mut acc = BigInt::zero();
        let tsize = t.count_ones();
        let mut j = t;
        loop {
            let jsize = j.count_ones();
            let term = num_traits::pow(BigInt::from(jsize), draws);
            if (tsize - jsize) % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
            if j == 0 {
                break;
            }
            j = (j - 1) & t;
        }
        if !acc.is_zero() {
            out.push((t, Rational::new(acc, denom.clone())));
        }
    }
    out
}

/// Lower bound on `P*(ℰ)` by the subsample construction, next to the
/// direct value.
///
/// `rule` must depend on its input only through the set of distinct
/// examples (rejection samplers do); then `Q` is computed exactly from the
/// law of which examples of `S` appear among `m'` uniform picks.
pub fn subsample_witness(
    rule: &dyn LearningRule,
    prior: &FiniteDistribution<Hypothesis>,
    sample: &LabeledSample,
    kl_cap: Option<&LogSum>,
) -> Result<SubsampleWitness> {
    let cap = kl_cap.ok_or(Error::MissingCertificate)?;
    let distinct = sample.distinct();
    let m = sample.len();
    if m < 2 || distinct.len() > 20 {
        return Err(Error::InvalidParameter(format!("subsample witness needs 2 ≤ m and ≤ 20 distinct examples, got m = {m}")));
    }
    let md = distinct.len();
    let m_prime = (m as f64 * (4.0 * m as f64).ln()).ceil() as usize;
    let ln_m = LogSum::ln(&Rational::from_integer(BigInt::from(m)));
    // subsets of distinct examples; picks are uniform over the m positions of S
    let mut pos_of = Vec::with_capacity(m);
    for e in sample.pairs() {
        pos_of.push(distinct.iter().position(|d| d == e).expect("distinct covers sample"));
    }
    let mut q_parts: Vec<(Rational, FiniteDistribution<Hypothesis>)> = Vec::new();
    let mut mean_kl = DivergenceValue::zero();
    let mut certificate = true;
    let mut seen_by_distinct: BTreeMap<u64, Rational> = BTreeMap::new();
    for (t, p) in seen_set_law(m, m_prime) {
        let mut dmask = 0u64;
        for (i, &d) in pos_of.iter().enumerate() {
            if t >> i & 1 == 1 {
                dmask |= 1 << d;
            }
        }
        *seen_by_distinct.entry(dmask).or_insert_with(Rational::zero) += p;
    }
    for (dmask, p) in &seen_by_distinct {
        let sub: Vec<Example> = (0..md).filter(|i| dmask >> i & 1 == 1).map(|i| distinct[i]).collect();
        let s_sub = LabeledSample::new(rule.domain(), sub)?;
        let q = rule.posterior(&s_sub)?;
        let d = kl(&q, prior)?;
        if d.compare(&DivergenceValue::Exact(cap.clone()), 0.0) == Ordering::Greater {
            certificate = false;
        }
        mean_kl = mean_kl.add(&d.scale(p));
        q_parts.push((p.clone(), q));
    }
    let refs: Vec<(Rational, &FiniteDistribution<Hypothesis>)> = q_parts.iter().map(|(p, q)| (p.clone(), q)).collect();
    let q = mixture(&refs)?;
    let kl_q = kl(&q, prior)?;
    let k = cap.scale(&Rational::from_integer(BigInt::from(2)));
    let in_event = |h: &Hypothesis| sample.is_consistent_with(h);
    let q_event: Rational = q.support().filter(|(h, _)| in_event(h)).map(|(_, p)| p.clone()).sum();
    let prior_event: Rational = prior.support().filter(|(h, _)| in_event(h)).map(|(_, p)| p.clone()).sum();
    let mut tail = Rational::zero();
    for (h, qh) in q.support() {
        let ph = prior.prob_of(h);
        let above = if ph.is_zero() {
            true
        } else {
            LogSum::ln(&(qh / &ph)).compare(&k) == Some(Ordering::Greater)
        };
        if above {
            tail += qh;
        }
    }
    let k_f = k.to_f64();
    let kl_q_f = kl_q.to_f64();
    let (markov_stated, markov_rigorous) = if k_f > 0.0 {
        (kl_q_f / k_f, (kl_q_f + (-1f64).exp()) / k_f)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    // ln P*(ℰ) ≥ ln(Q(ℰ) − tail) − k, and against ln(1/4) − k
    let slack = &q_event - &tail;
    let bound_from = |base: &Rational| -> bool {
        if !base.is_positive() {
            return true;
        }
        if prior_event.is_zero() {
            return false;
        }
        LogSum::ln(&prior_event).compare(&LogSum::ln(base).sub(&k)) != Some(Ordering::Less)
    };
    let quarter = Rational::new(BigInt::one(), BigInt::from(4));
    let construction_ok = bound_from(&slack);
    let target_ok = bound_from(&quarter);
    let floor = 1.0 - m as f64 * (1.0 - 1.0 / m as f64).powi(m_prime as i32);
    Ok(SubsampleWitness {
        m,
        m_prime,
        exact: true,
        kl_cap: cap.to_f64(),
        c: cap.to_f64() / ln_m.to_f64(),
        k: k_f,
        kl_q: kl_q_f,
        mean_kl: mean_kl.to_f64(),
        certificate_holds: certificate,
        q_event: rational_to_f64(&q_event),
        q_event_floor: floor,
        tail: rational_to_f64(&tail),
        markov_stated,
        markov_rigorous,
        prior_event: rational_to_f64(&prior_event),
        construction_bound: rational_to_f64(&slack).max(0.0) * (-k_f).exp(),
        target: 0.25 * (-k_f).exp(),
        q_event_ok: q_event >= Rational::new(BigInt::from(3), BigInt::from(4)),
        tail_ok: tail <= Rational::new(BigInt::one(), BigInt::from(2)),
        bound_ok: construction_ok && target_ok,
    })
}

/// Direct event enumeration; an independent path for cross-checking the
/// hockey-stick reductions on small output spaces.
pub mod brute {
    use super::*;

    /// Largest atom count accepted (2^16 events).
    pub const MAX_ATOMS: usize = 16;

    /// `max_O P(O) − r·Q(O)` over every event `O` of the union support.
    pub fn event_delta<A: crate::dist::Atom>(
        p: &FiniteDistribution<A>,
        q: &FiniteDistribution<A>,
        ratio: &Rational,
    ) -> Result<Rational> {
        let mut atoms: Vec<A> = p.atoms().iter().chain(q.atoms()).cloned().collect();
        atoms.sort();
        atoms.dedup();
        if atoms.len() > MAX_ATOMS {
            return Err(Error::BudgetExceeded { needed: 1 << atoms.len(), budget: 1 << MAX_ATOMS });
        }
        let pv: Vec<Rational> = atoms.iter().map(|a| p.prob_of(a)).collect();
        let qv: Vec<Rational> = atoms.iter().map(|a| q.prob_of(a)).collect();
        let mut best = Rational::zero();
        for mask in 0u32..(1 << atoms.len()) {
            let mut po = Rational::zero();
            let mut qo = Rational::zero();
            for i in 0..atoms.len() {
                if mask >> i & 1 == 1 {
                    po += &pv[i];
                    qo += &qv[i];
                }
            }
            let d = po - ratio * qo;
            if d > best {
                best = d;
            }
        }
        Ok(best)
    }

    /// `(ln r, δ)`-DP verdict by events over all neighbor pairs.
    pub fn dp_verdict(rule: &dyn LearningRule, m: usize, ratio: &Rational, delta: &Rational, budget: u128) -> Result<bool> {
        let domain = rule.domain();
        for s in ordered_samples(domain, m, budget)? {
            let Some(ps) = defined_posterior(rule, &s)? else { continue };
            for t in neighbors(&s, domain) {
                let Some(pt) = defined_posterior(rule, &t)? else { continue };
                if event_delta(&ps, &pt, ratio)? > *delta || event_delta(&pt, &ps, ratio)? > *delta {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Per-sample perfect-generalization verdicts by events.
    pub fn pg_verdicts(
        rule: &dyn LearningRule,
        law: &SampleLaw,
        prior: &FiniteDistribution<Hypothesis>,
        ratio: &Rational,
        delta: &Rational,
    ) -> Result<Vec<bool>> {
        law.iter().map(|(s, _)| Ok(event_delta(&rule.posterior(s)?, prior, ratio)? <= *delta)).collect()
    }

    /// Max-information `δ` by events over the joint space.
    pub fn max_information_delta(
        rule: &dyn LearningRule,
        pop: &PopulationDistribution,
        m: usize,
        ratio: &Rational,
        budget: u128,
    ) -> Result<Rational> {
        let (joint, product) = information_joints(rule, pop, m, budget)?;
        event_delta(&joint, &product, ratio)
    }
}
