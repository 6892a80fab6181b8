//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers to run a subset:
//! `cargo test -p stability-lab --test acceptance -- 3 4`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use stability_lab::audit::{
    brute, dd_kl_stability_check, dp_check, max_information, perfect_generalization, sample_law, subsample_witness,
    Mode, PgMode,
};
use stability_lab::boosting::rounds_for;
use stability_lab::di::{certify_renyi, DiMixturePrior};
use stability_lab::dimensions::{
    clique_dimension, game_value_lp, game_value_mw, littlestone_dimension, threshold_count, verify_game_result,
    MwOptions,
};
use stability_lab::dist::rng_from_seed;
use stability_lab::divergences::{
    conditional_kl, hockey_stick, joint_from, kl, push_through, renyi, tv, Alpha, DivergenceValue, Eps, Real,
    FLOAT_COMPARE_TOL,
};
use stability_lab::exec::with_workers;
use stability_lab::experts::{run_game, Adversary, UtilityTable};
use stability_lab::learners::{rule_from_spec, uniform_marginal, LearningRule, TableRule};
use stability_lab::pipeline::{run_pipeline, BoostSweep, BoostTrial, ExperimentConfig, PipelineName};
use stability_lab::prob::{format_rational, rational, rational_to_f64};
use stability_lab::{
    Domain, Example, FiniteDistribution, Hypothesis, HypothesisClass, LabeledSample, LogSum, Rational,
};

const BUDGET: u128 = 1 << 24;
const SEED: u64 = 0x5eed_2024;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ------------------------------------------------------------------ generators

fn weights(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> Vec<u32> {
    loop {
        let w: Vec<u32> = (0..n).map(|_| if rng.gen_bool(zero_prob) { 0 } else { rng.gen_range(1..=9) }).collect();
        if w.iter().any(|&v| v > 0) {
            return w;
        }
    }
}

fn dist_from(w: &[u32]) -> FiniteDistribution<usize> {
    FiniteDistribution::from_weights(w.iter().enumerate().map(|(i, &v)| (i, Rational::from_integer(BigInt::from(v)))))
        .unwrap()
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> FiniteDistribution<usize> {
    dist_from(&weights(rng, n, zero_prob))
}

fn random_channel(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize, zero_prob: f64) -> Vec<FiniteDistribution<usize>> {
    (0..inputs).map(|_| random_dist(rng, outputs, zero_prob)).collect()
}

fn random_class(rng: &mut ChaCha8Rng, n: usize, max_members: usize) -> HypothesisClass {
    let mut all: Vec<u64> = (0..1u64 << n).collect();
    all.shuffle(rng);
    let k = rng.gen_range(1..=max_members.min(all.len()));
    let members = all[..k].iter().map(|&b| Hypothesis::new(n, b).unwrap()).collect();
    HypothesisClass::new(Domain::new(n).unwrap(), members).unwrap()
}

// ------------------------------------------------------------------ 1

fn alpha_grid() -> Vec<Alpha> {
    vec![Alpha::one(), Alpha::Finite(rational(3, 2)), Alpha::integer(2), Alpha::integer(4), Alpha::Infinity]
}

fn criterion_1() -> Check {
    const N: usize = 1000;
    let mut rng = rng_from_seed(SEED ^ 1);
    let tol = FLOAT_COMPARE_TOL;
    let grid = alpha_grid();

    // monotonicity in α, with the equality case on a quarter of the instances
    let mut equality_cases = 0;
    for i in 0..N {
        let n = rng.gen_range(2..=16);
        let q = random_dist(&mut rng, n, if i % 5 == 0 { 0.3 } else { 0.0 });
        let equality = i % 4 == 0;
        let p = if equality {
            // P = Q(·|A) for a random event A of positive Q-mass
            let mask: Vec<bool> = loop {
                let m: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                if (0..n).any(|j| m[j] && !q.prob_of(&j).eq(&rational(0, 1))) {
                    break m;
                }
            };
            q.condition(|j| mask[*j]).unwrap()
        } else {
            random_dist(&mut rng, n, 0.3)
        };
        let vals: Vec<DivergenceValue> = grid.iter().map(|a| renyi(a, &p, &q)).collect::<Result<_, _>>().map_err(err)?;
        for w in vals.windows(2) {
            ensure(w[0].le(&w[1], tol), || format!("monotonicity: instance {i}: {} > {}", w[0].render(), w[1].render()))?;
        }
        if equality {
            equality_cases += 1;
            let target = DivergenceValue::Exact(LogSum::ln(&q.event_mass(|j| p.prob_of(j) > rational(0, 1)).recip()));
            for (a, v) in grid.iter().zip(&vals) {
                let ord = v.compare(&target, if v.is_exact() { 0.0 } else { tol });
                ensure(ord == Ordering::Equal, || format!("equality case: instance {i}, α = {}: {}", a.to_f64(), v.render()))?;
            }
        }
    }

    // data processing under random stochastic maps to ≤ 8 outputs
    for i in 0..N {
        let n = rng.gen_range(2..=16);
        let p = random_dist(&mut rng, n, 0.3);
        let q = random_dist(&mut rng, n, if i % 5 == 0 { 0.3 } else { 0.0 });
        let outs = rng.gen_range(1..=8);
        let f = random_channel(&mut rng, n, outs, 0.4);
        let fp = push_through(&p, |x| f[*x].clone());
        let fq = push_through(&q, |x| f[*x].clone());
        for a in &grid {
            let before = renyi(a, &p, &q).map_err(err)?;
            let after = renyi(a, &fp, &fq).map_err(err)?;
            ensure(after.le(&before, tol), || {
                format!("data processing: instance {i}, α = {}: {} > {}", a.to_f64(), after.render(), before.render())
            })?;
        }
        let (tb, ta) = (tv(&p, &q).map_err(err)?, tv(&fp, &fq).map_err(err)?);
        ensure(ta.le(&tb, 0.0), || format!("data processing (TV): instance {i}"))?;
    }

    // chain rule, exact equality
    for i in 0..N {
        let a = rng.gen_range(1..=4);
        let b = rng.gen_range(1..=16 / a);
        let pw = weights(&mut rng, a * b, 0.3);
        // Q(x) > 0 for every x so that Q(·|x) exists
        let qw = loop {
            let w = weights(&mut rng, a * b, if i % 5 == 0 { 0.3 } else { 0.0 });
            if (0..a).all(|x| (0..b).any(|y| w[x * b + y] > 0)) {
                break w;
            }
        };
        let to_joint = |w: &[u32]| {
            FiniteDistribution::from_weights(
                (0..a * b).map(|k| ((k / b, k % b), Rational::from_integer(BigInt::from(w[k])))),
            )
            .unwrap()
        };
        let pj = to_joint(&pw);
        let qj = to_joint(&qw);
        let q_cond: BTreeMap<usize, FiniteDistribution<usize>> =
            (0..a).map(|x| (x, dist_from(&qw[x * b..(x + 1) * b]))).collect();
        let lhs = kl(&pj, &qj).map_err(err)?;
        let px = pj.map(|(x, _)| *x);
        let qx = qj.map(|(x, _)| *x);
        let rhs = kl(&px, &qx).map_err(err)?.add(&conditional_kl(&pj, &q_cond).map_err(err)?);
        ensure(lhs.compare(&rhs, 0.0) == Ordering::Equal, || {
            format!("chain rule: instance {i}: {} vs {}", lhs.render(), rhs.render())
        })?;
    }

    // conditioning increases KL
    for i in 0..N {
        let a = rng.gen_range(1..=4);
        let b = rng.gen_range(1..=16 / a);
        let px = random_dist(&mut rng, a, 0.2);
        let pc = random_channel(&mut rng, a, b, 0.3);
        let qc = random_channel(&mut rng, a, b, if i % 5 == 0 { 0.3 } else { 0.0 });
        let p_cond: BTreeMap<usize, FiniteDistribution<usize>> = pc.iter().cloned().enumerate().collect();
        let q_cond: BTreeMap<usize, FiniteDistribution<usize>> = qc.iter().cloned().enumerate().collect();
        let joint = joint_from(&px, &p_cond).map_err(err)?;
        let py = push_through(&px, |x| pc[*x].clone());
        let qy = push_through(&px, |x| qc[*x].clone());
        let lhs = kl(&py, &qy).map_err(err)?;
        let rhs = conditional_kl(&joint, &q_cond).map_err(err)?;
        ensure(lhs.le(&rhs, 0.0), || format!("conditioning: instance {i}: {} > {}", lhs.render(), rhs.render()))?;
    }
    Ok(format!("4 × {N} instances, {equality_cases} equality cases, 0 violations"))
}

// ------------------------------------------------------------------ 2

fn criterion_2() -> Check {
    let mut rng = rng_from_seed(SEED ^ 2);
    let mut worst_ratio: f64 = 0.0;
    for i in 0..200 {
        let experts = rng.gen_range(1..=64);
        let instances = rng.gen_range(1..=12);
        let horizon = if i % 10 == 0 { 10_000 } else { rng.gen_range(1..=2_500) };
        let table = UtilityTable::random(experts, instances, rng.gen()).map_err(err)?;
        let adversary = match i % 4 {
            0 => Adversary::BestResponse,
            1 => Adversary::Random,
            2 => {
                let w = weights(&mut rng, instances, 0.3);
                let total: u32 = w.iter().sum();
                Adversary::Stationary(w.iter().map(|&v| v as f64 / total as f64).collect())
            }
            _ => Adversary::Fixed(rng.gen_range(0..instances)),
        };
        let tr = run_game(&table, horizon, &adversary, rng.gen()).map_err(err)?;
        let bound = (2.0 * horizon as f64 * (experts as f64).ln()).sqrt();
        ensure(tr.recheck(&table), || format!("game {i}: transcript totals do not recompute"))?;
        let best = *tr.expert_totals.iter().max().unwrap() as f64;
        let regret = best - tr.learner_total;
        ensure(regret <= bound + 1e-9, || {
            format!("game {i} ({adversary:?}, m = {experts}, T = {horizon}): regret {regret} > {bound}")
        })?;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(regret / bound);
        }
    }
    Ok(format!("200 games, max regret/bound = {worst_ratio:.3}"))
}

// ------------------------------------------------------------------ 3, 4, 5

struct SweepRuns {
    sweep: BoostSweep,
    runs: Vec<Result<BoostTrial, String>>,
}

const SWEEP_MS: [usize; 4] = [8, 16, 32, 64];
const SWEEP_TRIALS: usize = 50;

fn sweep_runs() -> &'static [(String, SweepRuns)] {
    static RUNS: OnceLock<Vec<(String, SweepRuns)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [("thresholds:32", 8usize), ("full:4", 4)]
            .into_iter()
            .map(|(spec, k)| {
                let class = HypothesisClass::builtin(spec).unwrap();
                let sweep = BoostSweep::new(&class, k, &SWEEP_MS, 2000, true, SEED, BUDGET).unwrap();
                let mut runs = Vec::new();
                for &m in &SWEEP_MS {
                    for i in 0..SWEEP_TRIALS {
                        runs.push(sweep.run_trial(m, i, true, None).map_err(err));
                    }
                }
                (spec.to_string(), SweepRuns { sweep, runs })
            })
            .collect()
    })
}

fn criterion_3() -> Check {
    let mut parts = Vec::new();
    for (spec, s) in sweep_runs() {
        let mut ok = 0;
        for r in &s.runs {
            match r {
                Ok(t) if t.interpolates && !t.gate_failure => ok += 1,
                Ok(t) => return Err(format!("{spec}: m = {} trial {} does not interpolate", t.m, t.trial)),
                Err(e) => return Err(format!("{spec}: {e}")),
            }
        }
        parts.push(format!(
            "{spec} (k = {}, γ = {}) {ok}/{}",
            s.sweep.measurement.k,
            format_rational(&s.sweep.config.gamma),
            s.runs.len()
        ));
    }
    Ok(format!("empirical loss 0 in every trial: {}", parts.join(", ")))
}

fn criterion_4() -> Check {
    let mut parts = Vec::new();
    for (spec, s) in sweep_runs() {
        let mut worst = 0.0f64;
        for r in &s.runs {
            let t = r.as_ref().map_err(|e| format!("{spec}: {e}"))?;
            ensure(t.ledger_exact, || format!("{spec}: m = {} trial {}: ledger not exact", t.m, t.trial))?;
            ensure(t.total_kl <= t.total_bound, || format!("{spec}: m = {} trial {}: total KL above bound", t.m, t.trial))?;
            // the bound is rebuilt from T, γ, b and z_L independently of the ledger
            let rounds = rounds_for(&s.sweep.config.gamma, t.m);
            ensure(rounds == t.rounds, || format!("{spec}: T mismatch at m = {}", t.m))?;
            let gate = 2.0 * rational_to_f64(&s.sweep.config.b) / rational_to_f64(&s.sweep.config.gamma);
            let z = rational_to_f64(s.sweep.pstar_log.z_l());
            let bound = rounds as f64 * gate + (z * (rounds * rounds) as f64).ln();
            ensure((bound - t.total_bound).abs() <= 1e-9 * bound, || {
                format!("{spec}: ledger bound {} differs from {bound}", t.total_bound)
            })?;
            worst = worst.max(t.total_kl / t.total_bound);
        }
        parts.push(format!("{spec} {} exact ledgers, max KL/bound = {worst:.2e}", s.runs.len()));
    }
    Ok(parts.join(", "))
}

fn criterion_5() -> Check {
    let (_, s) = &sweep_runs()[0];
    let m = 64;
    let beta = 1.0 / m as f64;
    let trials = 1000;
    let (row, _) =
        stability_lab::pipeline::boost_sweep_row(&s.sweep, m, 0, trials, beta, false).map_err(err)?;
    let allowed = beta + 3.0 * (beta * (1.0 - beta) / trials as f64).sqrt();
    let detail = format!(
        "thresholds:32, m = 64: {} / {trials} violations, rate {:.4} ≤ {allowed:.4}; mean bound {:.3}, mean loss {:.4}",
        row.pac_violations, row.pac_rate, row.mean_pac_bound, row.mean_population_loss
    );
    ensure(row.pac_trials == trials && row.pac_rate <= allowed, || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------------ 6

fn criterion_6() -> Check {
    let mut rng = rng_from_seed(SEED ^ 6);
    let eps = 1e-3;
    let eps_r = rational(1, 1000);
    let mut max_gap = 0.0f64;
    for i in 0..20 {
        let n = rng.gen_range(2..=8);
        let class = random_class(&mut rng, n, 32);
        let m = rng.gen_range(1..=3);
        let lp = game_value_lp(&class, m, BUDGET).map_err(err)?;
        verify_game_result(&class, &lp, BUDGET).map_err(|e| format!("class {i}: LP certificate: {e}"))?;
        let mw = game_value_mw(&class, m, BUDGET, &MwOptions { eps, ..MwOptions::default() }).map_err(err)?;
        let gap = (&lp.value - &mw.value).abs();
        ensure(gap <= eps_r && mw.value <= lp.value && lp.value <= mw.upper, || {
            format!(
                "class {i} (n = {n}, |H| = {}, m = {m}): LP {} vs MW [{}, {}]",
                class.len(),
                format_rational(&lp.value),
                format_rational(&mw.value),
                format_rational(&mw.upper)
            )
        })?;
        max_gap = max_gap.max(rational_to_f64(&gap));
    }
    Ok(format!("20 classes, max |LP − MW| = {max_gap:.2e}, LP certificates verified"))
}

// ------------------------------------------------------------------ 7

fn criterion_7() -> Check {
    let mut parts = Vec::new();
    for spec in ["full:1", "thresholds:4"] {
        let class = HypothesisClass::builtin(spec).unwrap();
        let l = 4;
        let di = DiMixturePrior::build(&class, l, BUDGET).map_err(err)?;
        let mut samples = 0;
        for m in 1..=l {
            let c = certify_renyi(&di, m, BUDGET).map_err(err)?;
            ensure(c.holds(), || format!("{spec}, m = {m}: {} violations, {} mismatches", c.violations, c.identity_mismatches))?;
            ensure(c.worst.compare(&c.cap) != Some(Ordering::Greater), || format!("{spec}, m = {m}: worst above cap"))?;
            samples += c.samples;
        }
        parts.push(format!("{spec} {samples} samples (m ≤ {l})"));
    }
    Ok(parts.join(", "))
}

// ------------------------------------------------------------------ 8

fn criterion_8() -> Check {
    let class = HypothesisClass::thresholds(8).unwrap();
    let m = 4;
    let di = DiMixturePrior::build(&class, m, BUDGET).map_err(err)?;
    let rule = di.sampler().map_err(err)?;
    let cap = di.kl_cap(m).map_err(err)?;
    let mut rng = rng_from_seed(SEED ^ 8);
    let trials = 200;
    let (mut min_q, mut max_tail, mut min_margin) = (1.0f64, 0.0f64, f64::INFINITY);
    for i in 0..trials {
        let target = class.members()[rng.gen_range(0..class.len())];
        let pairs = (0..m)
            .map(|_| {
                let x = rng.gen_range(0..8u32);
                Example::new(x, target.label(x))
            })
            .collect();
        let s = LabeledSample::new(class.domain(), pairs).unwrap();
        let w = subsample_witness(&rule, &di.prior, &s, Some(&cap)).map_err(err)?;
        ensure(w.certificate_holds, || format!("trial {i}: a subsample posterior exceeds the KL cap"))?;
        ensure(w.holds(), || format!("trial {i}: P*(E) = {} < {}", w.prior_event, w.target))?;
        ensure(w.q_event_ok, || format!("trial {i}: Q(E) = {} < 3/4", w.q_event))?;
        ensure(w.tail_ok, || format!("trial {i}: tail {} > 1/2", w.tail))?;
        min_q = min_q.min(w.q_event);
        max_tail = max_tail.max(w.tail);
        min_margin = min_margin.min(w.prior_event / w.target);
    }
    Ok(format!(
        "thresholds:8, m = 4, k = 2 ln q(4) = {:.3}: {trials} trials, min Q(E) = {min_q:.3}, max tail = {max_tail:.3}, min P*(E)/target = {min_margin:.1}",
        2.0 * cap.to_f64()
    ))
}

// ------------------------------------------------------------------ 9

fn criterion_9() -> Check {
    let mut checked = 0;
    for n in 1..=2usize {
        for spec in [format!("full:{n}"), format!("thresholds:{n}"), format!("singletons:{n}")] {
            let class = HypothesisClass::builtin(&spec).map_err(err)?;
            let rules: Vec<Box<dyn LearningRule>> = ["rejection:uniform", "rejection:class", "erm", "memorize", "rr:eps=1", "const:uniform"]
                .iter()
                .map(|r| rule_from_spec(r, &class))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            let outputs = class.members().to_vec();
            let mut pops: Vec<FiniteDistribution<Example>> = class.members().iter().map(uniform_marginal).collect();
            for h in class.members() {
                for x in 0..n as u32 {
                    pops.push(FiniteDistribution::point_mass(Example::new(x, h.label(x))));
                }
                if n == 2 {
                    pops.push(
                        FiniteDistribution::new(
                            vec![Example::new(0, h.label(0)), Example::new(1, h.label(1))],
                            vec![rational(1, 3), rational(2, 3)],
                        )
                        .unwrap(),
                    );
                }
            }
            for m in 1..=3usize {
                let table = TableRule::random(class.domain(), m, &outputs, 3, SEED ^ (n * 10 + m) as u64).map_err(err)?;
                for rule in rules.iter().map(|r| r.as_ref()).chain([&table as &dyn LearningRule]) {
                    for pop in &pops {
                        let r = dd_kl_stability_check(rule, pop, m, BUDGET)
                            .map_err(|e| format!("{spec}, {}, m = {m}: {e}", rule.name()))?;
                        ensure(r.pass == Some(true), || {
                            format!("{spec}, {}, m = {m}: Pr = {:?} vs √(I/m) = {:?}", rule.name(), r.estimate_exact, r.threshold)
                        })?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{checked} (class, rule, population, m) fixtures pass exactly"))
}

// ------------------------------------------------------------------ 10

/// Members as bitmasks over a set of up to 32 hypotheses.
fn oracle_ld(rows: &[u64], n: usize, set: u32, memo: &mut HashMap<u32, u32>) -> u32 {
    if set.count_ones() <= 1 {
        return 0;
    }
    if let Some(&v) = memo.get(&set) {
        return v;
    }
    let mut best = 0;
    for x in 0..n {
        let (mut zero, mut one) = (0u32, 0u32);
        for (i, r) in rows.iter().enumerate() {
            if set >> i & 1 == 1 {
                if r >> x & 1 == 1 {
                    one |= 1 << i;
                } else {
                    zero |= 1 << i;
                }
            }
        }
        if zero != 0 && one != 0 {
            best = best.max(1 + oracle_ld(rows, n, zero, memo).min(oracle_ld(rows, n, one, memo)));
        }
    }
    memo.insert(set, best);
    best
}

fn permutations_of_subsets(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for x in 0..n {
            if !cur.contains(&x) {
                cur.push(x);
                go(n, d, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(n, d, &mut Vec::new(), &mut out);
    out
}

/// Largest `d` with ordered points `x₁..x_d` such that for each `i` some row has `h(x_j) = 1[j < i]`.
fn oracle_threshold_count(rows: &[u64], n: usize) -> usize {
    for d in (1..=n).rev() {
        for pts in permutations_of_subsets(n, d) {
            let ok = (0..d).all(|i| rows.iter().any(|r| (0..d).all(|j| (r >> pts[j] & 1 == 1) == (j < i))));
            if ok {
                return d;
            }
        }
    }
    0
}

/// Bron–Kerbosch with pivoting over at most 128 vertices.
fn max_clique(adj: &[u128], r: usize, mut p: u128, mut x: u128, best: &mut usize) {
    if p == 0 && x == 0 {
        *best = (*best).max(r);
        return;
    }
    if r + (p.count_ones() as usize) <= *best {
        return;
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        cand &= cand - 1;
        max_clique(adj, r + 1, p & adj[v], x & adj[v], best);
        p &= !(1u128 << v);
        x |= 1u128 << v;
    }
}

fn oracle_clique_dimension(rows: &[u64], n: usize) -> usize {
    let mut dim = 0;
    for m in 1..=n {
        // realizable labelings (mask, values) of exactly m points
        let mut verts: Vec<(u64, u64)> = Vec::new();
        for mask in 0u64..1 << n {
            if mask.count_ones() as usize != m {
                continue;
            }
            for r in rows {
                let v = (mask, r & mask);
                if !verts.contains(&v) {
                    verts.push(v);
                }
            }
        }
        assert!(verts.len() <= 128);
        let adj: Vec<u128> = verts
            .iter()
            .map(|&(ma, va)| {
                verts.iter().enumerate().fold(0u128, |acc, (j, &(mb, vb))| {
                    let common = ma & mb;
                    if (va ^ vb) & common != 0 {
                        acc | 1u128 << j
                    } else {
                        acc
                    }
                })
            })
            .collect();
        let all = if verts.len() == 128 { u128::MAX } else { (1u128 << verts.len()) - 1 };
        let mut best = 0;
        max_clique(&adj, 0, all, 0, &mut best);
        if best >= 1 << m {
            dim = m;
        }
    }
    dim
}

fn compare_dimensions(rows: &[u64], n: usize) -> Result<(), String> {
    let members: Vec<Hypothesis> = rows.iter().map(|&b| Hypothesis::new(n, b).unwrap()).collect();
    let class = HypothesisClass::new(Domain::new(n).unwrap(), members).map_err(err)?;
    let ld = littlestone_dimension(&class, BUDGET).map_err(err)?;
    let want_ld = oracle_ld(rows, n, if rows.len() == 32 { u32::MAX } else { (1u32 << rows.len()) - 1 }, &mut HashMap::new());
    ensure(ld == want_ld, || format!("LD {ld} vs oracle {want_ld} on {rows:?} (n = {n})"))?;
    let clique = clique_dimension(&class, n, BUDGET).map_err(err)?;
    let want_clique = oracle_clique_dimension(rows, n);
    ensure(!clique.capped && clique.dimension == want_clique, || {
        format!("clique {} (capped {}) vs oracle {want_clique} on {rows:?} (n = {n})", clique.dimension, clique.capped)
    })?;
    let tc = threshold_count(&class, BUDGET).map_err(err)?;
    // a nonempty class counts at least one step
    let want_tc = oracle_threshold_count(rows, n).max(1);
    ensure(tc == want_tc, || format!("threshold count {tc} vs oracle {want_tc} on {rows:?} (n = {n})"))
}

fn criterion_10() -> Check {
    let mut classes = 0;
    for n in 1..=3usize {
        let funcs = 1u64 << n;
        for subset in 1u64..(1 << funcs) {
            let rows: Vec<u64> = (0..funcs).filter(|b| subset >> b & 1 == 1).collect();
            compare_dimensions(&rows, n)?;
            classes += 1;
        }
    }
    let mut rng = rng_from_seed(SEED ^ 10);
    for n in [4usize, 5] {
        for _ in 0..100 {
            let mut all: Vec<u64> = (0..1u64 << n).collect();
            all.shuffle(&mut rng);
            let k = rng.gen_range(1..=all.len());
            let mut rows = all[..k].to_vec();
            rows.sort_unstable();
            compare_dimensions(&rows, n)?;
            classes += 1;
        }
    }
    Ok(format!("{classes} classes, LD / clique / threshold count match brute force"))
}

// ------------------------------------------------------------------ 11

fn criterion_11() -> Check {
    let mut rng = rng_from_seed(SEED ^ 11);
    let ratios = [rational(1, 1), rational(3, 2), rational(2, 1), rational(3, 1)];
    let deltas = [rational(0, 1), rational(1, 10), rational(1, 4), rational(1, 2)];
    let mut verdicts = 0;
    for i in 0..100 {
        // (n, m, outputs) with |outputs|·(2n)^m ≤ 12
        let (n, m, k) = [(1, 1, 2), (1, 1, 2), (1, 2, 2), (2, 1, 3), (2, 1, 2)][i % 5];
        let domain = Domain::new(n).unwrap();
        let mut fns = domain.all_functions().unwrap();
        fns.shuffle(&mut rng);
        let outputs = &fns[..k];
        let rule = TableRule::random(domain, m, outputs, 4, rng.gen()).map_err(err)?;
        let ratio = ratios[rng.gen_range(0..ratios.len())].clone();
        let delta = deltas[rng.gen_range(0..deltas.len())].clone();
        let eps = Eps::ExpRatio(ratio.clone());

        let dp = dp_check(&rule, m, &eps, &delta, Mode::Exact, BUDGET).map_err(err)?;
        let dp_brute = brute::dp_verdict(&rule, m, &ratio, &delta, BUDGET).map_err(err)?;
        ensure(dp.pass == Some(dp_brute), || format!("rule {i}: DP verdict {:?} vs events {dp_brute}", dp.pass))?;

        let examples = domain.examples();
        let pw = weights(&mut rng, examples.len(), 0.3);
        let pop = FiniteDistribution::from_weights(
            examples.iter().zip(&pw).map(|(e, &w)| (*e, Rational::from_integer(BigInt::from(w)))),
        )
        .unwrap();
        let law = sample_law(&pop, m, BUDGET).map_err(err)?;
        let prior = FiniteDistribution::from_weights(
            outputs.iter().map(|h| (*h, Rational::from_integer(BigInt::from(rng.gen_range(1..=4u32))))),
        )
        .unwrap();
        let beta = [rational(0, 1), rational(1, 4), rational(1, 2)][rng.gen_range(0..3)].clone();
        let pg = perfect_generalization(&rule, &law, &prior, &eps, &delta, PgMode::Approx, &beta).map_err(err)?;
        let per_sample = brute::pg_verdicts(&rule, &law, &prior, &ratio, &delta).map_err(err)?;
        let held: Rational = law.iter().zip(&per_sample).filter(|(_, ok)| **ok).map(|((_, p), _)| p.clone()).sum();
        let pg_brute = held >= rational(1, 1) - &beta;
        ensure(pg.pass == Some(pg_brute), || format!("rule {i}: PG verdict {:?} vs events {pg_brute}", pg.pass))?;
        for ((s, _), ok) in law.iter().zip(&per_sample) {
            let d = hockey_stick(&eps, &rule.posterior(s).map_err(err)?, &prior).map_err(err)?;
            ensure(d.le(&Real::Exact(delta.clone()), 0.0) == *ok, || format!("rule {i}: per-sample PG verdict differs"))?;
        }

        let mi = max_information(&rule, &pop, m, &eps, BUDGET).map_err(err)?;
        let mi_brute = brute::max_information_delta(&rule, &pop, m, &ratio, BUDGET).map_err(err)?;
        let mi_exact = mi.estimate_exact.clone().unwrap_or_default();
        ensure(mi_exact == format_rational(&mi_brute), || {
            format!("rule {i}: max-information δ {mi_exact} vs events {}", format_rational(&mi_brute))
        })?;
        let mi_verdict = stability_lab::prob::parse_rational(&mi_exact).map_err(err)? <= delta;
        ensure(mi_verdict == (mi_brute <= delta), || format!("rule {i}: max-information verdicts differ"))?;
        verdicts += 3;
    }
    Ok(format!("100 random rules, {verdicts} verdicts, 0 disagreements"))
}

// ------------------------------------------------------------------ 12

fn determinism_configs() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    let mut di = ExperimentConfig::new(PipelineName::DiEquivalence, 7);
    di.m = vec![1, 2];
    out.push(di);
    let mut dd = ExperimentConfig::new(PipelineName::DdAudit, 7);
    dd.trials = Some(300);
    out.push(dd);
    let mut dd_mc = ExperimentConfig::new(PipelineName::DdAudit, 7);
    dd_mc.trials = Some(300);
    dd_mc.mode = stability_lab::pipeline::RunMode::Mc;
    out.push(dd_mc);
    let mut boost = ExperimentConfig::new(PipelineName::BoostSweep, 7);
    boost.class = Some("thresholds:8".into());
    boost.m = vec![4, 8];
    boost.trials = Some(4);
    boost.k = Some(4);
    boost.weak_trials = Some(300);
    out.push(boost);
    out.push(ExperimentConfig::new(PipelineName::DimsSweep, 7));
    out
}

fn criterion_12() -> Check {
    let mut files = 0;
    for cfg in determinism_configs() {
        let name = cfg.pipeline.unwrap();
        let runs: Vec<Vec<(String, String)>> = [Some(1), Some(1), Some(2), None]
            .into_iter()
            .map(|w| with_workers(w, || run_pipeline(name, &cfg).map(|o| o.files)))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}: {e}", name.as_str()))?;
        for (j, r) in runs.iter().enumerate().skip(1) {
            ensure(*r == runs[0], || format!("{}: run {j} differs from run 0", name.as_str()))?;
        }
        files += runs[0].len();
    }
    Ok(format!("5 configs × 4 runs (1, 1, 2, default workers), {files} files byte-identical"))
}

// ------------------------------------------------------------------ driver

type Criterion = (usize, &'static str, fn() -> Check);

const CRITERIA: [Criterion; 12] = [
    (1, "divergence lemmas", criterion_1),
    (2, "MW regret", criterion_2),
    (3, "boosting interpolation", criterion_3),
    (4, "boosting KL ledger", criterion_4),
    (5, "PAC-Bayes violation rate", criterion_5),
    (6, "game value LP vs MW", criterion_6),
    (7, "DI Rényi certificate", criterion_7),
    (8, "subsample witness", criterion_8),
    (9, "MI to DD-KL Markov step", criterion_9),
    (10, "dimension oracles", criterion_10),
    (11, "checker cross-agreement", criterion_11),
    (12, "pipeline determinism", criterion_12),
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let picked: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    // a libtest-style name filter that is not ours selects nothing
    if picked.is_empty() && !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut failed = 0;
    for (n, name, f) in CRITERIA {
        if !picked.is_empty() && !picked.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(e) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {e} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
