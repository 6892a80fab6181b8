//! Littlestone dimension, clique dimension, threshold count, and the
//! fractional clique number as the value of the consistency game.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::dist::{Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::lp::{col_guarantee, row_guarantee, solve_game};
use crate::prob::{format_rational, Rational};
use crate::types::{Example, Hypothesis, HypothesisClass, LabeledSample};

/// Default cap on memo entries / enumerated objects.
pub const DEFAULT_BUDGET: u128 = 1 << 26;

/// A labeling of a set of points, as `(mask, values)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dichotomy {
    pub mask: u64,
    pub values: u64,
}

impl Dichotomy {
    pub fn consistent(&self, h: &Hypothesis) -> bool {
        h.bits() & self.mask == self.values
    }

    pub fn points(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Some common point labeled differently.
    pub fn contradicts(&self, other: &Dichotomy) -> bool {
        (self.values ^ other.values) & self.mask & other.mask != 0
    }

    pub fn to_sample(&self) -> LabeledSample {
        let mut pairs = Vec::new();
        let mut m = self.mask;
        while m != 0 {
            let x = m.trailing_zeros();
            pairs.push(Example::new(x, (self.values >> x) & 1 == 1));
            m &= m - 1;
        }
        LabeledSample::from_pairs_unchecked(pairs)
    }

    pub fn from_sample(s: &LabeledSample) -> Option<Self> {
        s.constraints().map(|(mask, values)| Dichotomy { mask, values })
    }

    pub fn render(&self) -> String {
        self.to_sample().pairs().iter().map(|e| format!("{}:{}", e.x, e.y as u8)).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Debug for Dichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.render())
    }
}

impl Serialize for Dichotomy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl Atom for Dichotomy {}

fn subsets_of_size(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        return vec![0];
    }
    let mut s: u64 = (1u64 << k) - 1;
    let limit = if n == 64 { u64::MAX } else { 1u64 << n };
    while s < limit {
        out.push(s);
        // Gosper's hack
        let c = s & s.wrapping_neg();
        let r = s + c;
        if r == 0 {
            break;
        }
        s = (((r ^ s) >> 2) / c) | r;
    }
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

/// Realizable labelings of exactly `k` distinct points, sorted.
pub fn realizable_on_exactly(class: &HypothesisClass, k: usize, budget: u128) -> Result<Vec<Dichotomy>> {
    let n = class.domain().size();
    let needed = binomial(n, k).saturating_mul(class.len() as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut out = Vec::new();
    for mask in subsets_of_size(n, k) {
        let mut vals: Vec<u64> = class.members().iter().map(|h| h.bits() & mask).collect();
        vals.sort_unstable();
        vals.dedup();
        out.extend(vals.into_iter().map(|values| Dichotomy { mask, values }));
    }
    out.sort();
    Ok(out)
}

/// Realizable labelings of every set of `1..=m` distinct points.
pub fn realizable_dichotomies(class: &HypothesisClass, m: usize, budget: u128) -> Result<Vec<Dichotomy>> {
    let n = class.domain().size();
    let mut out = Vec::new();
    for k in 1..=m.min(n) {
        out.extend(realizable_on_exactly(class, k, budget)?);
    }
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Littlestone dimension

type Members = Vec<u64>;

fn restrict(class: &HypothesisClass, set: &Members, x: u32, y: bool) -> Members {
    let mut out = vec![0u64; set.len()];
    for (w, word) in set.iter().enumerate() {
        let mut bits = *word;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if class.members()[w * 64 + i].label(x) == y {
                out[w] |= 1 << i;
            }
        }
    }
    out
}

fn count(set: &Members) -> u32 {
    set.iter().map(|w| w.count_ones()).sum()
}

struct LdSearch<'a> {
    class: &'a HypothesisClass,
    memo: HashMap<Members, u32>,
    budget: u128,
}

impl LdSearch<'_> {
    fn ld(&mut self, set: &Members) -> Result<u32> {
        let size = count(set);
        if size <= 1 {
            return Ok(0);
        }
        if let Some(&v) = self.memo.get(set) {
            return Ok(v);
        }
        if self.memo.len() as u128 >= self.budget {
            return Err(Error::BudgetExceeded { needed: self.memo.len() as u128 + 1, budget: self.budget });
        }
        let cap = 31 - size.leading_zeros(); // ⌊log₂ |H|⌋
        let mut best = 0;
        for x in 0..self.class.domain().size() as u32 {
            let zero = restrict(self.class, set, x, false);
            let nz = count(&zero);
            if nz == 0 || nz == size {
                continue;
            }
            let one = restrict(self.class, set, x, true);
            // 1 + min(a, b) can only beat `best` if both sides reach `best`
            let a = self.ld(&zero)?;
            if a < best {
                continue;
            }
            let b = self.ld(&one)?;
            best = best.max(1 + a.min(b));
            if best == cap {
                break;
            }
        }
        self.memo.insert(set.clone(), best);
        Ok(best)
    }
}

pub fn littlestone_dimension(class: &HypothesisClass, budget: u128) -> Result<u32> {
    if class.len() > 1 << 16 {
        return Err(Error::BudgetExceeded { needed: class.len() as u128, budget: 1 << 16 });
    }
    class.domain().check_enumerable()?;
    let words = class.len().div_ceil(64);
    let mut all = vec![u64::MAX; words];
    let rem = class.len() % 64;
    if rem != 0 {
        all[words - 1] = (1u64 << rem) - 1;
    }
    let mut s = LdSearch { class, memo: HashMap::new(), budget };
    s.ld(&all)
}

// ---------------------------------------------------------------------------
// Clique dimension

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueResult {
    pub dimension: usize,
    /// Pairwise-contradicting realizable samples of the largest order found.
    pub witness: Vec<Dichotomy>,
    /// True when the search stopped at `m_max`, so `dimension` is a lower bound.
    pub capped: bool,
}

fn find_clique(vertices: &[Dichotomy], target: usize, budget: &mut u128) -> Result<Option<Vec<Dichotomy>>> {
    if target == 0 {
        return Ok(Some(Vec::new()));
    }
    let n = vertices.len();
    let adj: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| j != i && vertices[i].contradicts(&vertices[j])).collect()).collect();
    let candidates: Vec<usize> = (0..n).filter(|&i| adj[i].len() + 1 >= target).collect();
    let mut chosen = Vec::new();
    if extend(vertices, &adj, &mut chosen, &candidates, target, budget)? {
        Ok(Some(chosen.into_iter().map(|i| vertices[i]).collect()))
    } else {
        Ok(None)
    }
}

fn extend(
    vertices: &[Dichotomy],
    adj: &[Vec<usize>],
    chosen: &mut Vec<usize>,
    candidates: &[usize],
    target: usize,
    budget: &mut u128,
) -> Result<bool> {
    if chosen.len() == target {
        return Ok(true);
    }
    if chosen.len() + candidates.len() < target {
        return Ok(false);
    }
    if *budget == 0 {
        return Err(Error::BudgetExceeded { needed: 1, budget: 0 });
    }
    *budget -= 1;
    for (pos, &v) in candidates.iter().enumerate() {
        if chosen.len() + candidates.len() - pos < target {
            break;
        }
        let next: Vec<usize> = candidates[pos + 1..].iter().copied().filter(|u| adj[v].binary_search(u).is_ok()).collect();
        chosen.push(v);
        if extend(vertices, adj, chosen, &next, target, budget)? {
            return Ok(true);
        }
        chosen.pop();
    }
    let _ = vertices;
    Ok(false)
}

/// Largest `m ≤ m_max` with `2^m` pairwise-contradicting realizable samples of size `m`.
pub fn clique_dimension(class: &HypothesisClass, m_max: usize, budget: u128) -> Result<CliqueResult> {
    let n = class.domain().size();
    let mut best = CliqueResult { dimension: 0, witness: Vec::new(), capped: false };
    let top = m_max.min(n).min(63);
    for m in 1..=top {
        let vertices = realizable_on_exactly(class, m, budget)?;
        let target = 1usize << m;
        if vertices.len() < target {
            continue;
        }
        let mut b = budget;
        match find_clique(&vertices, target, &mut b) {
            Ok(Some(w)) => best = CliqueResult { dimension: m, witness: w, capped: false },
            Ok(None) => {}
            Err(Error::BudgetExceeded { .. }) => {
                best.capped = true;
                return Ok(best);
            }
            Err(e) => return Err(e),
        }
    }
    if best.dimension == m_max && m_max < n {
        best.capped = true;
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Threshold count

/// Longest staircase: points `x₁..x_d` and members `h₁..h_d` with
/// `hᵢ(x_j) = 1[j < i]`. A nonempty class always counts as at least 1.
///
/// Depth-first over ordered points, keeping for each step `i` every member
/// that still fits the pattern; appending `x` needs `h(x) = 0` from some
/// candidate at each existing step and a new member that is 1 on all
/// earlier points and 0 on `x`.
pub fn threshold_count(class: &HypothesisClass, budget: u128) -> Result<usize> {
    struct Search<'a> {
        members: &'a [Hypothesis],
        n: usize,
        best: usize,
        steps: u128,
    }
    impl Search<'_> {
        fn dfs(&mut self, points: &mut Vec<u32>, cands: &[Vec<usize>]) -> Result<()> {
            if self.steps == 0 {
                return Err(Error::BudgetExceeded { needed: 1, budget: 0 });
            }
            self.steps -= 1;
            self.best = self.best.max(points.len());
            if self.n <= self.best {
                return Ok(());
            }
            for x in 0..self.n as u32 {
                if points.contains(&x) {
                    continue;
                }
                let mut next: Vec<Vec<usize>> = Vec::with_capacity(cands.len() + 1);
                for c in cands {
                    let kept: Vec<usize> = c.iter().copied().filter(|&i| !self.members[i].label(x)).collect();
                    if kept.is_empty() {
                        break;
                    }
                    next.push(kept);
                }
                if next.len() < cands.len() {
                    continue;
                }
                let fresh: Vec<usize> = (0..self.members.len())
                    .filter(|&i| {
                        let h = &self.members[i];
                        !h.label(x) && points.iter().all(|&p| h.label(p))
                    })
                    .collect();
                if fresh.is_empty() {
                    continue;
                }
                next.push(fresh);
                points.push(x);
                self.dfs(points, &next)?;
                points.pop();
                if self.best == self.n {
                    break;
                }
            }
            Ok(())
        }
    }
    let mut search = Search { members: class.members(), n: class.domain().size(), best: 1, steps: budget };
    search.dfs(&mut Vec::new(), &[])?;
    Ok(search.best)
}

// ---------------------------------------------------------------------------
// Fractional clique number
//
// The prior player picks a distribution over all labelings of the domain and
// the adversary a distribution over realizable samples. Rows are generated
// lazily: a restricted game over a few labelings is solved, then the best
// labeling against the adversary's strategy is found by enumeration over
// `{0,1}^n`; if it beats the restricted value it joins the rows.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameMethod {
    ExactLp,
    MwApprox,
}

#[derive(Debug, Clone)]
pub struct GameValueResult {
    pub m: usize,
    /// Guaranteed by `optimal_prior`: its minimum consistency probability.
    pub value: Rational,
    /// `1/value`.
    pub clique_number: Rational,
    /// Distribution over labelings of the whole domain.
    pub optimal_prior: FiniteDistribution<Hypothesis>,
    pub hard_sample_mixture: FiniteDistribution<Dichotomy>,
    /// Best payoff any labeling gets against `hard_sample_mixture`.
    pub upper: Rational,
    pub method: GameMethod,
    /// `upper − value`; zero for the LP.
    pub approx_gap: Rational,
    /// Inner iterations (MW rounds or simplex solves).
    pub iterations: usize,
    /// Labelings in the final restricted game.
    pub rows: usize,
}

impl Serialize for GameValueResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("GameValueResult", 10)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("value", &format_rational(&self.value))?;
        st.serialize_field("clique_number", &format_rational(&self.clique_number))?;
        st.serialize_field("upper", &format_rational(&self.upper))?;
        st.serialize_field("approx_gap", &format_rational(&self.approx_gap))?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("optimal_prior", &self.optimal_prior)?;
        st.serialize_field("hard_sample_mixture", &self.hard_sample_mixture)?;
        st.end()
    }
}

/// Minimum over samples of the prior mass of their consistent sets.
pub fn min_consistency(prior: &FiniteDistribution<Hypothesis>, samples: &[Dichotomy]) -> Rational {
    samples
        .iter()
        .map(|d| prior.support().filter(|(h, _)| d.consistent(h)).fold(Rational::zero(), |t, (_, p)| t + p))
        .min()
        .unwrap_or_else(Rational::one)
}

/// Samples grouped by point set; a labeling fits at most one per group.
struct ColumnIndex {
    groups: Vec<(Vec<u32>, Vec<Option<usize>>)>,
}

fn gather(f: u64, points: &[u32]) -> usize {
    points.iter().enumerate().fold(0, |k, (i, &x)| k | ((((f >> x) & 1) as usize) << i))
}

impl ColumnIndex {
    fn new(cols: &[Dichotomy]) -> Self {
        let mut masks: Vec<u64> = cols.iter().map(|d| d.mask).collect();
        masks.sort_unstable();
        masks.dedup();
        let mut groups: Vec<(Vec<u32>, Vec<Option<usize>>)> = masks
            .iter()
            .map(|&m| {
                let pts: Vec<u32> = (0..64).filter(|x| (m >> x) & 1 == 1).collect();
                let slots = vec![None; 1 << pts.len()];
                (pts, slots)
            })
            .collect();
        for (j, d) in cols.iter().enumerate() {
            let g = masks.binary_search(&d.mask).expect("mask listed");
            let key = gather(d.values, &groups[g].0);
            groups[g].1[key] = Some(j);
        }
        ColumnIndex { groups }
    }

    fn fitted(&self, f: u64) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().filter_map(move |(pts, slots)| slots[gather(f, pts)])
    }
}

/// The labeling of `{0,1}^n` fitting the most mass of the mixture `y` over
/// `cols`, and that mass.
pub fn best_labeling(n: usize, cols: &[Dichotomy], y: &[Rational], budget: u128) -> Result<(Hypothesis, Rational)> {
    if n > crate::types::FULL_UNIVERSE_LIMIT {
        return Err(Error::DomainTooLarge { size: n, limit: crate::types::FULL_UNIVERSE_LIMIT });
    }
    let live: Vec<usize> = (0..cols.len()).filter(|&j| !y[j].is_zero()).collect();
    let live_cols: Vec<Dichotomy> = live.iter().map(|&j| cols[j]).collect();
    let index = ColumnIndex::new(&live_cols);
    let work = (1u128 << n) * index.groups.len().max(1) as u128;
    if work > budget {
        return Err(Error::BudgetExceeded { needed: work, budget });
    }
    let yf: Vec<f64> = live.iter().map(|&j| crate::prob::rational_to_f64(&y[j])).collect();
    let total = 1usize << n;
    let chunk = 1usize << 12;
    let chunks = total.div_ceil(chunk);
    let exec = Executor::default();
    let score = |f: usize| index.fitted(f as u64).map(|j| yf[j]).sum::<f64>();
    let best = exec
        .map(chunks, |c| (c * chunk..((c + 1) * chunk).min(total)).map(score).fold(f64::NEG_INFINITY, f64::max))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    // f64 sums of at most |cols| terms in [0,1] are accurate far beyond this
    let cut = best - 1e-9;
    let near: Vec<usize> = exec
        .map(chunks, |c| (c * chunk..((c + 1) * chunk).min(total)).filter(|&f| score(f) >= cut).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    let mut winner: Option<(u64, Rational)> = None;
    for f in near {
        let v = index.fitted(f as u64).fold(Rational::zero(), |t, j| t + &y[live[j]]);
        if winner.as_ref().is_none_or(|(_, w)| v > *w) {
            winner = Some((f as u64, v));
        }
    }
    let (f, v) = winner.expect("domain has at least one labeling");
    Ok((Hypothesis::from_raw(n, f), v))
}

/// The sample the prior `x` over `rows` fits least, and its consistency mass.
fn worst_sample(rows: &[Hypothesis], x: &[Rational], cols: &[Dichotomy]) -> (usize, Rational) {
    let xf: Vec<f64> = x.iter().map(crate::prob::rational_to_f64).collect();
    let support: Vec<usize> = (0..rows.len()).filter(|&i| !x[i].is_zero()).collect();
    let score = |d: &Dichotomy| support.iter().filter(|&&i| d.consistent(&rows[i])).map(|&i| xf[i]).sum::<f64>();
    let scores: Vec<f64> = Executor::default().map_slice(cols, score);
    let low = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let mut winner: Option<(usize, Rational)> = None;
    for (j, d) in cols.iter().enumerate() {
        if scores[j] <= low + 1e-9 {
            let v = support.iter().filter(|&&i| d.consistent(&rows[i])).fold(Rational::zero(), |t, &i| t + &x[i]);
            if winner.as_ref().is_none_or(|(_, w)| v < *w) {
                winner = Some((j, v));
            }
        }
    }
    winner.expect("at least one realizable sample")
}

#[derive(Debug, Clone)]
pub struct MwOptions {
    pub eps: f64,
    pub eta: f64,
    /// Cap on MW rounds per restricted game; 0 means the `2 ln(N)/eps²` schedule.
    pub max_iterations: usize,
    pub check_every: usize,
}

impl Default for MwOptions {
    fn default() -> Self {
        MwOptions { eps: 1e-3, eta: 0.2, max_iterations: 0, check_every: 50 }
    }
}

/// The adversary's samples: labelings of exactly `min(m, n)` points.
/// A sample on fewer points is dominated by any realizable extension.
pub fn game_columns(class: &HypothesisClass, m: usize, budget: u128) -> Result<Vec<Dichotomy>> {
    realizable_on_exactly(class, m.min(class.domain().size()), budget)
}

pub fn fractional_clique_value(
    class: &HypothesisClass,
    m: usize,
    method: GameMethod,
    budget: u128,
) -> Result<GameValueResult> {
    match method {
        GameMethod::ExactLp => game_value_lp(class, m, budget),
        GameMethod::MwApprox => game_value_mw(class, m, budget, &MwOptions::default()),
    }
}

fn payoff_matrix(rows: &[Hypothesis], cols: &[Dichotomy]) -> Vec<Vec<bool>> {
    rows.iter().map(|h| cols.iter().map(|d| d.consistent(h)).collect()).collect()
}

fn initial_rows(class: &HypothesisClass) -> Vec<Hypothesis> {
    class.members().to_vec()
}

fn check_cells(rows: usize, cols: usize, budget: u128) -> Result<()> {
    let cells = rows as u128 * cols as u128;
    if cells > budget {
        return Err(Error::BudgetExceeded { needed: cells, budget });
    }
    Ok(())
}

/// Up to `k` labelings scoring above `floor` against `y`, best first.
fn top_labelings_f64(n: usize, cols: &[Dichotomy], y: &[f64], floor: f64, k: usize) -> Vec<Hypothesis> {
    let live: Vec<usize> = (0..cols.len()).filter(|&j| y[j] > 0.0).collect();
    let live_cols: Vec<Dichotomy> = live.iter().map(|&j| cols[j]).collect();
    let index = ColumnIndex::new(&live_cols);
    let total = 1usize << n;
    let chunk = 1usize << 12;
    let score = |f: usize| index.fitted(f as u64).map(|j| y[live[j]]).sum::<f64>();
    let keep = |mut v: Vec<(f64, usize)>| {
        v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        v.truncate(k);
        v
    };
    let found: Vec<(f64, usize)> = Executor::default()
        .map(total.div_ceil(chunk), |c| {
            keep((c * chunk..((c + 1) * chunk).min(total)).map(|f| (score(f), f)).filter(|p| p.0 > floor).collect())
        })
        .into_iter()
        .flatten()
        .collect();
    keep(found).into_iter().map(|(_, f)| Hypothesis::from_raw(n, f as u64)).collect()
}

/// Up to `k` samples the prior `x` fits with mass below `ceil`, worst first.
fn bottom_samples_f64(rows: &[Hypothesis], x: &[f64], cols: &[Dichotomy], ceil: f64, k: usize) -> Vec<usize> {
    let support: Vec<usize> = (0..rows.len()).filter(|&i| x[i] > 0.0).collect();
    let score = |d: &Dichotomy| support.iter().filter(|&&i| d.consistent(&rows[i])).map(|&i| x[i]).sum::<f64>();
    let mut low: Vec<(f64, usize)> =
        Executor::default().map_slice(cols, score).into_iter().enumerate().map(|(j, v)| (v, j)).filter(|p| p.0 < ceil).collect();
    low.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    low.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Best responses added per round of the float phase.
const GROW_BATCH: usize = 8;
const MW_GROW_BATCH: usize = 2;

const GROW_TOL: f64 = 1e-7;

/// Exact value: a float double-oracle run finds the relevant labelings and
/// samples, then the restricted game is solved by the exact simplex and
/// both best responses are rechecked in exact arithmetic.
pub fn game_value_lp(class: &HypothesisClass, m: usize, budget: u128) -> Result<GameValueResult> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let n = class.domain().size();
    let cols = game_columns(class, m, budget)?;
    let mut rows = initial_rows(class);
    let mut active: Vec<usize> = vec![0];
    let mut solves = 0;
    // float phase
    loop {
        check_cells(rows.len(), active.len(), budget)?;
        best_labeling_budget(n, budget)?;
        let sub: Vec<Dichotomy> = active.iter().map(|&j| cols[j]).collect();
        let a: Vec<Vec<f64>> =
            payoff_matrix(&rows, &sub).into_iter().map(|r| r.into_iter().map(|c| c as u8 as f64).collect()).collect();
        let Some((v, x, y)) = crate::lp::solve_game_f64(&a) else { break };
        solves += 1;
        let mut grown = false;
        for h in top_labelings_f64(n, &sub, &y, v + GROW_TOL, GROW_BATCH) {
            if !rows.contains(&h) {
                rows.push(h);
                grown = true;
            }
        }
        for j in bottom_samples_f64(&rows[..x.len()], &x, &cols, v - GROW_TOL, GROW_BATCH) {
            if !active.contains(&j) {
                active.push(j);
                grown = true;
            }
        }
        if !grown {
            break;
        }
    }
    // exact phase
    loop {
        check_cells(rows.len(), active.len(), budget)?;
        let sub: Vec<Dichotomy> = active.iter().map(|&j| cols[j]).collect();
        let a: Vec<Vec<Rational>> = payoff_matrix(&rows, &sub)
            .into_iter()
            .map(|r| r.into_iter().map(|c| if c { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        let sol = solve_game(&a)?;
        solves += 1;
        if row_guarantee(&a, &sol.row_strategy) != sol.value || col_guarantee(&a, &sol.col_strategy) != sol.value {
            return Err(Error::InvariantViolation("LP strategies do not certify the game value".into()));
        }
        let mut grown = false;
        let (h, best) = best_labeling(n, &sub, &sol.col_strategy, budget)?;
        if best > sol.value {
            rows.push(h);
            grown = true;
        }
        let (j, worst) = worst_sample(&rows[..sol.row_strategy.len()], &sol.row_strategy, &cols);
        if worst < sol.value {
            active.push(j);
            grown = true;
        }
        if !grown {
            let mut y = vec![Rational::zero(); cols.len()];
            for (k, &j) in active.iter().enumerate() {
                y[j] = sol.col_strategy[k].clone();
            }
            let k = sol.row_strategy.len();
            return assemble(class, &rows[..k], &cols, &sol.row_strategy, &y, m, GameMethod::ExactLp, solves, budget);
        }
    }
}

fn best_labeling_budget(n: usize, budget: u128) -> Result<()> {
    if n > crate::types::FULL_UNIVERSE_LIMIT {
        return Err(Error::DomainTooLarge { size: n, limit: crate::types::FULL_UNIVERSE_LIMIT });
    }
    if 1u128 << n > budget {
        return Err(Error::BudgetExceeded { needed: 1 << n, budget });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    class: &HypothesisClass,
    rows: &[Hypothesis],
    cols: &[Dichotomy],
    x: &[Rational],
    y: &[Rational],
    m: usize,
    method: GameMethod,
    iterations: usize,
    budget: u128,
) -> Result<GameValueResult> {
    let prior = FiniteDistribution::from_pairs(rows.iter().copied().zip(x.iter().cloned()).filter(|(_, p)| !p.is_zero()))?;
    let mix = FiniteDistribution::from_pairs(cols.iter().copied().zip(y.iter().cloned()).filter(|(_, p)| !p.is_zero()))?;
    let value = min_consistency(&prior, cols);
    let (_, upper) = best_labeling(class.domain().size(), cols, y, budget)?;
    let result = GameValueResult {
        m,
        clique_number: value.recip(),
        approx_gap: &upper - &value,
        value,
        optimal_prior: prior,
        hard_sample_mixture: mix,
        upper,
        method,
        iterations,
        rows: rows.len(),
    };
    verify_game_result(class, &result, budget)?;
    Ok(result)
}

/// Round float weights to millionths and renormalize exactly.
fn rationalize(weights: &[f64]) -> Result<Vec<Rational>> {
    let ticks: Vec<u64> = weights.iter().map(|w| (w.max(0.0) * 1e6).round() as u64).collect();
    let total: u64 = ticks.iter().sum();
    if total == 0 {
        return Err(Error::InvariantViolation("MW strategy rounds to zero".into()));
    }
    Ok(ticks.into_iter().map(|t| Rational::new(BigInt::from(t), BigInt::from(total))).collect())
}

/// Optimistic multiplicative-weights self-play on a 0/1 game.
struct Hedge {
    /// Columns each row fits, and rows each column is fitted by.
    by_row: Vec<Vec<u32>>,
    by_col: Vec<Vec<u32>>,
    eta: f64,
    g_row: Vec<f64>,
    l_col: Vec<f64>,
    last_row: Vec<f64>,
    last_col: Vec<f64>,
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
    rounds: usize,
}

fn softmax(score: &[f64]) -> Vec<f64> {
    let top = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = score.iter().map(|s| (s - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

impl Hedge {
    fn new(a: Vec<Vec<bool>>, eta: f64) -> Self {
        let (r, c) = (a.len(), a[0].len());
        let by_row: Vec<Vec<u32>> = a.iter().map(|row| (0..c as u32).filter(|&j| row[j as usize]).collect()).collect();
        let by_col: Vec<Vec<u32>> = (0..c).map(|j| (0..r as u32).filter(|&i| a[i as usize][j]).collect()).collect();
        Hedge {
            by_row,
            by_col,
            eta,
            g_row: vec![0.0; r],
            l_col: vec![0.0; c],
            last_row: vec![0.0; r],
            last_col: vec![0.0; c],
            sum_x: vec![0.0; r],
            sum_y: vec![0.0; c],
            rounds: 0,
        }
    }

    fn gains(&self, y: &[f64]) -> Vec<f64> {
        self.by_row.iter().map(|r| r.iter().map(|&j| y[j as usize]).sum()).collect()
    }

    fn losses(&self, x: &[f64]) -> Vec<f64> {
        self.by_col.iter().map(|c| c.iter().map(|&i| x[i as usize]).sum()).collect()
    }

    fn step(&mut self) {
        let eta = self.eta;
        let xs: Vec<f64> = self.g_row.iter().zip(&self.last_row).map(|(g, l)| eta * (g + l)).collect();
        let ys: Vec<f64> = self.l_col.iter().zip(&self.last_col).map(|(g, l)| -eta * (g + l)).collect();
        let x = softmax(&xs);
        let y = softmax(&ys);
        let gains = self.gains(&y);
        let losses = self.losses(&x);
        for i in 0..x.len() {
            self.g_row[i] += gains[i];
            self.sum_x[i] += x[i];
        }
        for j in 0..y.len() {
            self.l_col[j] += losses[j];
            self.sum_y[j] += y[j];
        }
        self.last_row = gains;
        self.last_col = losses;
        self.rounds += 1;
    }

    /// Averaged strategies and the float bounds they guarantee.
    fn averages(&self) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let t = self.rounds.max(1) as f64;
        let fx: Vec<f64> = self.sum_x.iter().map(|v| v / t).collect();
        let fy: Vec<f64> = self.sum_y.iter().map(|v| v / t).collect();
        let lo = self.losses(&fx).into_iter().fold(f64::INFINITY, f64::min);
        let hi = self.gains(&fy).into_iter().fold(0.0, f64::max);
        (fx, fy, lo, hi)
    }

    /// Play until the averaged strategies are within `target` or `cap` rounds.
    fn run(&mut self, target: f64, check_every: usize, cap: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
        loop {
            for _ in 0..check_every {
                self.step();
            }
            let avg = self.averages();
            if avg.3 - avg.2 <= target || self.rounds >= cap {
                return avg;
            }
        }
    }
}

/// MW self-play on a restricted game that grows by best responses on both
/// sides, tightening its target from coarse to `eps/2`. Both bounds are
/// certified exactly against every labeling and every sample; the run stops
/// early once the certified gap is at most `eps`, and in any case after the
/// `2 ln(N)/eps²` schedule.
pub fn game_value_mw(class: &HypothesisClass, m: usize, budget: u128, opts: &MwOptions) -> Result<GameValueResult> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let n = class.domain().size();
    best_labeling_budget(n, budget)?;
    let cols = game_columns(class, m, budget)?;
    let mut rows = initial_rows(class);
    let mut active: Vec<usize> = vec![0];
    let strategies = ((1u128 << n) as f64).max(cols.len() as f64).max(2.0);
    let schedule = (2.0 * strategies.ln() / (opts.eps * opts.eps)).ceil() as usize;
    let cap = if opts.max_iterations > 0 { opts.max_iterations } else { schedule };
    let mut hedge = Hedge::new(payoff_matrix(&rows, &[cols[0]]), opts.eta);
    let mut spent = 0;
    let mut target = (0.05f64).max(opts.eps / 2.0);
    loop {
        check_cells(rows.len(), active.len(), budget)?;
        let (fx, fy, lo, hi) = hedge.run(target, opts.check_every, cap - spent.min(cap - 1));
        let sub: Vec<Dichotomy> = active.iter().map(|&j| cols[j]).collect();
        let mut grown = false;
        if spent + hedge.rounds < cap {
            for h in top_labelings_f64(n, &sub, &fy, hi + target / 2.0, MW_GROW_BATCH) {
                if !rows.contains(&h) {
                    rows.push(h);
                    grown = true;
                }
            }
            for j in bottom_samples_f64(&rows[..fx.len()], &fx, &cols, lo - target / 2.0, MW_GROW_BATCH) {
                if !active.contains(&j) {
                    active.push(j);
                    grown = true;
                }
            }
        }
        if grown {
            // averages over the old game say little about the new one
            spent += hedge.rounds;
            let sub: Vec<Dichotomy> = active.iter().map(|&j| cols[j]).collect();
            hedge = Hedge::new(payoff_matrix(&rows, &sub), opts.eta);
            continue;
        }
        if target > opts.eps / 2.0 && spent + hedge.rounds < cap {
            target = (target / 4.0).max(opts.eps / 2.0);
            continue;
        }
        spent += hedge.rounds;
        let xr = rationalize(&fx)?;
        let yr = rationalize(&fy)?;
        let mut y = vec![Rational::zero(); cols.len()];
        for (k, &j) in active.iter().enumerate() {
            y[j] = yr[k].clone();
        }
        return assemble(class, &rows[..xr.len()], &cols, &xr, &y, m, GameMethod::MwApprox, spent, budget);
    }
}

/// Re-check a game result: both certificates recomputed from scratch.
pub fn verify_game_result(class: &HypothesisClass, r: &GameValueResult, budget: u128) -> Result<()> {
    let n = class.domain().size();
    let cols = game_columns(class, r.m, budget)?;
    for d in r.hard_sample_mixture.atoms() {
        if cols.binary_search(d).is_err() {
            return Err(Error::InvariantViolation(format!("{} is not a realizable sample", d.render())));
        }
    }
    if r.optimal_prior.atoms().iter().any(|h| h.len() != n) {
        return Err(Error::InvariantViolation("prior over the wrong domain".into()));
    }
    let lower = min_consistency(&r.optimal_prior, &cols);
    let y: Vec<Rational> = cols.iter().map(|d| r.hard_sample_mixture.prob_of(d)).collect();
    let (_, upper) = best_labeling(n, &cols, &y, budget)?;
    if lower != r.value || upper != r.upper || r.approx_gap != &upper - &lower || r.approx_gap.is_negative() {
        return Err(Error::InvariantViolation("game certificate does not re-verify".into()));
    }
    if r.clique_number != r.value.recip() {
        return Err(Error::InvariantViolation("clique number is not 1/value".into()));
    }
    if r.method == GameMethod::ExactLp && !r.approx_gap.is_zero() {
        return Err(Error::InvariantViolation("exact LP with a positive gap".into()));
    }
    // a uniformly random labeling fits any sample on k points with probability 2^-k
    let floor = Rational::new(BigInt::one(), BigInt::one() << r.m.min(n));
    if r.value > Rational::one() || r.upper < floor || (r.method == GameMethod::ExactLp && r.value < floor) {
        return Err(Error::InvariantViolation(format!("game value {} out of range", format_rational(&r.value))));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub m: usize,
    #[serde(serialize_with = "ser_rational")]
    pub clique_number: Rational,
    pub two_pow_m: u128,
    pub ratio: f64,
    pub saturated: bool,
}

fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Largest probed `m` with `C_m = 2^m` (0 if none).
    pub fractional_clique_dimension: usize,
    /// Some probed `m` has `C_m < 2^m`.
    pub dp_learnable_consistent: bool,
}

pub fn dichotomy_probe(class: &HypothesisClass, m_grid: &[usize], budget: u128) -> Result<ProbeReport> {
    let mut rows = Vec::new();
    for &m in m_grid {
        let r = game_value_lp(class, m, budget)?;
        let two = 1u128 << m;
        let full = r.clique_number == Rational::from_integer(BigInt::from(two));
        rows.push(ProbeRow {
            m,
            ratio: crate::prob::rational_to_f64(&r.clique_number) / two as f64,
            clique_number: r.clique_number,
            two_pow_m: two,
            saturated: full,
        });
    }
    let fc = rows.iter().filter(|r| r.saturated).map(|r| r.m).max().unwrap_or(0);
    let learnable = rows.iter().any(|r| !r.saturated);
    Ok(ProbeReport { rows, fractional_clique_dimension: fc, dp_learnable_consistent: learnable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::rational;
    use crate::types::Domain;

    #[test]
    fn littlestone_examples() {
        let d = Domain::new(3).unwrap();
        let single = HypothesisClass::new(d, vec![Hypothesis::zeros(3)]).unwrap();
        assert_eq!(littlestone_dimension(&single, DEFAULT_BUDGET).unwrap(), 0);
        for n in 1..=6 {
            assert_eq!(littlestone_dimension(&HypothesisClass::full(n).unwrap(), DEFAULT_BUDGET).unwrap(), n as u32);
        }
        assert_eq!(littlestone_dimension(&HypothesisClass::thresholds(4).unwrap(), DEFAULT_BUDGET).unwrap(), 2);
        for n in [2usize, 4, 8, 16] {
            let ld = littlestone_dimension(&HypothesisClass::thresholds(n).unwrap(), DEFAULT_BUDGET).unwrap();
            assert_eq!(ld, n.ilog2());
        }
    }

    #[test]
    fn clique_examples() {
        let d = Domain::new(3).unwrap();
        let single = HypothesisClass::new(d, vec![Hypothesis::zeros(3)]).unwrap();
        assert_eq!(clique_dimension(&single, 3, DEFAULT_BUDGET).unwrap().dimension, 0);
        let full2 = clique_dimension(&HypothesisClass::full(2).unwrap(), 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(full2.dimension, 2);
        assert_eq!(full2.witness.len(), 4);
        let t8 = clique_dimension(&HypothesisClass::thresholds(8).unwrap(), 3, DEFAULT_BUDGET).unwrap();
        // four pairwise-contradicting realizable pairs of points exist for thresholds on 8 points
        assert!(t8.dimension >= 2);
        for (i, a) in t8.witness.iter().enumerate() {
            for b in &t8.witness[i + 1..] {
                assert!(a.contradicts(b));
            }
        }
    }

    #[test]
    fn threshold_count_examples() {
        let d = Domain::new(3).unwrap();
        let constant = HypothesisClass::new(d, vec![Hypothesis::ones(3)]).unwrap();
        assert_eq!(threshold_count(&constant, DEFAULT_BUDGET).unwrap(), 1);
        for n in 1..=8 {
            assert_eq!(threshold_count(&HypothesisClass::thresholds(n).unwrap(), DEFAULT_BUDGET).unwrap(), n);
        }
        assert!(threshold_count(&HypothesisClass::full(3).unwrap(), DEFAULT_BUDGET).unwrap() >= 3);
    }

    #[test]
    fn realizable_dichotomy_counts() {
        for n in 1..5 {
            let full = HypothesisClass::full(n).unwrap();
            assert_eq!(realizable_dichotomies(&full, 1, DEFAULT_BUDGET).unwrap().len(), 2 * n);
            let single = HypothesisClass::new(Domain::new(n).unwrap(), vec![Hypothesis::zeros(n)]).unwrap();
            assert_eq!(realizable_dichotomies(&single, 1, DEFAULT_BUDGET).unwrap().len(), n);
        }
    }

    #[test]
    fn thresholds_pairs_match_brute_force() {
        let class = HypothesisClass::thresholds(3).unwrap();
        let mut brute = std::collections::BTreeSet::new();
        for x1 in 0..3u32 {
            for x2 in 0..3u32 {
                for y1 in [false, true] {
                    for y2 in [false, true] {
                        let s = LabeledSample::new(class.domain(), vec![Example::new(x1, y1), Example::new(x2, y2)]).unwrap();
                        if class.members().iter().any(|h| s.is_consistent_with(h)) {
                            brute.insert(Dichotomy::from_sample(&s).unwrap());
                        }
                    }
                }
            }
        }
        let listed = realizable_dichotomies(&class, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(listed, brute.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn game_value_examples() {
        let full1 = HypothesisClass::full(1).unwrap();
        let r = game_value_lp(&full1, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.value, rational(1, 2));
        assert_eq!(r.clique_number, rational(2, 1));
        let d = Domain::new(4).unwrap();
        let single = HypothesisClass::new(d, vec![Hypothesis::threshold(4, 2)]).unwrap();
        for m in 1..4 {
            let r = game_value_lp(&single, m, DEFAULT_BUDGET).unwrap();
            assert_eq!(r.value, rational(1, 1));
            assert_eq!(r.optimal_prior, FiniteDistribution::point_mass(Hypothesis::threshold(4, 2)));
        }
    }

    #[test]
    fn lp_and_mw_agree_on_thresholds_16() {
        let class = HypothesisClass::thresholds(16).unwrap();
        let lp = game_value_lp(&class, 2, DEFAULT_BUDGET).unwrap();
        let mw = game_value_mw(&class, 2, DEFAULT_BUDGET, &MwOptions::default()).unwrap();
        assert!(mw.value <= lp.value && lp.value <= mw.upper);
        assert!(mw.approx_gap <= rational(1, 1000), "gap {}", format_rational(&mw.approx_gap));
    }

    #[test]
    fn probe_examples() {
        let full1 = HypothesisClass::full(1).unwrap();
        let p = dichotomy_probe(&full1, &[1, 2], DEFAULT_BUDGET).unwrap();
        assert_eq!(p.rows[0].clique_number, rational(2, 1));
        assert!(p.rows[0].saturated);
        assert!(p.rows[1].clique_number < rational(4, 1));
        assert_eq!(p.fractional_clique_dimension, 1);
        let d = Domain::new(3).unwrap();
        let single = HypothesisClass::new(d, vec![Hypothesis::zeros(3)]).unwrap();
        let p = dichotomy_probe(&single, &[1, 2, 3], DEFAULT_BUDGET).unwrap();
        assert!(p.rows.iter().all(|r| r.clique_number == rational(1, 1)));
        assert!(p.dp_learnable_consistent);
    }

    #[test]
    fn thresholds_clique_number_grows_with_n() {
        let mut last = Rational::zero();
        for n in [2usize, 3, 4, 6, 8] {
            let r = game_value_lp(&HypothesisClass::thresholds(n).unwrap(), 2, DEFAULT_BUDGET).unwrap();
            assert!(r.clique_number >= last);
            assert!(r.clique_number <= rational(4, 1));
            last = r.clique_number;
        }
        assert!(last > rational(2, 1));
    }

    #[test]
    fn value_nonincreasing_in_m() {
        for class in [HypothesisClass::thresholds(4).unwrap(), HypothesisClass::full(2).unwrap(), HypothesisClass::points(3).unwrap()] {
            let vals: Vec<Rational> = (1..=3).map(|m| game_value_lp(&class, m, DEFAULT_BUDGET).unwrap().value).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0]), "{vals:?}");
        }
    }

    #[test]
    fn best_labeling_matches_brute_force() {
        let class = HypothesisClass::thresholds(4).unwrap();
        let cols = game_columns(&class, 2, DEFAULT_BUDGET).unwrap();
        let y: Vec<Rational> = (0..cols.len()).map(|j| rational(j as i64 % 5 + 1, 7)).collect();
        let (h, v) = best_labeling(4, &cols, &y, DEFAULT_BUDGET).unwrap();
        let brute = Domain::new(4)
            .unwrap()
            .all_functions()
            .unwrap()
            .into_iter()
            .map(|f| cols.iter().zip(&y).filter(|(d, _)| d.consistent(&f)).fold(Rational::zero(), |t, (_, w)| t + w))
            .max()
            .unwrap();
        assert_eq!(v, brute);
        assert_eq!(cols.iter().zip(&y).filter(|(d, _)| d.consistent(&h)).fold(Rational::zero(), |t, (_, w)| t + w), v);
    }

    #[test]
    fn ld_dominates_log_threshold_count() {
        for class in [
            HypothesisClass::thresholds(6).unwrap(),
            HypothesisClass::full(3).unwrap(),
            HypothesisClass::points(5).unwrap(),
            HypothesisClass::singletons(4).unwrap(),
        ] {
            let d = threshold_count(&class, DEFAULT_BUDGET).unwrap();
            let ld = littlestone_dimension(&class, DEFAULT_BUDGET).unwrap();
            assert!(ld >= d.ilog2(), "LD {ld} vs thresholds {d}");
        }
    }

    #[test]
    fn double_oracle_matches_full_matrix() {
        for class in [
            HypothesisClass::full(2).unwrap(),
            HypothesisClass::thresholds(3).unwrap(),
            HypothesisClass::points(3).unwrap(),
            HypothesisClass::singletons(4).unwrap(),
        ] {
            let n = class.domain().size();
            let labelings = class.domain().all_functions().unwrap();
            for m in 1..=3 {
                let cols = game_columns(&class, m, DEFAULT_BUDGET).unwrap();
                let a: Vec<Vec<Rational>> = labelings
                    .iter()
                    .map(|h| cols.iter().map(|d| if d.consistent(h) { rational(1, 1) } else { rational(0, 1) }).collect())
                    .collect();
                let full = solve_game(&a).unwrap();
                let lp = game_value_lp(&class, m, DEFAULT_BUDGET).unwrap();
                assert_eq!(lp.value, full.value, "n={n} m={m}");
                let mw = game_value_mw(&class, m, DEFAULT_BUDGET, &MwOptions::default()).unwrap();
                assert!(mw.value <= full.value && full.value <= mw.upper);
            }
        }
    }
}
