//! Online learning with expert advice: multiplicative weights in gain form.

use rand::Rng;
use serde::Serialize;

use crate::dist::{rng_from_seed, FiniteDistribution};
use crate::error::{Error, Result};

/// Step size for a known horizon: `√(2 ln m / T)`.
pub fn default_eta(experts: usize, horizon: usize) -> f64 {
    if experts <= 1 || horizon == 0 {
        return 0.0;
    }
    (2.0 * (experts as f64).ln() / horizon as f64).sqrt()
}

/// `√(2 T ln m)`.
pub fn regret_bound(experts: usize, horizon: usize) -> f64 {
    (2.0 * horizon as f64 * (experts as f64).ln()).sqrt()
}

fn normalized_exp(scores: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let top = scores.clone().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.map(|s| (s - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// `w(z) ∝ exp(η · U(z,t))` where `U(z,t)` sums the utility rows of `history`.
pub fn mw_weights(history: &[Vec<bool>], experts: usize, eta: f64) -> Result<FiniteDistribution<usize, f64>> {
    if experts == 0 {
        return Err(Error::InvalidParameter("no experts".into()));
    }
    let mut totals = vec![0u64; experts];
    for row in history {
        if row.len() != experts {
            return Err(Error::LengthMismatch { expected: experts, got: row.len() });
        }
        for (t, &u) in totals.iter_mut().zip(row) {
            *t += u as u64;
        }
    }
    let w = normalized_exp(totals.iter().map(|&u| eta * u as f64));
    Ok(FiniteDistribution::from_sorted_unchecked((0..experts).collect(), w))
}

/// Running multiplicative-weights state.
#[derive(Debug, Clone)]
pub struct MultiplicativeWeights {
    eta: f64,
    totals: Vec<u64>,
    rounds: usize,
}

impl MultiplicativeWeights {
    pub fn new(experts: usize, horizon: usize) -> Self {
        Self::with_eta(experts, default_eta(experts, horizon))
    }

    pub fn with_eta(experts: usize, eta: f64) -> Self {
        MultiplicativeWeights { eta, totals: vec![0; experts], rounds: 0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// `U(z,t)` for every expert.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn weights(&self) -> Vec<f64> {
        normalized_exp(self.totals.iter().map(|&u| self.eta * u as f64))
    }

    pub fn distribution(&self) -> FiniteDistribution<usize, f64> {
        FiniteDistribution::from_sorted_unchecked((0..self.totals.len()).collect(), self.weights())
    }

    pub fn update(&mut self, utilities: &[bool]) -> Result<()> {
        if utilities.len() != self.totals.len() {
            return Err(Error::LengthMismatch { expected: self.totals.len(), got: utilities.len() });
        }
        for (t, &u) in self.totals.iter_mut().zip(utilities) {
            *t += u as u64;
        }
        self.rounds += 1;
        Ok(())
    }
}

/// Experts × instances table of 0/1 utilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityTable {
    rows: Vec<Vec<bool>>,
}

impl UtilityTable {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self> {
        let k = rows.first().map(|r| r.len()).ok_or_else(|| Error::InvalidParameter("no experts".into()))?;
        if k == 0 {
            return Err(Error::InvalidParameter("no instances".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch { expected: k, got: r.len() });
        }
        Ok(UtilityTable { rows })
    }

    pub fn random(experts: usize, instances: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        Self::new((0..experts).map(|_| (0..instances).map(|_| rng.gen_bool(0.5)).collect()).collect())
    }

    pub fn experts(&self) -> usize {
        self.rows.len()
    }

    pub fn instances(&self) -> usize {
        self.rows[0].len()
    }

    pub fn utility(&self, expert: usize, instance: usize) -> bool {
        self.rows[expert][instance]
    }

    pub fn column(&self, instance: usize) -> Vec<bool> {
        self.rows.iter().map(|r| r[instance]).collect()
    }

    /// `E_{z∼w}[u(z, instance)]`.
    pub fn expected(&self, weights: &[f64], instance: usize) -> f64 {
        self.rows.iter().zip(weights).filter(|(r, _)| r[instance]).map(|(_, w)| w).sum()
    }
}

/// How the adversary picks each round's instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// Instance minimizing the learner's expected utility under the current weights.
    BestResponse,
    /// Uniform instance each round.
    Random,
    /// I.i.d. draws from a fixed distribution over instances.
    Stationary(Vec<f64>),
    /// Always the same instance.
    Fixed(usize),
}

impl Adversary {
    fn choose(&self, table: &UtilityTable, weights: &[f64], rng: &mut impl Rng) -> usize {
        match self {
            Adversary::BestResponse => (0..table.instances())
                .map(|i| (table.expected(weights, i), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, i)| i)
                .expect("nonempty"),
            Adversary::Random => rng.gen_range(0..table.instances()),
            Adversary::Stationary(p) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, w) in p.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return i;
                    }
                }
                p.len() - 1
            }
            Adversary::Fixed(i) => *i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub weights: Vec<f64>,
    pub instance: usize,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub eta: f64,
    pub rounds: Vec<Round>,
    /// `U(ℒ,T)`.
    pub learner_total: f64,
    /// `U(z,T)` per expert.
    pub expert_totals: Vec<u64>,
    pub regret: f64,
    pub bound: f64,
}

impl Transcript {
    pub fn best_expert_total(&self) -> u64 {
        self.expert_totals.iter().copied().max().unwrap_or(0)
    }

    /// Recompute `U(ℒ,T)` and `U(z,T)` from the rounds.
    pub fn recheck(&self, table: &UtilityTable) -> bool {
        let learner: f64 = self.rounds.iter().map(|r| r.utility).sum();
        let mut experts = vec![0u64; table.experts()];
        for r in &self.rounds {
            if table.expected(&r.weights, r.instance) != r.utility {
                return false;
            }
            for (z, e) in experts.iter_mut().enumerate() {
                *e += table.utility(z, r.instance) as u64;
            }
        }
        learner == self.learner_total && experts == self.expert_totals
    }

    pub fn to_csv(&self) -> Result<String> {
        let m = self.expert_totals.len();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["round".to_string()];
        header.extend((0..m).map(|z| format!("w{z}")));
        header.extend(["instance".to_string(), "utility".to_string()]);
        w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
        for (t, r) in self.rounds.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(r.weights.iter().map(|v| v.to_string()));
            rec.extend([r.instance.to_string(), r.utility.to_string()]);
            w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Play `horizon` rounds of MW against `adversary`.
pub fn run_game(table: &UtilityTable, horizon: usize, adversary: &Adversary, seed: u64) -> Result<Transcript> {
    if let Adversary::Fixed(i) = adversary {
        if *i >= table.instances() {
            return Err(Error::IndexOutOfRange { index: *i, len: table.instances() });
        }
    }
    if let Adversary::Stationary(p) = adversary {
        if p.len() != table.instances() {
            return Err(Error::LengthMismatch { expected: table.instances(), got: p.len() });
        }
    }
    let mut mw = MultiplicativeWeights::new(table.experts(), horizon);
    let mut rng = rng_from_seed(seed);
    let mut rounds = Vec::with_capacity(horizon);
    let mut learner_total = 0.0;
    for _ in 0..horizon {
        let weights = mw.weights();
        let instance = adversary.choose(table, &weights, &mut rng);
        let utility = table.expected(&weights, instance);
        learner_total += utility;
        mw.update(&table.column(instance))?;
        rounds.push(Round { weights, instance, utility });
    }
    let expert_totals = mw.totals().to_vec();
    let best = expert_totals.iter().copied().max().unwrap_or(0) as f64;
    Ok(Transcript {
        eta: mw.eta(),
        rounds,
        learner_total,
        regret: best - learner_total,
        bound: regret_bound(table.experts(), horizon),
        expert_totals,
    })
}
