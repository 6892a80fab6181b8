//! Declarative experiment configs and the end-to-end pipelines.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{
    dd_kl_stability_check, dd_prior_from_marginal, dp_check, global_stability, max_information, mutual_information,
    pac_bayes_for_rule, pac_bayes_trial, perfect_generalization, replicability, sample_law, subsample_witness,
    tv_stability, Mode, PacBayesTrial, PgMode, StabilityReport, SubsampleWitness,
};
use crate::boosting::{boost, boosted_prior, kl_ledger_with_law, BoostConfig};
use crate::di::{certify_renyi, DiMixturePrior, RenyiCertificate};
use crate::dimensions::{clique_dimension, littlestone_dimension, threshold_count};
use crate::dist::{rng_from_seed, CdfTable, TruncatedHarmonicMixture};
use crate::divergences::Eps;
use crate::error::{Error, Result};
use crate::exec::{shard_seed, Executor};
use crate::learners::{
    finite_class_weak_learner, measure_weak_learner, ordered_samples, rule_from_spec, uniform_marginal, LearningRule,
    RejectionSampler, WeakMeasurement, WeakParams,
};
use crate::prob::{format_rational, parse_rational, rational_to_f64, LogProb, Rational};
use crate::types::{Example, Hypothesis, HypothesisClass, LabeledSample, PopulationDistribution};
use crate::FiniteDistribution;

pub const DEFAULT_BUDGET: u64 = 1 << 24;
pub const LOG_BASE: &str = "e";
pub const TIE_RULE: &str = "majority ties resolve to label 1";
pub const BUDGET_ENV: &str = "STABILITY_LAB_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineName {
    DiEquivalence,
    DdAudit,
    BoostSweep,
    DimsSweep,
}

impl PipelineName {
    pub const ALL: [PipelineName; 4] =
        [PipelineName::DiEquivalence, PipelineName::DdAudit, PipelineName::BoostSweep, PipelineName::DimsSweep];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineName::DiEquivalence => "di-equivalence",
            PipelineName::DdAudit => "dd-audit",
            PipelineName::BoostSweep => "boost-sweep",
            PipelineName::DimsSweep => "dims-sweep",
        }
    }

    fn file_stem(self) -> String {
        self.as_str().replace('-', "_")
    }
}

impl FromStr for PipelineName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PipelineName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown pipeline '{s}' (expected di-equivalence, dd-audit, boost-sweep or dims-sweep)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Exact,
    Mc,
}

/// Per-definition budgets; unset entries are reported without a verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// `ε` for dp, pg and maxinfo: decimal nats or `ln(r)`.
    pub eps: Option<String>,
    pub delta: Option<String>,
    /// Minimum replicability.
    pub rho: Option<String>,
    /// Minimum global stability.
    pub eta: Option<String>,
    /// Maximum mutual information, in nats.
    pub mi: Option<f64>,
    pub tv: Option<f64>,
    pub pg_beta: Option<String>,
    /// Rational, or `1/m`.
    pub pac_beta: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Option<PipelineName>,
    pub seed: u64,
    /// `thresholds:n`, `full:n`, `singletons:n`, `points:n` or `file:<path>`.
    pub class: Option<String>,
    #[serde(default)]
    pub classes: Vec<String>,
    pub rule: Option<String>,
    #[serde(default)]
    pub populations: Vec<String>,
    #[serde(default)]
    pub m: Vec<usize>,
    pub trials: Option<u64>,
    #[serde(default)]
    pub mode: RunMode,
    pub truncation: Option<usize>,
    pub budget: Option<u64>,
    #[serde(default)]
    pub defs: Vec<String>,
    pub k: Option<usize>,
    pub weak_trials: Option<u64>,
    pub pac_trials: Option<u64>,
    pub exact_ledger: Option<bool>,
    pub witness_samples: Option<usize>,
    pub clique_max: Option<usize>,
    #[serde(default)]
    pub budgets: Budgets,
}

pub const ALL_DEFS: [&str; 9] = ["dp", "rep", "gs", "mi", "kl", "tv", "pg", "maxinfo", "pacbayes"];

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        let rest = t.strip_prefix(key).or_else(|| t.strip_prefix(&format!("\"{key}\"")));
        matches!(rest.map(|r| r.trim_start()), Some(r) if r.starts_with('=') || r.starts_with(':'))
    })
    .map(|i| i + 1)
}

fn config_err(text: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match line_of(text, key) {
        Some(n) => Error::Config(format!("line {n}: `{key}`: {msg}")),
        None => Error::Config(format!("`{key}`: {msg}")),
    }
}

impl ExperimentConfig {
    /// Minimal config for `pipeline` with every other field defaulted.
    pub fn new(pipeline: PipelineName, seed: u64) -> Self {
        ExperimentConfig {
            pipeline: Some(pipeline),
            seed,
            class: None,
            classes: Vec::new(),
            rule: None,
            populations: Vec::new(),
            m: Vec::new(),
            trials: None,
            mode: RunMode::Exact,
            truncation: None,
            budget: None,
            defs: Vec::new(),
            k: None,
            weak_trials: None,
            pac_trials: None,
            exact_ledger: None,
            witness_samples: None,
            clique_max: None,
            budgets: Budgets::default(),
        }
    }

    /// TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?
        } else {
            toml::from_str(text).map_err(|e| {
                let pos = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
                match pos {
                    Some(line) => Error::Config(format!("line {line}: {}", e.message())),
                    None => Error::Config(e.message().to_string()),
                }
            })?
        };
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Semantic checks; `text` locates the offending key.
    pub fn validate(&self, text: &str) -> Result<()> {
        if let Some(m) = self.m.iter().find(|&&m| m == 0) {
            return Err(config_err(text, "m", format!("sample sizes must be positive, got {m}")));
        }
        for (key, v) in [("trials", self.trials), ("weak_trials", self.weak_trials), ("pac_trials", self.pac_trials)] {
            if v == Some(0) {
                return Err(config_err(text, key, "must be positive"));
            }
        }
        if self.truncation == Some(0) {
            return Err(config_err(text, "truncation", "must be at least 1"));
        }
        if self.budget == Some(0) {
            return Err(config_err(text, "budget", "must be positive"));
        }
        if self.k == Some(0) {
            return Err(config_err(text, "k", "must be at least 1"));
        }
        let class = match &self.class {
            Some(spec) => Some(load_class(spec).map_err(|e| config_err(text, "class", e))?),
            None => None,
        };
        for spec in &self.classes {
            load_class(spec).map_err(|e| config_err(text, "classes", e))?;
        }
        if let (Some(rule), Some(class)) = (&self.rule, &class) {
            rule_from_spec(rule, class).map_err(|e| config_err(text, "rule", e))?;
        }
        if let Some(class) = &class {
            for p in &self.populations {
                parse_population(p, class).map_err(|e| config_err(text, "populations", e))?;
            }
        }
        for d in &self.defs {
            if !ALL_DEFS.contains(&d.as_str()) {
                return Err(config_err(text, "defs", format!("unknown definition '{d}' (known: {})", ALL_DEFS.join(","))));
            }
        }
        let b = &self.budgets;
        if let Some(e) = &b.eps {
            Eps::parse(e).map_err(|err| config_err(text, "eps", err))?;
        }
        for (key, v) in [("delta", &b.delta), ("rho", &b.rho), ("eta", &b.eta), ("pg_beta", &b.pg_beta)] {
            if let Some(v) = v {
                let r = parse_rational(v).map_err(|err| config_err(text, key, err))?;
                if r < Rational::from_integer(0.into()) || r > Rational::from_integer(1.into()) {
                    return Err(config_err(text, key, format!("{v} outside [0, 1]")));
                }
            }
        }
        if let Some(v) = &b.pac_beta {
            if v != "1/m" {
                let r = parse_rational(v).map_err(|err| config_err(text, "pac_beta", err))?;
                if r <= Rational::from_integer(0.into()) || r > Rational::from_integer(1.into()) {
                    return Err(config_err(text, "pac_beta", format!("{v} outside (0, 1]")));
                }
            }
        }
        for (key, v) in [("mi", b.mi), ("tv", b.tv)] {
            if matches!(v, Some(x) if !(x >= 0.0 && x.is_finite())) {
                return Err(config_err(text, key, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn budget(&self) -> u128 {
        self.budget.unwrap_or(DEFAULT_BUDGET) as u128
    }
}

/// Builtin class spec or `file:<path>` with one 0/1 string per line.
pub fn load_class(spec: &str) -> Result<HypothesisClass> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
            HypothesisClass::from_text(&text)
        }
        None => HypothesisClass::builtin(spec),
    }
}

/// `uniform-marginal:<bits>`, `uniform-marginal:member=<i>`, `point:<x>:<y>`,
/// or `atoms:<x>:<y>=<p>;…`.
pub fn parse_population(spec: &str, class: &HypothesisClass) -> Result<PopulationDistribution> {
    let n = class.domain().size();
    let bad = || Error::Parse(format!("invalid population spec '{spec}'"));
    let example = |x: &str, y: &str| -> Result<Example> {
        let x: u32 = x.trim().parse().map_err(|_| bad())?;
        if x as usize >= n {
            return Err(Error::PointOutOfRange { point: x, size: n });
        }
        let y = match y.trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        Ok(Example::new(x, y))
    };
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "uniform-marginal" => {
            let target = match arg.strip_prefix("member=") {
                Some(i) => {
                    let i: usize = i.parse().map_err(|_| bad())?;
                    *class.members().get(i).ok_or(Error::IndexOutOfRange { index: i, len: class.len() })?
                }
                None => {
                    let h: Hypothesis = arg.parse()?;
                    if h.len() != n {
                        return Err(Error::LengthMismatch { expected: n, got: h.len() });
                    }
                    h
                }
            };
            Ok(uniform_marginal(&target))
        }
        "point" => {
            let (x, y) = arg.split_once(':').ok_or_else(bad)?;
            Ok(FiniteDistribution::point_mass(example(x, y)?))
        }
        "atoms" => {
            let mut pairs = Vec::new();
            for part in arg.split(';').filter(|p| !p.trim().is_empty()) {
                let (xy, p) = part.split_once('=').ok_or_else(bad)?;
                let (x, y) = xy.split_once(':').ok_or_else(bad)?;
                pairs.push((example(x, y)?, parse_rational(p.trim())?));
            }
            FiniteDistribution::from_pairs(pairs)
        }
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    BudgetFail,
}

/// Rendered report files plus the overall verdict.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub pipeline: PipelineName,
    pub status: Status,
    /// `(file name, contents)`, in write order.
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

impl PipelineOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub pipeline: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub truncation: Option<usize>,
    pub log_base: &'static str,
    pub tie_rule: &'static str,
    pub budget: String,
    pub mode: RunMode,
}

fn header(name: PipelineName, cfg: &ExperimentConfig, truncation: Option<usize>) -> ReportHeader {
    ReportHeader {
        pipeline: name.as_str(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        truncation,
        log_base: LOG_BASE,
        tie_rule: TIE_RULE,
        budget: cfg.budget().to_string(),
        mode: cfg.mode,
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Io(e.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
}

fn f(v: f64) -> String {
    format!("{v:.9}")
}

pub fn run_pipeline(name: PipelineName, cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    match name {
        PipelineName::DiEquivalence => di_equivalence(cfg),
        PipelineName::DdAudit => dd_audit(cfg),
        PipelineName::BoostSweep => boost_sweep(cfg),
        PipelineName::DimsSweep => dims_sweep(cfg),
    }
}

// ---------------------------------------------------------------- di-equivalence

#[derive(Debug, Clone, Serialize)]
struct DiRow {
    m: usize,
    value: String,
    clique_number: String,
    two_pow_m: u128,
    saturated: bool,
    /// `ε(m) = ln(z_L m² C_m)`.
    eps_certified: f64,
    certificate: RenyiCertificate,
    witnesses: Vec<SubsampleWitness>,
}

#[derive(Debug, Clone, Serialize)]
struct DiReport {
    header: ReportHeader,
    class: String,
    z_l: String,
    mass_deficit: f64,
    games: Vec<crate::dimensions::GameValueResult>,
    rows: Vec<DiRow>,
    pass: bool,
}

fn di_equivalence(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let name = PipelineName::DiEquivalence;
    let class_spec = cfg.class.clone().unwrap_or_else(|| "full:1".into());
    let class = load_class(&class_spec)?;
    let ms = if cfg.m.is_empty() { vec![1, 2, 3] } else { cfg.m.clone() };
    let top = *ms.iter().max().expect("nonempty grid");
    let l = cfg.truncation.unwrap_or(top);
    if top > l {
        return Err(Error::Config(format!("`m`: {top} exceeds truncation L = {l}")));
    }
    let budget = cfg.budget();
    let di = DiMixturePrior::build(&class, l, budget)?;
    let rule = di.sampler()?;
    let per_m = cfg.witness_samples.unwrap_or(3);
    let mut rows = Vec::new();
    for &m in &ms {
        let game = &di.games[m - 1];
        let cert = certify_renyi(&di, m, budget)?;
        if !cert.holds() {
            return Err(Error::InvariantViolation(format!(
                "Rényi certificate fails at m = {m}: {} violations, {} identity mismatches",
                cert.violations, cert.identity_mismatches
            )));
        }
        let mut witnesses = Vec::new();
        if m >= 2 && per_m > 0 {
            let realizable: Vec<LabeledSample> = ordered_samples(class.domain(), m, budget)?
                .into_iter()
                .filter(|s| class.members().iter().any(|h| s.is_consistent_with(h)))
                .collect();
            let mut rng = rng_from_seed(shard_seed(cfg.seed, m));
            let picks = rand::seq::index::sample(&mut rng, realizable.len(), per_m.min(realizable.len())).into_vec();
            let cap = di.kl_cap(m)?;
            for i in picks {
                let w = subsample_witness(&rule, &di.prior, &realizable[i], Some(&cap))?;
                if !w.certificate_holds || !w.bound_ok {
                    return Err(Error::InvariantViolation(format!(
                        "subsample witness fails at m = {m} on {}",
                        realizable[i].to_csv().replace('\n', " ")
                    )));
                }
                witnesses.push(w);
            }
        }
        rows.push(DiRow {
            m,
            value: format_rational(&game.value),
            clique_number: format_rational(&game.clique_number),
            two_pow_m: 1u128 << m,
            saturated: game.clique_number == Rational::from_integer((1u64 << m).into()),
            eps_certified: di.kl_cap(m)?.to_f64(),
            certificate: cert,
            witnesses,
        });
    }
    let csv_rows = rows
        .iter()
        .map(|r| {
            let min_event = r.witnesses.iter().map(|w| w.prior_event).fold(f64::INFINITY, f64::min);
            let max_target = r.witnesses.iter().map(|w| w.target).fold(0.0, f64::max);
            vec![
                r.m.to_string(),
                r.value.clone(),
                r.clique_number.clone(),
                r.two_pow_m.to_string(),
                r.saturated.to_string(),
                f(r.eps_certified),
                f(r.certificate.worst.to_f64()),
                r.certificate.samples.to_string(),
                r.certificate.violations.to_string(),
                r.witnesses.len().to_string(),
                if r.witnesses.is_empty() { String::new() } else { f(min_event) },
                if r.witnesses.is_empty() { String::new() } else { f(max_target) },
                r.witnesses.iter().all(|w| w.q_event_ok).to_string(),
                r.witnesses.iter().all(|w| w.tail_ok).to_string(),
            ]
        })
        .collect();
    let csv = csv_text(
        &[
            "m", "value", "clique_number", "two_pow_m", "saturated", "eps_certified", "eps_worst", "samples",
            "violations", "witnesses", "witness_min_prior_event", "witness_max_target", "q_event_ok", "tail_ok",
        ],
        csv_rows,
    )?;
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "m={} C_m={} eps(m)={:.6} worst={:.6} samples={} witnesses={}",
                r.m,
                r.clique_number,
                r.eps_certified,
                r.certificate.worst.to_f64(),
                r.certificate.samples,
                r.witnesses.len()
            )
        })
        .collect();
    let report = DiReport {
        header: header(name, cfg, Some(l)),
        class: class_spec,
        z_l: format_rational(di.mixture.z_l()),
        mass_deficit: di.mixture.mass_deficit(),
        games: di.games.clone(),
        rows,
        pass: true,
    };
    let stem = name.file_stem();
    Ok(PipelineOutput {
        pipeline: name,
        status: Status::Pass,
        files: vec![(format!("{stem}.json"), to_json(&report)), (format!("{stem}.csv"), csv)],
        summary,
    })
}

// ---------------------------------------------------------------- dd-audit

#[derive(Debug, Clone, Serialize)]
struct AuditEntry {
    population: String,
    report: StabilityReport,
}

#[derive(Debug, Clone, Serialize)]
struct AuditReport {
    header: ReportHeader,
    class: String,
    rule: String,
    entries: Vec<AuditEntry>,
    pass: bool,
}

fn parse_eps(b: &Budgets) -> Result<Eps> {
    b.eps.as_deref().map(Eps::parse).transpose().map(|e| e.unwrap_or_else(Eps::zero))
}

fn parse_opt_rational(v: &Option<String>) -> Result<Option<Rational>> {
    v.as_deref().map(parse_rational).transpose()
}

fn pac_beta_for(b: &Budgets, m: usize) -> Result<Rational> {
    match b.pac_beta.as_deref() {
        None | Some("1/m") => Ok(Rational::new(1.into(), (m as u64).into())),
        Some(v) => parse_rational(v),
    }
}

fn dd_audit(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let name = PipelineName::DdAudit;
    let class_spec = cfg.class.clone().unwrap_or_else(|| "full:2".into());
    let class = load_class(&class_spec)?;
    let rule_spec = cfg.rule.clone().unwrap_or_else(|| "rejection:uniform".into());
    let rule = rule_from_spec(&rule_spec, &class)?;
    let pops: Vec<String> = if cfg.populations.is_empty() {
        vec![format!("uniform-marginal:{}", class.members()[0].render())]
    } else {
        cfg.populations.clone()
    };
    let ms = if cfg.m.is_empty() { vec![1, 2] } else { cfg.m.clone() };
    let defs: Vec<String> = if cfg.defs.is_empty() { ALL_DEFS.iter().map(|s| s.to_string()).collect() } else { cfg.defs.clone() };
    let budget = cfg.budget();
    let trials = cfg.trials.unwrap_or(2000);
    let mode = match cfg.mode {
        RunMode::Exact => Mode::Exact,
        RunMode::Mc => Mode::MonteCarlo { trials, seed: cfg.seed },
    };
    let b = &cfg.budgets;
    let eps = parse_eps(b)?;
    let delta = parse_opt_rational(&b.delta)?;
    let zero = Rational::from_integer(0.into());
    let mut entries = Vec::new();
    let mut invariant: Option<String> = None;

    for &m in &ms {
        if defs.iter().any(|d| d == "dp") {
            let d = delta.clone().unwrap_or_else(|| zero.clone());
            let mut r = dp_check(rule.as_ref(), m, &eps, &d, mode, budget)?;
            if delta.is_none() && b.eps.is_none() {
                r.pass = None;
                r.threshold = None;
            }
            entries.push(AuditEntry { population: "-".into(), report: r });
        }
        for pop_spec in &pops {
            let pop = parse_population(pop_spec, &class)?;
            for def in &defs {
                let report = match def.as_str() {
                    "dp" => continue,
                    "rep" => {
                        let mut r = replicability(rule.as_ref(), &pop, m, mode, budget)?;
                        if let Some(rho) = parse_opt_rational(&b.rho)? {
                            r.judge_at_least(rational_to_f64(&rho));
                        }
                        r
                    }
                    "gs" => {
                        let mut r = global_stability(rule.as_ref(), &pop, m, mode, budget)?;
                        if let Some(eta) = parse_opt_rational(&b.eta)? {
                            r.judge_at_least(rational_to_f64(&eta));
                        }
                        r
                    }
                    "mi" => {
                        let (_, mut r) = mutual_information(rule.as_ref(), &pop, m, budget)?;
                        if let Some(bound) = b.mi {
                            r.judge_at_most(bound);
                        }
                        r
                    }
                    "kl" => {
                        let r = dd_kl_stability_check(rule.as_ref(), &pop, m, budget)?;
                        if r.pass == Some(false) && invariant.is_none() {
                            invariant = Some(format!("Markov step fails for {pop_spec} at m = {m}"));
                        }
                        r
                    }
                    "tv" => {
                        let prior = match mode {
                            Mode::Exact => None,
                            Mode::MonteCarlo { .. } => Some(dd_prior_from_marginal(rule.as_ref(), &pop, m, budget)?),
                        };
                        let mut r = tv_stability(rule.as_ref(), &pop, m, prior.as_ref(), mode, budget)?;
                        if let Some(bound) = b.tv {
                            r.judge_at_most(bound);
                        }
                        r
                    }
                    "pg" => {
                        let prior = match rule.prior() {
                            Some(p) => p.clone(),
                            None => dd_prior_from_marginal(rule.as_ref(), &pop, m, budget)?,
                        };
                        let law = sample_law(&pop, m, budget)?;
                        let d = delta.clone().unwrap_or_else(|| zero.clone());
                        let pg_mode = if d == zero { PgMode::Pure } else { PgMode::Approx };
                        let beta = parse_opt_rational(&b.pg_beta)?.unwrap_or_else(|| zero.clone());
                        let mut r = perfect_generalization(rule.as_ref(), &law, &prior, &eps, &d, pg_mode, &beta)?;
                        if b.eps.is_none() {
                            r.pass = None;
                        }
                        r
                    }
                    "maxinfo" => {
                        let mut r = max_information(rule.as_ref(), &pop, m, &eps, budget)?;
                        if let Some(d) = &delta {
                            r.judge_at_most(rational_to_f64(d));
                        }
                        r
                    }
                    "pacbayes" => {
                        if m < 2 {
                            continue;
                        }
                        let prior = match rule.prior() {
                            Some(p) => p.clone(),
                            None => dd_prior_from_marginal(rule.as_ref(), &pop, m, budget)?,
                        };
                        let beta = pac_beta_for(b, m)?;
                        let pb = pac_bayes_for_rule(rule.as_ref(), &prior, &pop, m, &beta, trials, cfg.seed)?;
                        let mut r = StabilityReport {
                            definition: "pacbayes",
                            m,
                            exact: false,
                            estimate: pb.rate,
                            estimate_exact: None,
                            radius: 0.0,
                            trials: Some(trials),
                            threshold: Some(pb.allowed),
                            pass: Some(pb.pass),
                            witness: None,
                        };
                        r.radius = (pb.wilson.1 - pb.rate).max(pb.rate - pb.wilson.0);
                        r
                    }
                    _ => unreachable!("validated"),
                };
                entries.push(AuditEntry { population: pop_spec.clone(), report });
            }
        }
    }
    if let Some(msg) = invariant {
        return Err(Error::InvariantViolation(msg));
    }
    let pass = entries.iter().all(|e| e.report.pass != Some(false));
    let rows = entries
        .iter()
        .map(|e| {
            let r = &e.report;
            vec![
                r.definition.to_string(),
                e.population.clone(),
                r.m.to_string(),
                r.exact.to_string(),
                f(r.estimate),
                r.estimate_exact.clone().unwrap_or_default(),
                f(r.radius),
                r.threshold.map(f).unwrap_or_default(),
                r.pass.map(|p| p.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let csv = csv_text(&["definition", "population", "m", "exact", "estimate", "estimate_exact", "radius", "threshold", "pass"], rows)?;
    let summary = entries
        .iter()
        .map(|e| {
            format!(
                "{} pop={} m={} estimate={:.6} pass={}",
                e.report.definition,
                e.population,
                e.report.m,
                e.report.estimate,
                e.report.pass.map(|p| p.to_string()).unwrap_or_else(|| "-".into())
            )
        })
        .collect();
    let report = AuditReport { header: header(name, cfg, None), class: class_spec, rule: rule_spec, entries, pass };
    let stem = name.file_stem();
    Ok(PipelineOutput {
        pipeline: name,
        status: if pass { Status::Pass } else { Status::BudgetFail },
        files: vec![(format!("{stem}.json"), to_json(&report)), (format!("{stem}.csv"), csv)],
        summary,
    })
}

// ---------------------------------------------------------------- boost-sweep

/// One boosting run with its ledger and PAC-Bayes evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct BoostTrial {
    pub m: usize,
    pub trial: usize,
    pub target: Hypothesis,
    pub rounds: usize,
    pub interpolates: bool,
    pub regret_certified: bool,
    pub resamples: u64,
    pub gate_failure: bool,
    pub ledger_exact: bool,
    pub total_kl: f64,
    pub total_bound: f64,
    pub pac: Option<PacBayesTrial>,
}

/// Shared state for a sweep over one class.
pub struct BoostSweep {
    pub class: HypothesisClass,
    pub weak: RejectionSampler,
    pub measurement: WeakMeasurement,
    pub config: BoostConfig,
    pub pstar_log: TruncatedHarmonicMixture<Hypothesis, LogProb>,
    pub pstar_exact: Option<TruncatedHarmonicMixture<Hypothesis, Rational>>,
    flat_log: FiniteDistribution<Hypothesis, LogProb>,
    flat_exact: Option<FiniteDistribution<Hypothesis, Rational>>,
    pub seed: u64,
}

impl BoostSweep {
    /// Measures `(γ, b)` for the uniform-prior weak learner on `k` examples and builds `P*` up to `max T(m)`.
    pub fn new(class: &HypothesisClass, k: usize, ms: &[usize], weak_trials: u64, exact: bool, seed: u64, budget: u128) -> Result<Self> {
        let base = finite_class_weak_learner(class, class.uniform_prior(), k)?;
        let measurement = measure_weak_learner(&base, class, weak_trials, budget, seed, Executor::default())?;
        let weak = base.with_weak_params(WeakParams {
            k,
            gamma: Some(measurement.gamma.clone()),
            b: Some(measurement.b.clone()),
        });
        let config = BoostConfig::from_rule(&weak)?;
        let prior = weak.prior().expect("rejection sampler has a prior").clone();
        let pstar_log = boosted_prior::<LogProb>(&prior, &config.gamma, ms, budget)?;
        let pstar_exact = if exact { Some(boosted_prior::<Rational>(&prior, &config.gamma, ms, budget)?) } else { None };
        let flat_log = pstar_log.flatten();
        let flat_exact = pstar_exact.as_ref().map(|p| p.flatten());
        Ok(BoostSweep { class: class.clone(), weak, measurement, config, pstar_log, pstar_exact, flat_log, flat_exact, seed })
    }

    fn trial_base(&self, m: usize) -> u64 {
        self.seed ^ ((m as u64) << 32)
    }

    /// Trial `i` at size `m`: random member target, uniform marginal, `S ∼ D^m`.
    pub fn run_trial(&self, m: usize, i: usize, exact: bool, pac_beta: Option<f64>) -> Result<BoostTrial> {
        let mut rng = rng_from_seed(shard_seed(self.trial_base(m), i));
        let target = self.class.members()[rng.gen_range(0..self.class.len())];
        let pop = uniform_marginal(&target);
        let table = CdfTable::new(&pop);
        let pairs: Vec<Example> = (0..m).map(|_| pop.atoms()[table.sample_with(&mut rng)]).collect();
        let sample = LabeledSample::new(self.class.domain(), pairs)?;
        let run_seed: u64 = rng.gen();
        let (h, tr) = match boost(&self.weak, &self.config, &sample, run_seed) {
            Ok(r) => r,
            Err(Error::GateNeverPassed { .. }) => {
                return Ok(BoostTrial {
                    m,
                    trial: i,
                    target,
                    rounds: self.config.rounds(m),
                    interpolates: false,
                    regret_certified: false,
                    resamples: 0,
                    gate_failure: true,
                    ledger_exact: false,
                    total_kl: f64::NAN,
                    total_bound: f64::NAN,
                    pac: None,
                })
            }
            Err(e) => return Err(e),
        };
        let (ledger_exact, total_kl, total_bound, pac) = match (exact, &self.pstar_exact, &self.flat_exact) {
            (true, Some(pe), Some(fe)) => {
                let (ledger, law) = kl_ledger_with_law(&tr, &self.weak, pe)?;
                let pac = pac_beta.map(|b| pac_bayes_trial(fe, &law, &pop, &sample, b)).transpose()?;
                (ledger.exact, ledger.total.to_f64(), ledger.total_bound.to_f64(), pac)
            }
            _ => {
                let (ledger, law) = kl_ledger_with_law(&tr, &self.weak, &self.pstar_log)?;
                let pac = pac_beta.map(|b| pac_bayes_trial(&self.flat_log, &law, &pop, &sample, b)).transpose()?;
                (false, ledger.total.to_f64(), ledger.total_bound.to_f64(), pac)
            }
        };
        Ok(BoostTrial {
            m,
            trial: i,
            target,
            rounds: tr.rounds,
            interpolates: sample.is_consistent_with(&h) && tr.interpolates(),
            regret_certified: tr.regret_certifies_interpolation(),
            resamples: tr.resample_total,
            gate_failure: false,
            ledger_exact,
            total_kl,
            total_bound,
            pac,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostRow {
    pub m: usize,
    pub rounds: usize,
    pub trials: usize,
    pub interpolation_rate: f64,
    pub regret_certified_rate: f64,
    pub ledger_hold_rate: f64,
    pub ledger_exact: bool,
    pub mean_total_kl: f64,
    pub max_total_kl: f64,
    pub total_bound: f64,
    pub mean_resamples: f64,
    pub gate_failures: usize,
    pub pac_trials: usize,
    pub pac_beta: f64,
    pub pac_violations: usize,
    pub pac_rate: f64,
    pub pac_allowed: f64,
    pub pac_pass: bool,
    pub mean_pac_bound: f64,
    pub mean_population_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
struct BoostReport {
    header: ReportHeader,
    class: String,
    measurement: WeakMeasurement,
    gamma: String,
    b: String,
    k: usize,
    kl_gate: String,
    resample_cap: u64,
    rows: Vec<BoostRow>,
    trials: Vec<BoostTrial>,
    pass: bool,
}

/// Runs `max(trials, pac_trials)` trials at size `m`; the first `trials`
/// feed interpolation and ledger stats (exact ledger when `exact`), the
/// first `pac_trials` feed the PAC-Bayes violation rate.
pub fn boost_sweep_row(
    sweep: &BoostSweep,
    m: usize,
    trials: usize,
    pac_trials: usize,
    pac_beta: f64,
    exact: bool,
) -> Result<(BoostRow, Vec<BoostTrial>)> {
    let total = trials.max(pac_trials);
    let runs: Vec<BoostTrial> = Executor::default()
        .map(total, |i| sweep.run_trial(m, i, exact && i < trials, (i < pac_trials).then_some(pac_beta)))
        .into_iter()
        .collect::<Result<_>>()?;
    let main = &runs[..trials];
    let tn = trials.max(1) as f64;
    let ok: Vec<&BoostTrial> = main.iter().filter(|t| !t.gate_failure).collect();
    let pacs: Vec<&PacBayesTrial> = runs[..pac_trials].iter().filter_map(|t| t.pac.as_ref()).collect();
    let pac_violations = pacs.iter().filter(|p| p.violated).count();
    let pn = pac_trials.max(1) as f64;
    let pac_rate = pac_violations as f64 / pn;
    let pac_allowed = pac_beta + 3.0 * (pac_beta * (1.0 - pac_beta) / pn).sqrt();
    let row = BoostRow {
        m,
        rounds: sweep.config.rounds(m),
        trials,
        interpolation_rate: main.iter().filter(|t| t.interpolates).count() as f64 / tn,
        regret_certified_rate: main.iter().filter(|t| t.regret_certified).count() as f64 / tn,
        ledger_hold_rate: ok.len() as f64 / tn,
        ledger_exact: !ok.is_empty() && ok.iter().all(|t| t.ledger_exact),
        mean_total_kl: ok.iter().map(|t| t.total_kl).sum::<f64>() / ok.len().max(1) as f64,
        max_total_kl: ok.iter().map(|t| t.total_kl).fold(0.0, f64::max),
        total_bound: ok.iter().map(|t| t.total_bound).fold(0.0, f64::max),
        mean_resamples: main.iter().map(|t| t.resamples as f64).sum::<f64>() / tn,
        gate_failures: main.iter().filter(|t| t.gate_failure).count(),
        pac_trials,
        pac_beta,
        pac_violations,
        pac_rate,
        pac_allowed,
        pac_pass: pac_rate <= pac_allowed,
        mean_pac_bound: pacs.iter().map(|p| p.bound).sum::<f64>() / pacs.len().max(1) as f64,
        mean_population_loss: pacs.iter().map(|p| p.population_loss).sum::<f64>() / pacs.len().max(1) as f64,
    };
    let mut kept = runs;
    kept.truncate(trials);
    Ok((row, kept))
}

fn boost_sweep(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let name = PipelineName::BoostSweep;
    let class_spec = cfg.class.clone().unwrap_or_else(|| "thresholds:32".into());
    let class = load_class(&class_spec)?;
    let ms = if cfg.m.is_empty() { vec![8, 16, 32, 64] } else { cfg.m.clone() };
    let trials = cfg.trials.unwrap_or(50) as usize;
    let pac_trials = cfg.pac_trials.unwrap_or(trials as u64) as usize;
    let k = cfg.k.unwrap_or(8);
    let exact = cfg.exact_ledger.unwrap_or(true);
    let budget = cfg.budget();
    let sweep = BoostSweep::new(&class, k, &ms, cfg.weak_trials.unwrap_or(2000), exact, cfg.seed, budget)?;
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &m in &ms {
        let beta = rational_to_f64(&pac_beta_for(&cfg.budgets, m)?);
        let (row, runs) = boost_sweep_row(&sweep, m, trials, pac_trials, beta, exact)?;
        rows.push(row);
        all.extend(runs);
    }
    let pass = rows.iter().all(|r| r.interpolation_rate == 1.0 && r.gate_failures == 0 && r.pac_pass);
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.rounds.to_string(),
                r.trials.to_string(),
                f(r.interpolation_rate),
                f(r.regret_certified_rate),
                f(r.ledger_hold_rate),
                r.ledger_exact.to_string(),
                f(r.mean_total_kl),
                f(r.max_total_kl),
                f(r.total_bound),
                f(r.mean_resamples),
                r.gate_failures.to_string(),
                r.pac_trials.to_string(),
                f(r.pac_beta),
                r.pac_violations.to_string(),
                f(r.pac_rate),
                f(r.pac_allowed),
                r.pac_pass.to_string(),
                f(r.mean_pac_bound),
                f(r.mean_population_loss),
            ]
        })
        .collect();
    let csv = csv_text(
        &[
            "m", "rounds", "trials", "interpolation_rate", "regret_certified_rate", "ledger_hold_rate", "ledger_exact",
            "mean_total_kl", "max_total_kl", "total_bound", "mean_resamples", "gate_failures", "pac_trials", "pac_beta",
            "pac_violations", "pac_rate", "pac_allowed", "pac_pass", "mean_pac_bound", "mean_population_loss",
        ],
        csv_rows,
    )?;
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "m={} T={} interpolation={:.3} ledger={:.3} max KL={:.4} bound={:.4} pac rate={:.4} (allowed {:.4})",
                r.m, r.rounds, r.interpolation_rate, r.ledger_hold_rate, r.max_total_kl, r.total_bound, r.pac_rate, r.pac_allowed
            )
        })
        .collect();
    let report = BoostReport {
        header: header(name, cfg, Some(sweep.pstar_log.truncation())),
        class: class_spec,
        measurement: sweep.measurement.clone(),
        gamma: format_rational(&sweep.config.gamma),
        b: format_rational(&sweep.config.b),
        k,
        kl_gate: format_rational(&sweep.config.kl_gate),
        resample_cap: sweep.config.resample_cap,
        rows,
        trials: all,
        pass,
    };
    let stem = name.file_stem();
    Ok(PipelineOutput {
        pipeline: name,
        status: if pass { Status::Pass } else { Status::BudgetFail },
        files: vec![(format!("{stem}.json"), to_json(&report)), (format!("{stem}.csv"), csv)],
        summary,
    })
}

// ---------------------------------------------------------------- dims-sweep

#[derive(Debug, Clone, Serialize)]
struct DimsRow {
    class: String,
    n: usize,
    members: usize,
    littlestone: u32,
    /// Known value for builtin families.
    littlestone_expected: Option<u32>,
    clique: usize,
    clique_capped: bool,
    threshold_count: usize,
}

#[derive(Debug, Clone, Serialize)]
struct DimsReport {
    header: ReportHeader,
    rows: Vec<DimsRow>,
    pass: bool,
}

/// `⌊log₂ n⌋` for thresholds, `n` for the full class, 1 for points, and 1 for singletons once n ≥ 2.
pub fn expected_littlestone(spec: &str) -> Option<u32> {
    let (kind, n) = spec.split_once(':')?;
    let n: usize = n.trim().parse().ok()?;
    match kind {
        "thresholds" => Some(n.ilog2()),
        "full" => Some(n as u32),
        "points" => Some(1),
        "singletons" => Some(u32::from(n >= 2)),
        _ => None,
    }
}

fn dims_sweep(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let name = PipelineName::DimsSweep;
    let specs: Vec<String> = if !cfg.classes.is_empty() {
        cfg.classes.clone()
    } else if let Some(c) = &cfg.class {
        vec![c.clone()]
    } else {
        [2, 4, 8, 16].iter().map(|n| format!("thresholds:{n}")).collect()
    };
    let budget = cfg.budget();
    let m_max = cfg.clique_max.unwrap_or(3);
    let mut rows = Vec::new();
    for spec in &specs {
        let class = load_class(spec)?;
        let ld = littlestone_dimension(&class, budget)?;
        let expected = expected_littlestone(spec);
        if matches!(expected, Some(e) if e != ld) {
            return Err(Error::InvariantViolation(format!("{spec}: LD {ld} differs from the known value {}", expected.unwrap())));
        }
        let clique = clique_dimension(&class, m_max, budget)?;
        rows.push(DimsRow {
            class: spec.clone(),
            n: class.domain().size(),
            members: class.len(),
            littlestone: ld,
            littlestone_expected: expected,
            clique: clique.dimension,
            clique_capped: clique.capped,
            threshold_count: threshold_count(&class, budget)?,
        });
    }
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.class.clone(),
                r.n.to_string(),
                r.members.to_string(),
                r.littlestone.to_string(),
                r.littlestone_expected.map(|v| v.to_string()).unwrap_or_default(),
                r.clique.to_string(),
                r.clique_capped.to_string(),
                r.threshold_count.to_string(),
            ]
        })
        .collect();
    let csv = csv_text(&["class", "n", "members", "littlestone", "littlestone_expected", "clique", "clique_capped", "threshold_count"], csv_rows)?;
    let summary = rows
        .iter()
        .map(|r| format!("{} LD={} clique={}{} thresholds={}", r.class, r.littlestone, r.clique, if r.clique_capped { "+" } else { "" }, r.threshold_count))
        .collect();
    let report = DimsReport { header: header(name, cfg, None), rows, pass: true };
    let stem = name.file_stem();
    Ok(PipelineOutput {
        pipeline: name,
        status: Status::Pass,
        files: vec![(format!("{stem}.json"), to_json(&report)), (format!("{stem}.csv"), csv)],
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_errors() {
        let text = "pipeline = \"di-equivalence\"\nseed = 7\nclass = \"full:1\"\nm = [1, 2]\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.pipeline, Some(PipelineName::DiEquivalence));
        assert_eq!(cfg.m, vec![1, 2]);
        let json = r#"{"pipeline": "dims-sweep", "seed": 1, "classes": ["thresholds:4"]}"#;
        assert_eq!(ExperimentConfig::parse(json).unwrap().classes, vec!["thresholds:4".to_string()]);

        let bad = "seed = 1\nclass = \"full:1\"\nm = [1, 0]\n";
        let e = ExperimentConfig::parse(bad).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let unknown = "seed = 1\nfoo = 2\n";
        assert!(ExperimentConfig::parse(unknown).unwrap_err().to_string().contains("line 2"));
        let no_seed = "class = \"full:1\"\n";
        assert!(matches!(ExperimentConfig::parse(no_seed), Err(Error::Config(_))));
        let bad_class = "seed = 1\n\nclass = \"cubes:3\"\n";
        assert!(ExperimentConfig::parse(bad_class).unwrap_err().to_string().contains("line 3"));
        let bad_def = "seed = 1\ndefs = [\"dp\", \"nope\"]\n";
        assert!(ExperimentConfig::parse(bad_def).unwrap_err().to_string().contains("line 2"));
        let bad_eps = "seed = 1\n[budgets]\neps = \"ln(0)\"\n";
        assert!(ExperimentConfig::parse(bad_eps).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = ExperimentConfig::new(PipelineName::DimsSweep, 3);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn populations() {
        let class = HypothesisClass::thresholds(4).unwrap();
        let p = parse_population("uniform-marginal:member=1", &class).unwrap();
        assert_eq!(p.support_size(), 4);
        let q = parse_population("atoms:0:0=1/2;3:1=1/2", &class).unwrap();
        assert_eq!(q.support_size(), 2);
        assert!(parse_population("point:9:0", &class).is_err());
        assert!(parse_population("atoms:0:0=1/3", &class).is_err());
    }

    #[test]
    fn di_equivalence_full_one() {
        let mut cfg = ExperimentConfig::new(PipelineName::DiEquivalence, 1);
        cfg.class = Some("full:1".into());
        let out = run_pipeline(PipelineName::DiEquivalence, &cfg).unwrap();
        assert_eq!(out.status, Status::Pass);
        let csv = &out.files[1].1;
        assert!(csv.lines().nth(1).unwrap().starts_with("1,1/2,2,2,true"), "{csv}");
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn dims_sweep_thresholds() {
        let cfg = ExperimentConfig::new(PipelineName::DimsSweep, 1);
        let out = run_pipeline(PipelineName::DimsSweep, &cfg).unwrap();
        let rows: Vec<&str> = out.files[1].1.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        for (row, ld) in rows.iter().zip([1, 2, 3, 4]) {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols[3], ld.to_string());
            assert_eq!(cols[4], ld.to_string());
        }
    }

    #[test]
    fn dd_audit_small() {
        let mut cfg = ExperimentConfig::new(PipelineName::DdAudit, 5);
        cfg.class = Some("full:2".into());
        cfg.rule = Some("rr:eps=ln(3)".into());
        cfg.m = vec![1, 2];
        cfg.trials = Some(100);
        cfg.budgets.eps = Some("ln(3)".into());
        let out = run_pipeline(PipelineName::DdAudit, &cfg).unwrap();
        assert_eq!(out.status, Status::Pass, "{:?}", out.summary);
        cfg.rule = Some("erm".into());
        cfg.budgets.delta = Some("1/2".into());
        cfg.defs = vec!["dp".into()];
        let out = run_pipeline(PipelineName::DdAudit, &cfg).unwrap();
        assert_eq!(out.status, Status::BudgetFail);
    }

    #[test]
    fn boost_sweep_small_is_deterministic() {
        let mut cfg = ExperimentConfig::new(PipelineName::BoostSweep, 9);
        cfg.class = Some("thresholds:8".into());
        cfg.m = vec![4, 8];
        cfg.trials = Some(4);
        cfg.k = Some(4);
        cfg.weak_trials = Some(200);
        let a = run_pipeline(PipelineName::BoostSweep, &cfg).unwrap();
        let b = run_pipeline(PipelineName::BoostSweep, &cfg).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(a.status, Status::Pass, "{:?}", a.summary);
    }
}
