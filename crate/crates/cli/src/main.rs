use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;

use stability_lab::boosting::{boost, boosted_prior, kl_ledger, BoostConfig, KlLedger};
use stability_lab::dimensions::{
    clique_dimension, fractional_clique_value, littlestone_dimension, threshold_count, verify_game_result, GameMethod,
    GameValueResult, MwOptions,
};
use stability_lab::dist::rng_from_seed;
use stability_lab::exec::with_workers;
use stability_lab::learners::{finite_class_weak_learner, LearningRule, measure_weak_learner, uniform_marginal, WeakMeasurement, WeakParams};
use stability_lab::pipeline::{
    load_class, run_pipeline, Budgets, ExperimentConfig, PipelineName, PipelineOutput, RunMode, Status, BUDGET_ENV,
    DEFAULT_BUDGET,
};
use stability_lab::prob::{format_rational, LogProb, Rational};
use stability_lab::{Error, Executor, Hypothesis, LabeledSample};

const EXIT_BUDGET_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "stability-lab", version, about = "Finite-domain stability workbench")]
struct Cli {
    /// Seed for every random choice (overrides a config file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for data-parallel loops.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exact enumeration or Monte Carlo.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory for report files; without it reports go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Subcommand)]
enum Command {
    /// Littlestone dimension, clique dimension and threshold count of a class.
    Dims(DimsArgs),
    /// Value of the consistency game and the fractional clique number.
    Gamevalue(GameArgs),
    /// One run of the stability-boosting learner with its KL ledger.
    Boost(BoostArgs),
    /// Audit a rule against the stability definitions.
    Audit(AuditArgs),
    /// Run a named pipeline from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct DimsArgs {
    #[arg(long)]
    class: String,
    /// Largest clique order searched.
    #[arg(long, default_value_t = 3)]
    m_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lp,
    Mw,
}

#[derive(Args)]
struct GameArgs {
    #[arg(long)]
    class: String,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    m: Vec<usize>,
    #[arg(long, value_enum, default_value = "lp")]
    method: MethodArg,
    /// Additive gap for the MW solver.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum LedgerArg {
    Exact,
    Log,
    None,
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long)]
    class: String,
    /// Sample sizes; a single run uses the first.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    m: Vec<usize>,
    /// Run this many trials per sample size and emit the per-m summary CSV.
    #[arg(long)]
    trials: Option<u64>,
    /// Examples per weak-learner call.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Monte Carlo trials per target when measuring the weak learner.
    #[arg(long, default_value_t = 2000)]
    weak_trials: u64,
    /// Target labeling (0/1 string); a random class member otherwise.
    #[arg(long)]
    target: Option<String>,
    /// CSV sample (`point,label` rows) instead of a random one.
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "log")]
    ledger: LedgerArg,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    class: String,
    #[arg(long)]
    rule: String,
    /// Population specs; repeatable.
    #[arg(long = "pop")]
    pops: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    m: Vec<usize>,
    /// Definitions, comma separated (dp,rep,gs,mi,kl,tv,pg,maxinfo,pacbayes).
    #[arg(long, value_delimiter = ',')]
    defs: Vec<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// TOML file of per-definition budgets.
    #[arg(long)]
    budget: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// di-equivalence, dd-audit, boost-sweep or dims-sweep.
    name: String,
    /// TOML or JSON config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvariantViolation(_) => Failure::Invariant(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

type Outcome = Result<Status, Failure>;

fn env_budget() -> Result<Option<u64>, Failure> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&b| b > 0)
            .map(Some)
            .ok_or_else(|| Failure::Config(format!("{BUDGET_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn budget(config: Option<u64>) -> Result<u128, Failure> {
    Ok(config.or(env_budget()?).unwrap_or(DEFAULT_BUDGET) as u128)
}

fn emit(out: Option<&Path>, name: &str, json: String) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            std::fs::write(&path, json).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct DimsReport {
    class: String,
    n: usize,
    members: usize,
    littlestone: u32,
    clique: usize,
    clique_capped: bool,
    clique_witness: Vec<String>,
    threshold_count: usize,
}

fn cmd_dims(cli: &Cli, a: &DimsArgs) -> Outcome {
    let class = load_class(&a.class)?;
    let budget = budget(None)?;
    let clique = clique_dimension(&class, a.m_max, budget)?;
    let report = DimsReport {
        class: a.class.clone(),
        n: class.domain().size(),
        members: class.len(),
        littlestone: littlestone_dimension(&class, budget)?,
        clique: clique.dimension,
        clique_capped: clique.capped,
        clique_witness: clique.witness.iter().map(|d| d.render()).collect(),
        threshold_count: threshold_count(&class, budget)?,
    };
    emit(cli.out.as_deref(), "dims.json", to_json(&report))?;
    Ok(Status::Pass)
}

fn cmd_gamevalue(cli: &Cli, a: &GameArgs) -> Outcome {
    let class = load_class(&a.class)?;
    let budget = budget(None)?;
    let mut results: Vec<GameValueResult> = Vec::new();
    for &m in &a.m {
        if m == 0 {
            return Err(Failure::Config("m must be positive".into()));
        }
        let r = match a.method {
            MethodArg::Lp => fractional_clique_value(&class, m, GameMethod::ExactLp, budget)?,
            MethodArg::Mw => {
                let opts = MwOptions { eps: a.eps, ..MwOptions::default() };
                stability_lab::dimensions::game_value_mw(&class, m, budget, &opts)?
            }
        };
        verify_game_result(&class, &r, budget)?;
        eprintln!("m={m} value={} C_m={}", format_rational(&r.value), format_rational(&r.clique_number));
        results.push(r);
    }
    emit(cli.out.as_deref(), "gamevalue.json", to_json(&results))?;
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct BoostReport {
    class: String,
    seed: u64,
    target: Option<Hypothesis>,
    measurement: WeakMeasurement,
    gamma: String,
    b: String,
    kl_gate: String,
    rounds: usize,
    output: Hypothesis,
    empirical_loss: String,
    interpolates: bool,
    regret: f64,
    regret_bound: f64,
    resample_total: u64,
    ledger: Option<KlLedger>,
}

fn cmd_boost(cli: &Cli, a: &BoostArgs) -> Outcome {
    if let Some(trials) = a.trials {
        return boost_trials(cli, a, trials);
    }
    let class = load_class(&a.class)?;
    let budget = budget(None)?;
    let seed = cli.seed.unwrap_or(0);
    let m = *a.m.first().ok_or_else(|| Failure::Config("--m is empty".into()))?;
    let mut rng = rng_from_seed(seed);
    let (sample, target) = match &a.sample {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            (LabeledSample::from_csv(class.domain(), &text)?, None)
        }
        None => {
            let target: Hypothesis = match &a.target {
                Some(bits) => bits.parse()?,
                None => class.members()[rng.gen_range(0..class.len())],
            };
            if target.len() != class.domain().size() {
                return Err(Failure::Config(format!("target has {} labels, domain has {}", target.len(), class.domain().size())));
            }
            let pop = uniform_marginal(&target);
            let table = stability_lab::dist::CdfTable::new(&pop);
            let pairs = (0..m).map(|_| pop.atoms()[table.sample_with(&mut rng)]).collect();
            (LabeledSample::new(class.domain(), pairs)?, Some(target))
        }
    };
    let base = finite_class_weak_learner(&class, class.uniform_prior(), a.k)?;
    let measurement = measure_weak_learner(&base, &class, a.weak_trials, budget, seed, Executor::default())?;
    let weak = base.with_weak_params(WeakParams { k: a.k, gamma: Some(measurement.gamma.clone()), b: Some(measurement.b.clone()) });
    let config = BoostConfig::from_rule(&weak)?;
    let (h, tr) = boost(&weak, &config, &sample, rng.gen())?;
    let prior = weak.prior().expect("weak learner has a prior");
    let ledger = match a.ledger {
        LedgerArg::None => None,
        LedgerArg::Log => Some(kl_ledger(&tr, &weak, &boosted_prior::<LogProb>(prior, &config.gamma, &[sample.len()], budget)?)?),
        LedgerArg::Exact => Some(kl_ledger(&tr, &weak, &boosted_prior::<Rational>(prior, &config.gamma, &[sample.len()], budget)?)?),
    };
    let interpolates = sample.is_consistent_with(&h);
    let report = BoostReport {
        class: a.class.clone(),
        seed,
        target,
        measurement,
        gamma: format_rational(&config.gamma),
        b: format_rational(&config.b),
        kl_gate: format_rational(&config.kl_gate),
        rounds: tr.rounds,
        output: h,
        empirical_loss: format_rational(&tr.empirical_loss),
        interpolates,
        regret: tr.regret,
        regret_bound: tr.regret_bound,
        resample_total: tr.resample_total,
        ledger,
    };
    emit(cli.out.as_deref(), "boost.json", to_json(&report))?;
    Ok(if interpolates { Status::Pass } else { Status::BudgetFail })
}

fn boost_trials(cli: &Cli, a: &BoostArgs, trials: u64) -> Outcome {
    if a.sample.is_some() || a.target.is_some() {
        return Err(Failure::Config("--trials draws its own targets and samples".into()));
    }
    let mut cfg = ExperimentConfig::new(PipelineName::BoostSweep, cli.seed.unwrap_or(0));
    cfg.class = Some(a.class.clone());
    cfg.m = a.m.clone();
    cfg.trials = Some(trials);
    cfg.k = Some(a.k);
    cfg.weak_trials = Some(a.weak_trials);
    cfg.exact_ledger = Some(matches!(a.ledger, LedgerArg::Exact));
    cfg.budget = Some(budget(None)? as u64);
    let out = run_pipeline(PipelineName::BoostSweep, &cfg)?;
    if cli.out.is_none() {
        for line in &out.summary {
            eprintln!("{line}");
        }
        print!("{}", out.files[1].1);
        return Ok(out.status);
    }
    finish_pipeline(cli, out, ".")
}

fn finish_pipeline(cli: &Cli, out: PipelineOutput, default_dir: &str) -> Outcome {
    for line in &out.summary {
        eprintln!("{line}");
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(default_dir));
    out.write_to(&dir)?;
    for (name, _) in &out.files {
        println!("wrote {}", dir.join(name).display());
    }
    Ok(out.status)
}

fn cmd_audit(cli: &Cli, a: &AuditArgs) -> Outcome {
    let mut cfg = ExperimentConfig::new(PipelineName::DdAudit, cli.seed.unwrap_or(0));
    cfg.class = Some(a.class.clone());
    cfg.rule = Some(a.rule.clone());
    cfg.populations = a.pops.clone();
    cfg.m = a.m.clone();
    cfg.defs = a.defs.clone();
    cfg.trials = a.trials;
    cfg.mode = match cli.mode {
        Some(ModeArg::Mc) => RunMode::Mc,
        _ => RunMode::Exact,
    };
    cfg.budget = Some(budget(None)? as u64);
    if let Some(path) = &a.budget {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.budgets = toml::from_str::<Budgets>(&text).map_err(|e| Failure::Config(format!("{}: {}", path.display(), e.message())))?;
    }
    let canonical = toml::to_string(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
    cfg.validate(&canonical)?;
    let out = run_pipeline(PipelineName::DdAudit, &cfg)?;
    if cli.out.is_none() {
        for line in &out.summary {
            eprintln!("{line}");
        }
        print!("{}", out.files[0].1);
        return Ok(out.status);
    }
    finish_pipeline(cli, out, ".")
}

fn cmd_pipeline(cli: &Cli, a: &PipelineArgs) -> Outcome {
    let name: PipelineName = a.name.parse()?;
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::new(name, 0),
    };
    if let Some(p) = cfg.pipeline {
        if p != name {
            return Err(Failure::Config(format!("config is for pipeline {}, not {}", p.as_str(), name.as_str())));
        }
    }
    cfg.pipeline = Some(name);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.mode {
        cfg.mode = match m {
            ModeArg::Exact => RunMode::Exact,
            ModeArg::Mc => RunMode::Mc,
        };
    }
    if cfg.budget.is_none() {
        cfg.budget = env_budget()?;
    }
    let out = run_pipeline(name, &cfg)?;
    finish_pipeline(cli, out, &format!("out/{}", name.as_str()))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Dims(a) => cmd_dims(cli, a),
        Command::Gamevalue(a) => cmd_gamevalue(cli, a),
        Command::Boost(a) => cmd_boost(cli, a),
        Command::Audit(a) => cmd_audit(cli, a),
        Command::Pipeline(a) => cmd_pipeline(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = with_workers(cli.workers, || run(&cli));
    match outcome {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::BudgetFail) => {
            eprintln!("stability budget not met");
            ExitCode::from(EXIT_BUDGET_FAIL)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}
