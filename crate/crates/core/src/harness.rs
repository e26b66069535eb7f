//! Experiment configs, batch runs over seeds and horizons, and summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{cbwr_opt, run_cbwk, run_cbwr, run_rngs, AgentConfig, ObjectiveSpec};
use crate::baselines::{baseline_static_lp, baseline_uniform};
use crate::env::{compute_opt, EnvironmentSpec, ExactMoments, SpecStream};
use crate::error::{Error, Result};
use crate::model::{PolicyClass, ProblemDims};
use crate::trace::{Algorithm, RunTrace};

/// An environment together with the policy class played against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub environment: EnvironmentSpec,
    pub policies: PolicySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub noop_index: usize,
    /// `table[p][x]` is the action of policy `p` in context `x`.
    pub table: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub environment: EnvironmentSpec,
    pub policies: PolicyClass,
    pub moments: ExactMoments,
}

impl InstanceFile {
    pub fn from_parts(environment: EnvironmentSpec, pc: &PolicyClass) -> Self {
        Self {
            environment,
            policies: PolicySpec {
                noop_index: pc.noop_index(),
                table: pc.table().to_vec(),
            },
        }
    }

    pub fn build(self) -> Result<Instance> {
        self.environment.validate()?;
        let pc = PolicyClass::new(
            self.policies.table,
            self.environment.num_actions(),
            self.policies.noop_index,
        )?;
        if pc.num_contexts() != self.environment.num_contexts() {
            return Err(Error::Config(format!(
                "policy table covers {} contexts, environment has {}",
                pc.num_contexts(),
                self.environment.num_contexts()
            )));
        }
        let moments = self.environment.exact_moments(&pc)?;
        Ok(Instance {
            environment: self.environment,
            policies: pc,
            moments,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read instance: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(e) => located(path, &e),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Pretty-printed JSON of an instance file.
pub fn instance_to_json(file: &InstanceFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(file)?)
}

/// `B` as a function of `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BudgetRule {
    /// `B = ratio * T`.
    Ratio(f64),
    Fixed(f64),
}

impl BudgetRule {
    pub fn budget(&self, horizon: usize) -> f64 {
        match *self {
            BudgetRule::Ratio(r) => r * horizon as f64,
            BudgetRule::Fixed(b) => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..*start + *count).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance file, relative to the config file's directory.
    pub instance: PathBuf,
    pub algorithm: Algorithm,
    pub horizons: Vec<usize>,
    /// Required except for `cbwr`.
    #[serde(default)]
    pub budget: Option<BudgetRule>,
    pub delta: f64,
    pub seeds: Seeds,
    #[serde(default)]
    pub agent: AgentConfig,
    /// Required for `cbwr`.
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    /// Relative to the config file's directory.
    pub output_dir: PathBuf,
}

fn located(path: &Path, e: &serde_json::Error) -> Error {
    Error::Config(format!(
        "{}:{}:{}: {e}",
        path.display(),
        e.line(),
        e.column()
    ))
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    pub instance: Instance,
}

impl LoadedConfig {
    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.output_dir)
    }
}

impl ExperimentConfig {
    /// Parses and validates a config; every diagnostic names the file and line.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| located(path, &e))?;
        let base_dir = path
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        let at = |key: &str, msg: String| {
            Error::Config(format!(
                "{}:{}: {msg}",
                path.display(),
                key_line(&text, key)
            ))
        };
        if config.horizons.is_empty() {
            return Err(at("horizons", "horizons list is empty".into()));
        }
        if config.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(at("horizons", "horizons must be strictly ascending".into()));
        }
        if config.horizons.contains(&0) {
            return Err(at("horizons", "horizons must be positive".into()));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(at(
                "delta",
                format!("delta = {} must lie in (0, 1)", config.delta),
            ));
        }
        if config.seeds.expand().is_empty() {
            return Err(at("seeds", "no seeds".into()));
        }
        match (config.algorithm, &config.budget, &config.objective) {
            (Algorithm::Cbwr, _, None) => {
                return Err(at("algorithm", "cbwr needs an \"objective\"".into()))
            }
            (Algorithm::Cbwr, _, Some(_)) => {}
            (_, None, _) => {
                return Err(at(
                    "algorithm",
                    format!("{} needs a \"budget\"", config.algorithm),
                ))
            }
            (_, Some(rule), _) => {
                let v = match *rule {
                    BudgetRule::Ratio(r) | BudgetRule::Fixed(r) => r,
                };
                if !(v > 0.0 && v.is_finite()) {
                    return Err(at("budget", "budget must be positive".into()));
                }
            }
        }
        let instance_path = base_dir.join(&config.instance);
        if !instance_path.exists() {
            return Err(at(
                "instance",
                format!("instance file {} does not exist", instance_path.display()),
            ));
        }
        let instance = InstanceFile::load(&instance_path)?
            .build()
            .map_err(|e| at("instance", e.to_string()))?;
        if let Some(obj) = &config.objective {
            if obj.dim() != instance.environment.num_resources() {
                return Err(at(
                    "objective",
                    format!(
                        "objective has dimension {}, environment has d = {}",
                        obj.dim(),
                        instance.environment.num_resources()
                    ),
                ));
            }
        }
        Ok(LoadedConfig {
            config,
            base_dir,
            instance,
        })
    }
}

/// Condensed record of one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub budget: Option<f64>,
    pub seed: u64,
    pub rounds: usize,
    pub aborted: bool,
    pub truncated: bool,
    pub out_of_regime: bool,
    pub budget_breach: bool,
    pub total_reward: f64,
    pub score: f64,
    pub opt: f64,
    pub regret: f64,
    pub oracle_calls: u64,
    pub op_checks: usize,
    pub op_violations: usize,
    /// Largest `update_steps / bound` over the run's solves.
    pub max_update_ratio: f64,
}

impl RunSummary {
    pub fn from_trace(trace: &RunTrace) -> Result<Self> {
        let (opt, regret) = match (trace.terminal.opt, trace.terminal.regret) {
            (Some(o), Some(r)) => (o, r),
            _ => {
                return Err(Error::Contract(
                    "trace has no OPT; call set_opt first".into(),
                ))
            }
        };
        let checked: Vec<_> = trace.epochs.iter().filter_map(|e| e.feasible).collect();
        Ok(Self {
            algorithm: trace.info.algorithm,
            horizon: trace.info.horizon,
            budget: trace.info.budget,
            seed: trace.info.seed,
            rounds: trace.rows.len(),
            aborted: trace.terminal.aborted,
            truncated: trace.terminal.truncated,
            out_of_regime: trace.terminal.out_of_regime,
            budget_breach: trace.budget_breach(),
            total_reward: trace.terminal.total_reward,
            score: trace.terminal.score,
            opt,
            regret,
            oracle_calls: trace.terminal.oracle_calls,
            op_checks: checked.len(),
            op_violations: checked.iter().filter(|f| !**f).count(),
            max_update_ratio: trace
                .epochs
                .iter()
                .map(|e| e.update_steps as f64 / e.update_bound.max(1) as f64)
                .fold(0.0, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome {
    Done(RunSummary),
    /// The agent declined to start, e.g. because `B'` is not positive.
    Refused {
        algorithm: Algorithm,
        horizon: usize,
        seed: u64,
        reason: String,
    },
}

impl RunOutcome {
    pub fn key(&self) -> (Algorithm, usize, u64) {
        match self {
            RunOutcome::Done(s) => (s.algorithm, s.horizon, s.seed),
            RunOutcome::Refused {
                algorithm,
                horizon,
                seed,
                ..
            } => (*algorithm, *horizon, *seed),
        }
    }
}

/// Everything needed to launch runs at one horizon.
#[derive(Debug, Clone)]
pub struct HorizonPlan {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub budget: Option<f64>,
    pub delta: f64,
    pub opt: f64,
    pub p_star: crate::model::MixedPolicy,
}

pub fn plan_horizon(
    instance: &Instance,
    algorithm: Algorithm,
    horizon: usize,
    budget: Option<f64>,
    delta: f64,
    objective: Option<&ObjectiveSpec>,
) -> Result<HorizonPlan> {
    let sol = match algorithm {
        Algorithm::Cbwr => {
            let obj = objective
                .ok_or_else(|| Error::Config("cbwr needs an objective".into()))?
                .build();
            cbwr_opt(&instance.moments, obj.as_ref())?
        }
        _ => {
            let b = budget.ok_or_else(|| Error::Config(format!("{algorithm} needs a budget")))?;
            compute_opt(&instance.moments, b, horizon)?
        }
    };
    Ok(HorizonPlan {
        algorithm,
        horizon,
        budget,
        delta,
        opt: sol.opt,
        p_star: sol.p_star,
    })
}

/// Runs one seed and returns the full trace with OPT filled in. `Ok(None)`
/// means the agent refused to start; the reason is in the error slot.
pub fn run_one(
    instance: &Instance,
    plan: &HorizonPlan,
    agent: &AgentConfig,
    objective: Option<&ObjectiveSpec>,
    seed: u64,
) -> std::result::Result<RunTrace, RunError> {
    let (env_rng, mut agent_rng) = run_rngs(seed);
    let mut env = SpecStream::new(instance.environment.clone(), env_rng)?;
    let pc = &instance.policies;
    let k = pc.num_actions();
    let d = instance.environment.num_resources();
    let dims = || -> Result<ProblemDims> {
        ProblemDims::new(
            k,
            d,
            plan.horizon,
            plan.budget.unwrap_or(f64::NAN),
            plan.delta,
        )
    };
    let mut trace = match plan.algorithm {
        Algorithm::Cbwk => match run_cbwk(&mut env, &dims()?, pc, agent, seed, &mut agent_rng) {
            Err(Error::Config(reason)) => return Err(RunError::Refused(reason)),
            other => other?,
        },
        Algorithm::Cbwr => {
            let obj = objective
                .ok_or_else(|| Error::Config("cbwr needs an objective".into()))?
                .build();
            run_cbwr(
                &mut env,
                plan.horizon,
                plan.delta,
                obj.as_ref(),
                pc,
                agent,
                seed,
                &mut agent_rng,
            )?
        }
        Algorithm::Uniform => baseline_uniform(&mut env, &dims()?, seed, &mut agent_rng)?,
        Algorithm::StaticLp => {
            baseline_static_lp(&mut env, &dims()?, pc, &plan.p_star, seed, &mut agent_rng)?
        }
    };
    trace.set_opt(plan.opt);
    Ok(trace)
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("run refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Failed(#[from] Error),
}

/// Runs every seed at one horizon on `jobs` threads, keeping only the
/// condensed records. `sink` sees each finished trace (e.g. to write it).
pub fn run_batch<F>(
    instance: &Instance,
    plan: &HorizonPlan,
    agent: &AgentConfig,
    objective: Option<&ObjectiveSpec>,
    seeds: &[u64],
    jobs: usize,
    sink: F,
) -> Result<Vec<(RunOutcome, f64)>>
where
    F: Fn(&RunTrace) -> Result<()> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let start = Instant::now();
                let outcome = match run_one(instance, plan, agent, objective, seed) {
                    Ok(trace) => {
                        sink(&trace)?;
                        RunOutcome::Done(RunSummary::from_trace(&trace)?)
                    }
                    Err(RunError::Refused(reason)) => RunOutcome::Refused {
                        algorithm: plan.algorithm,
                        horizon: plan.horizon,
                        seed,
                        reason,
                    },
                    Err(RunError::Failed(e)) => return Err(e),
                };
                Ok((outcome, start.elapsed().as_secs_f64()))
            })
            .collect()
    })
}

/// One line of the summary table: all runs of one algorithm at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub budget: Option<f64>,
    pub runs: usize,
    pub refused: usize,
    pub opt: Option<f64>,
    pub mean_regret: Option<f64>,
    pub sd_regret: Option<f64>,
    pub mean_total_reward: Option<f64>,
    pub mean_score: Option<f64>,
    pub abort_rate: Option<f64>,
    pub budget_breaches: usize,
    pub truncated: usize,
    pub out_of_regime: usize,
    pub mean_oracle_calls: Option<f64>,
    pub op_checks: usize,
    pub op_violations: usize,
    pub max_update_ratio: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sd(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some(0.0);
    }
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Aggregates outcomes per (algorithm, horizon). Runs are sorted by seed
/// first so the result does not depend on completion order.
pub fn summarize_outcomes(outcomes: &[RunOutcome]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Algorithm, usize), Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        let (a, h, _) = o.key();
        groups.entry((a, h)).or_default().push(o);
    }
    groups
        .into_iter()
        .map(|((algorithm, horizon), mut runs)| {
            runs.sort_by_key(|o| o.key().2);
            let done: Vec<&RunSummary> = runs
                .iter()
                .filter_map(|o| match o {
                    RunOutcome::Done(s) => Some(s),
                    RunOutcome::Refused { .. } => None,
                })
                .collect();
            let col = |f: fn(&RunSummary) -> f64| done.iter().map(|s| f(s)).collect::<Vec<f64>>();
            let regrets = col(|s| s.regret);
            SummaryRow {
                algorithm,
                horizon,
                budget: done.first().and_then(|s| s.budget),
                runs: done.len(),
                refused: runs.len() - done.len(),
                opt: done.first().map(|s| s.opt),
                mean_regret: mean(&regrets),
                sd_regret: sd(&regrets),
                mean_total_reward: mean(&col(|s| s.total_reward)),
                mean_score: mean(&col(|s| s.score)),
                abort_rate: mean(&col(|s| if s.aborted { 1.0 } else { 0.0 })),
                budget_breaches: done.iter().filter(|s| s.budget_breach).count(),
                truncated: done.iter().filter(|s| s.truncated).count(),
                out_of_regime: done.iter().filter(|s| s.out_of_regime).count(),
                mean_oracle_calls: mean(&col(|s| s.oracle_calls as f64)),
                op_checks: done.iter().map(|s| s.op_checks).sum(),
                op_violations: done.iter().map(|s| s.op_violations).sum(),
                max_update_ratio: done.iter().map(|s| s.max_update_ratio).reduce(f64::max),
            }
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 18] = [
    "algorithm",
    "horizon",
    "budget",
    "runs",
    "refused",
    "opt",
    "mean_regret",
    "sd_regret",
    "mean_total_reward",
    "mean_score",
    "abort_rate",
    "budget_breaches",
    "truncated",
    "out_of_regime",
    "mean_oracle_calls",
    "op_checks",
    "op_violations",
    "max_update_ratio",
];

fn cell(v: Option<f64>) -> String {
    v.map_or("na".to_string(), |x| x.to_string())
}

fn uncell(s: &str) -> Result<Option<f64>> {
    if s == "na" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("summary: cannot parse {s:?}")))
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.to_string(),
            r.horizon.to_string(),
            cell(r.budget),
            r.runs.to_string(),
            r.refused.to_string(),
            cell(r.opt),
            cell(r.mean_regret),
            cell(r.sd_regret),
            cell(r.mean_total_reward),
            cell(r.mean_score),
            cell(r.abort_rate),
            r.budget_breaches.to_string(),
            r.truncated.to_string(),
            r.out_of_regime.to_string(),
            cell(r.mean_oracle_calls),
            r.op_checks.to_string(),
            r.op_violations.to_string(),
            cell(r.max_update_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Config(format!(
            "{}: unexpected summary header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |e: Error| Error::Config(format!("{}:{}: {e}", path.display(), i + 2));
        let int = |j: usize| -> Result<usize> {
            rec[j]
                .parse()
                .map_err(|_| bad(Error::Config(format!("cannot parse {:?}", &rec[j]))))
        };
        let f = |j: usize| uncell(&rec[j]).map_err(bad);
        rows.push(SummaryRow {
            algorithm: rec[0].parse().map_err(bad)?,
            horizon: int(1)?,
            budget: f(2)?,
            runs: int(3)?,
            refused: int(4)?,
            opt: f(5)?,
            mean_regret: f(6)?,
            sd_regret: f(7)?,
            mean_total_reward: f(8)?,
            mean_score: f(9)?,
            abort_rate: f(10)?,
            budget_breaches: int(11)?,
            truncated: int(12)?,
            out_of_regime: int(13)?,
            mean_oracle_calls: f(14)?,
            op_checks: int(15)?,
            op_violations: int(16)?,
            max_update_ratio: f(17)?,
        });
    }
    Ok(rows)
}

pub fn trace_file_name(algorithm: Algorithm, horizon: usize, seed: u64) -> String {
    format!("trace_{algorithm}_T{horizon}_s{seed}.csv")
}

fn refusal_file_name(algorithm: Algorithm, horizon: usize, seed: u64) -> String {
    format!("refused_{algorithm}_T{horizon}_s{seed}.txt")
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMING_FILE: &str = "timing.csv";

/// Rebuilds the summary table from the trace and refusal files in `dir`.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut outcomes = Vec::new();
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    names.sort();
    for path in names {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name.starts_with("trace_") && name.ends_with(".csv") {
            outcomes.push(RunOutcome::Done(RunSummary::from_trace(
                &RunTrace::read_file(&path)?,
            )?));
        } else if let Some(stem) = name
            .strip_prefix("refused_")
            .and_then(|s| s.strip_suffix(".txt"))
        {
            let (algorithm, horizon, seed) = parse_run_stem(stem).ok_or_else(|| {
                Error::Config(format!(
                    "{}: unrecognized refusal file name",
                    path.display()
                ))
            })?;
            outcomes.push(RunOutcome::Refused {
                algorithm,
                horizon,
                seed,
                reason: std::fs::read_to_string(&path)?.trim().to_string(),
            });
        }
    }
    if outcomes.is_empty() {
        return Err(Error::Config(format!("{}: no trace files", dir.display())));
    }
    Ok(summarize_outcomes(&outcomes))
}

fn parse_run_stem(stem: &str) -> Option<(Algorithm, usize, u64)> {
    let (rest, seed) = stem.rsplit_once("_s")?;
    let (alg, horizon) = rest.rsplit_once("_T")?;
    Some((alg.parse().ok()?, horizon.parse().ok()?, seed.parse().ok()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed_offset: u64,
    pub jobs: usize,
    /// Write one trace file per run.
    pub write_traces: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed_offset: 0,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            write_traces: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub outcomes: Vec<RunOutcome>,
    pub summary: Vec<SummaryRow>,
}

/// Runs the configured algorithm for every (horizon, seed) pair and writes
/// traces, `summary.csv` and `timing.csv` into `out_dir`.
pub fn run_experiment(
    loaded: &LoadedConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<ExperimentOutput> {
    let cfg = &loaded.config;
    std::fs::create_dir_all(out_dir)?;
    let seeds: Vec<u64> = cfg
        .seeds
        .expand()
        .iter()
        .map(|s| s + opts.seed_offset)
        .collect();
    let mut outcomes = Vec::new();
    let mut timing = Vec::new();
    for &horizon in &cfg.horizons {
        let budget = cfg.budget.map(|b| b.budget(horizon));
        let plan = plan_horizon(
            &loaded.instance,
            cfg.algorithm,
            horizon,
            budget,
            cfg.delta,
            cfg.objective.as_ref(),
        )?;
        let sink = |trace: &RunTrace| -> Result<()> {
            if opts.write_traces {
                let name =
                    trace_file_name(trace.info.algorithm, trace.info.horizon, trace.info.seed);
                trace.write_file(&out_dir.join(name))?;
            }
            Ok(())
        };
        for (outcome, secs) in run_batch(
            &loaded.instance,
            &plan,
            &cfg.agent,
            cfg.objective.as_ref(),
            &seeds,
            opts.jobs,
            sink,
        )? {
            if let RunOutcome::Refused {
                algorithm,
                horizon,
                seed,
                reason,
            } = &outcome
            {
                log::warn!("{algorithm} T={horizon} seed={seed}: {reason}");
                std::fs::write(
                    out_dir.join(refusal_file_name(*algorithm, *horizon, *seed)),
                    format!("{reason}\n"),
                )?;
            }
            let (a, h, s) = outcome.key();
            timing.push((a, h, s, secs));
            outcomes.push(outcome);
        }
    }
    let summary = summarize_outcomes(&outcomes);
    write_summary(&summary, &out_dir.join(SUMMARY_FILE))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(out_dir.join(TIMING_FILE))?;
    w.write_record(["algorithm", "horizon", "seed", "wall_seconds"])?;
    for (a, h, s, secs) in timing {
        w.write_record([
            a.to_string(),
            h.to_string(),
            s.to_string(),
            format!("{secs:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(ExperimentOutput { outcomes, summary })
}
