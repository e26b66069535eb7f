//! Per-run traces and their CSV form.
//!
//! Layout of a trace file:
//!
//! ```text
//! # cbwk-trace v1
//! # run algorithm=cbwk horizon=32768 budget=4096 seed=7 d=2
//! t,epoch,action,prob,reward,v1,v2,cum_reward,cum_v1,cum_v2,oracle_calls
//! ...
//! # epoch t=2 m=1 mu=0.125 ...
//! # terminal aborted=false ...
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back yields bit-identical values.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_VERSION: &str = "cbwk-trace v1";

/// Tolerance for the prefix-sum check on write and read.
pub const PREFIX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Cbwk,
    Cbwr,
    Uniform,
    StaticLp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cbwk => "cbwk",
            Algorithm::Cbwr => "cbwr",
            Algorithm::Uniform => "uniform",
            Algorithm::StaticLp => "static-lp",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbwk" => Ok(Algorithm::Cbwk),
            "cbwr" => Ok(Algorithm::Cbwr),
            "uniform" => Ok(Algorithm::Uniform),
            "static-lp" => Ok(Algorithm::StaticLp),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected cbwk, cbwr, uniform or static-lp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Round index; exploration rounds are numbered `-(T0 - 1) ..= 0`.
    pub t: i64,
    pub epoch: usize,
    pub action: usize,
    pub prob: f64,
    pub reward: f64,
    pub consumption: Vec<f64>,
    pub cum_reward: f64,
    pub cum_consumption: Vec<f64>,
    /// Oracle calls made while processing this round.
    pub oracle_calls: u64,
}

/// What happened at one solve of the exploration program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub t: i64,
    pub epoch: usize,
    pub mu: f64,
    pub update_steps: usize,
    pub update_bound: usize,
    pub scale_steps: usize,
    pub oracle_calls: u64,
    /// `Reg_t(P_t)`, zero by construction.
    pub p_t_regret: f64,
    /// Certified suboptimality of `P_t`.
    pub argmax_gap: f64,
    pub q_total: f64,
    /// Result of [`crate::opsolver::verify_op`], when run.
    pub feasible: Option<bool>,
    pub max_violation: Option<f64>,
    pub first_lhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub algorithm: Algorithm,
    pub horizon: usize,
    /// `None` for runs without a knapsack.
    pub budget: Option<f64>,
    pub seed: u64,
    pub num_resources: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub aborted: bool,
    /// The environment ran dry before the horizon.
    pub truncated: bool,
    /// Exploration length had to be clamped.
    pub out_of_regime: bool,
    pub total_reward: f64,
    /// Total reward for knapsack runs, `f` of the average outcome for CBwR.
    pub score: f64,
    pub opt: Option<f64>,
    /// `opt - score`, filled in once `opt` is known.
    pub regret: Option<f64>,
    pub z: Option<f64>,
    pub b_prime: Option<f64>,
    pub t0: usize,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub info: RunInfo,
    pub rows: Vec<TraceRow>,
    pub epochs: Vec<EpochReport>,
    pub terminal: Terminal,
}

/// Appends rows while keeping the running sums.
#[derive(Debug, Clone)]
pub(crate) struct Recorder {
    pub rows: Vec<TraceRow>,
    pub cum_reward: f64,
    pub cum_consumption: Vec<f64>,
    budget: Option<f64>,
}

impl Recorder {
    pub fn new(num_resources: usize, budget: Option<f64>, capacity: usize) -> Self {
        Self {
            rows: Vec::with_capacity(capacity),
            cum_reward: 0.0,
            cum_consumption: vec![0.0; num_resources],
            budget,
        }
    }

    /// Logs one round; returns `true` when cumulative consumption has reached
    /// the budget in some coordinate.
    pub fn push(
        &mut self,
        t: i64,
        epoch: usize,
        action: usize,
        prob: f64,
        reward: f64,
        consumption: &[f64],
    ) -> bool {
        self.cum_reward += reward;
        for (c, v) in self.cum_consumption.iter_mut().zip(consumption) {
            *c += v;
        }
        self.rows.push(TraceRow {
            t,
            epoch,
            action,
            prob,
            reward,
            consumption: consumption.to_vec(),
            cum_reward: self.cum_reward,
            cum_consumption: self.cum_consumption.clone(),
            oracle_calls: 0,
        });
        match self.budget {
            Some(b) => self.cum_consumption.iter().any(|&c| c >= b),
            None => false,
        }
    }

    pub fn add_oracle_calls(&mut self, calls: u64) {
        if let Some(last) = self.rows.last_mut() {
            last.oracle_calls += calls;
        }
    }
}

impl RunTrace {
    /// Sets `opt` and the regret against it.
    pub fn set_opt(&mut self, opt: f64) {
        self.terminal.opt = Some(opt);
        self.terminal.regret = Some(opt - self.terminal.score);
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.rows.iter().map(|r| r.oracle_calls).sum()
    }

    /// Checks that the cumulative columns are prefix sums of the per-round
    /// columns and that the terminal totals match.
    pub fn check_prefix_sums(&self) -> Result<()> {
        let d = self.info.num_resources;
        let mut r = 0.0;
        let mut v = vec![0.0; d];
        for row in &self.rows {
            if row.consumption.len() != d || row.cum_consumption.len() != d {
                return Err(Error::Contract(format!(
                    "row t={} has the wrong width",
                    row.t
                )));
            }
            r += row.reward;
            for (c, x) in v.iter_mut().zip(&row.consumption) {
                *c += x;
            }
            let off = (r - row.cum_reward).abs().max(
                v.iter()
                    .zip(&row.cum_consumption)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            if off > PREFIX_TOL {
                return Err(Error::Contract(format!(
                    "prefix sums break at t={} (off by {off:e})",
                    row.t
                )));
            }
        }
        if (r - self.terminal.total_reward).abs() > PREFIX_TOL {
            return Err(Error::Contract(
                "terminal total reward differs from the rows".into(),
            ));
        }
        Ok(())
    }

    /// Whether some row reached the budget without being the aborted final row.
    pub fn budget_breach(&self) -> bool {
        let Some(b) = self.info.budget else {
            return false;
        };
        let n = self.rows.len();
        self.rows.iter().enumerate().any(|(i, row)| {
            let over = row.cum_consumption.iter().any(|&c| c >= b);
            over && !(self.terminal.aborted && i + 1 == n)
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.check_prefix_sums()?;
        let d = self.info.num_resources;
        writeln!(out, "# {TRACE_VERSION}")?;
        writeln!(
            out,
            "# run algorithm={} horizon={} budget={} seed={} d={}",
            self.info.algorithm,
            self.info.horizon,
            opt_f64(self.info.budget),
            self.info.seed,
            d
        )?;
        let mut header = String::from("t,epoch,action,prob,reward");
        for j in 1..=d {
            write!(header, ",v{j}").unwrap();
        }
        header.push_str(",cum_reward");
        for j in 1..=d {
            write!(header, ",cum_v{j}").unwrap();
        }
        header.push_str(",oracle_calls");
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            write!(
                line,
                "{},{},{},{},{}",
                row.t, row.epoch, row.action, row.prob, row.reward
            )
            .unwrap();
            for v in &row.consumption {
                write!(line, ",{v}").unwrap();
            }
            write!(line, ",{}", row.cum_reward).unwrap();
            for v in &row.cum_consumption {
                write!(line, ",{v}").unwrap();
            }
            write!(line, ",{}", row.oracle_calls).unwrap();
            writeln!(out, "{line}")?;
        }
        for e in &self.epochs {
            writeln!(
                out,
                "# epoch t={} m={} mu={} updates={} bound={} scales={} calls={} p_t_regret={} argmax_gap={} q_total={} feasible={} max_violation={} first_lhs={}",
                e.t,
                e.epoch,
                e.mu,
                e.update_steps,
                e.update_bound,
                e.scale_steps,
                e.oracle_calls,
                e.p_t_regret,
                e.argmax_gap,
                e.q_total,
                e.feasible.map_or("na".to_string(), |b| b.to_string()),
                opt_f64(e.max_violation),
                opt_f64(e.first_lhs),
            )?;
        }
        let t = &self.terminal;
        writeln!(
            out,
            "# terminal aborted={} truncated={} out_of_regime={} total_reward={} score={} opt={} regret={} z={} b_prime={} t0={} oracle_calls={}",
            t.aborted,
            t.truncated,
            t.out_of_regime,
            t.total_reward,
            t.score,
            opt_f64(t.opt),
            opt_f64(t.regret),
            opt_f64(t.z),
            opt_f64(t.b_prime),
            t.t0,
            t.oracle_calls
        )?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::Config(format!("trace line {}: {msg}", line + 1));
        let (_, first) = lines.next().ok_or_else(|| bad(0, "empty trace"))?;
        if first? != format!("# {TRACE_VERSION}") {
            return Err(bad(0, "missing or unsupported schema line"));
        }
        let (i, run) = lines.next().ok_or_else(|| bad(1, "missing run line"))?;
        let run = run?;
        let kv = parse_kv(
            run.strip_prefix("# run ")
                .ok_or_else(|| bad(i, "expected '# run'"))?,
        );
        let get = |k: &str| {
            kv.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| bad(i, k))
        };
        let info = RunInfo {
            algorithm: get("algorithm")?.parse()?,
            horizon: parse(get("horizon")?, i)?,
            budget: parse_opt(get("budget")?, i)?,
            seed: parse(get("seed")?, i)?,
            num_resources: parse(get("d")?, i)?,
        };
        let d = info.num_resources;
        let width = 7 + 2 * d;
        let (i, _header) = lines.next().ok_or_else(|| bad(2, "missing header"))?;
        let _ = i;
        let mut rows = Vec::new();
        let mut epochs = Vec::new();
        let mut terminal = None;
        for (i, line) in lines {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# epoch ") {
                let kv = parse_kv(rest);
                let get = |k: &str| {
                    kv.iter()
                        .find(|(key, _)| key == k)
                        .map(|(_, v)| v.as_str())
                        .ok_or_else(|| bad(i, k))
                };
                epochs.push(EpochReport {
                    t: parse(get("t")?, i)?,
                    epoch: parse(get("m")?, i)?,
                    mu: parse(get("mu")?, i)?,
                    update_steps: parse(get("updates")?, i)?,
                    update_bound: parse(get("bound")?, i)?,
                    scale_steps: parse(get("scales")?, i)?,
                    oracle_calls: parse(get("calls")?, i)?,
                    p_t_regret: parse(get("p_t_regret")?, i)?,
                    argmax_gap: parse(get("argmax_gap")?, i)?,
                    q_total: parse(get("q_total")?, i)?,
                    feasible: parse_opt(get("feasible")?, i)?,
                    max_violation: parse_opt(get("max_violation")?, i)?,
                    first_lhs: parse_opt(get("first_lhs")?, i)?,
                });
            } else if let Some(rest) = line.strip_prefix("# terminal ") {
                let kv = parse_kv(rest);
                let get = |k: &str| {
                    kv.iter()
                        .find(|(key, _)| key == k)
                        .map(|(_, v)| v.as_str())
                        .ok_or_else(|| bad(i, k))
                };
                terminal = Some(Terminal {
                    aborted: parse(get("aborted")?, i)?,
                    truncated: parse(get("truncated")?, i)?,
                    out_of_regime: parse(get("out_of_regime")?, i)?,
                    total_reward: parse(get("total_reward")?, i)?,
                    score: parse(get("score")?, i)?,
                    opt: parse_opt(get("opt")?, i)?,
                    regret: parse_opt(get("regret")?, i)?,
                    z: parse_opt(get("z")?, i)?,
                    b_prime: parse_opt(get("b_prime")?, i)?,
                    t0: parse(get("t0")?, i)?,
                    oracle_calls: parse(get("oracle_calls")?, i)?,
                });
            } else if line.starts_with('#') || line.is_empty() {
                continue;
            } else {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != width {
                    return Err(bad(
                        i,
                        &format!("expected {width} fields, found {}", f.len()),
                    ));
                }
                let nums = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
                    f[range].iter().map(|s| parse(s, i)).collect()
                };
                rows.push(TraceRow {
                    t: parse(f[0], i)?,
                    epoch: parse(f[1], i)?,
                    action: parse(f[2], i)?,
                    prob: parse(f[3], i)?,
                    reward: parse(f[4], i)?,
                    consumption: nums(5..5 + d)?,
                    cum_reward: parse(f[5 + d], i)?,
                    cum_consumption: nums(6 + d..6 + 2 * d)?,
                    oracle_calls: parse(f[6 + 2 * d], i)?,
                });
            }
        }
        let terminal =
            terminal.ok_or_else(|| Error::Config("trace has no terminal line".into()))?;
        let trace = RunTrace {
            info,
            rows,
            epochs,
            terminal,
        };
        trace.check_prefix_sums()?;
        Ok(trace)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or("na".to_string(), |x| x.to_string())
}

fn parse_kv(s: &str) -> Vec<(String, String)> {
    s.split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn parse<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("trace line {}: cannot parse {s:?}", line + 1)))
}

fn parse_opt<T: FromStr>(s: &str, line: usize) -> Result<Option<T>> {
    if s == "na" {
        Ok(None)
    } else {
        parse(s, line).map(Some)
    }
}
