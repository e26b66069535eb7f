use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_stream, epoch_mu, sampling_table, AgentConfig, EpochSchedule};
use crate::amo::{
    argmax_oracle, convex_min_with_linear_oracle, ConvexFunction, OracleStats, WeightedExample,
};
use crate::env::{concave_opt, EnvironmentStream, ExactMoments, OptSolution};
use crate::error::{contract, Result};
use crate::estimators::{History, HistoryRecord, PolicyTable, PSI};
use crate::model::{Context, MixedPolicy, PolicyClass};
use crate::opsolver::{
    coordinate_descent, update_step_bound, verify_op, EmpiricalRegret, OPWeights, SmoothedMass,
    FEASIBILITY_TOL,
};
use crate::trace::{Algorithm, EpochReport, Recorder, RunInfo, RunTrace, Terminal};

/// Iteration cap of the inner convex solves.
const CONVEX_ITER_CAP: usize = 20_000;

/// A concave `f` on `[0,1]^d`, Lipschitz with constant `L` in some norm.
pub trait ConcaveObjective: Send + Sync {
    fn value(&self, v: &[f64]) -> f64;
    fn supergradient(&self, v: &[f64]) -> Vec<f64>;
    fn lipschitz(&self) -> f64;
    /// `||1_d||` in the norm `L` refers to.
    fn norm_of_ones(&self, d: usize) -> f64;
}

/// `f(v) = w . v`, Lipschitz in the Euclidean norm with `L = ||w||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjective {
    pub w: Vec<f64>,
}

impl ConcaveObjective for LinearObjective {
    fn value(&self, v: &[f64]) -> f64 {
        self.w.iter().zip(v).map(|(a, b)| a * b).sum()
    }
    fn supergradient(&self, _v: &[f64]) -> Vec<f64> {
        self.w.clone()
    }
    fn lipschitz(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
    fn norm_of_ones(&self, d: usize) -> f64 {
        (d as f64).sqrt()
    }
}

/// `f(v) = -||v - v0||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegDistance {
    pub target: Vec<f64>,
}

impl ConcaveObjective for NegDistance {
    fn value(&self, v: &[f64]) -> f64 {
        -self
            .target
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
    fn supergradient(&self, v: &[f64]) -> Vec<f64> {
        let dist = -self.value(v);
        if dist == 0.0 {
            return vec![0.0; v.len()];
        }
        self.target
            .iter()
            .zip(v)
            .map(|(t, x)| (t - x) / dist)
            .collect()
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn norm_of_ones(&self, d: usize) -> f64 {
        (d as f64).sqrt()
    }
}

/// Serializable description of a built-in objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Linear { weights: Vec<f64> },
    NegDistance { target: Vec<f64> },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Box<dyn ConcaveObjective> {
        match self {
            ObjectiveSpec::Linear { weights } => Box::new(LinearObjective { w: weights.clone() }),
            ObjectiveSpec::NegDistance { target } => Box::new(NegDistance {
                target: target.clone(),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::Linear { weights } => weights.len(),
            ObjectiveSpec::NegDistance { target } => target.len(),
        }
    }
}

/// Midpoint concavity and Lipschitz checks on random pairs in `[0,1]^d`,
/// using the Euclidean norm. Returns the number of failed checks.
pub fn spot_check_objective<R: Rng + ?Sized>(
    obj: &dyn ConcaveObjective,
    d: usize,
    pairs: usize,
    rng: &mut R,
) -> usize {
    let mut failures = 0;
    for _ in 0..pairs {
        let u: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fu, fv, fm) = (obj.value(&u), obj.value(&v), obj.value(&mid));
        if fm < 0.5 * (fu + fv) - 1e-12 {
            failures += 1;
        }
        let dist = u
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if (fu - fv).abs() > obj.lipschitz() * dist + 1e-12 {
            failures += 1;
        }
    }
    failures
}

/// `-f` as a convex function.
struct Negated<'a>(&'a dyn ConcaveObjective);

impl ConvexFunction for Negated<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        -self.0.value(y)
    }
    fn subgradient(&self, y: &[f64]) -> Vec<f64> {
        self.0.supergradient(y).into_iter().map(|g| -g).collect()
    }
}

/// `max f(V(P))` over the whole mixture class under the exact moments.
pub fn cbwr_opt(moments: &ExactMoments, obj: &dyn ConcaveObjective) -> Result<OptSolution> {
    concave_opt(moments, &Negated(obj), 1e-9)
}

/// Arg-max oracle over the history's contexts with per-(context, action)
/// scores.
fn history_oracle(
    h: &History,
    pc: &PolicyClass,
    stats: &mut OracleStats,
    mut score: impl FnMut(usize, usize) -> f64,
) -> Result<usize> {
    let examples: Vec<WeightedExample> = (0..h.num_contexts())
        .filter(|&x| h.context_count(x) > 0)
        .map(|x| WeightedExample {
            x: Context(x),
            reward_per_action: (0..h.num_actions()).map(|a| score(x, a)).collect(),
        })
        .collect();
    stats.record();
    argmax_oracle(&examples, pc)
}

fn direction_is_empty(dir: &[f64]) -> bool {
    dir.is_empty()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveArgmax {
    pub policy: MixedPolicy,
    /// `f(V_hat(P_t))`.
    pub value: f64,
    /// Certified upper bound on `max f(V_hat(P))`.
    pub upper_bound: f64,
}

/// `argmax over C(Pi) of f(V_hat(P))`, with the arg-max oracle as the
/// linear minimization oracle over the estimated outcome polytope.
pub fn concave_argmax(
    h: &History,
    obj: &dyn ConcaveObjective,
    pc: &PolicyClass,
    tol: f64,
    stats: &mut OracleStats,
) -> Result<ConcaveArgmax> {
    if h.is_empty() {
        return Err(contract("empirical optimum needs a non-empty history"));
    }
    let t = h.len() as f64;
    let table = h.policy_table(pc)?;
    let mut oracle = |dir: &[f64]| -> Result<(usize, Vec<f64>)> {
        let p = if direction_is_empty(dir) {
            pc.noop_index()
        } else {
            history_oracle(h, pc, stats, |x, a| {
                -h.consumption_sum(x, a)
                    .iter()
                    .zip(dir)
                    .map(|(v, g)| v * g)
                    .sum::<f64>()
                    / t
            })?
        };
        Ok((p, table.consumption[p].clone()))
    };
    let res = convex_min_with_linear_oracle(&Negated(obj), &mut oracle, tol, CONVEX_ITER_CAP)?;
    Ok(ConcaveArgmax {
        policy: res.weights,
        value: -res.value,
        upper_bound: -res.lower_bound,
    })
}

/// Empirical regret `(f(V_hat(P_t)) - f(V_hat(P))) / (||1_d|| L)`.
pub struct ConcaveRegret<'a> {
    h: &'a History,
    obj: &'a dyn ConcaveObjective,
    pc: &'a PolicyClass,
    table: PolicyTable,
    best_value: f64,
    norm: f64,
}

impl<'a> ConcaveRegret<'a> {
    /// `best_value` is `f(V_hat(P_t))`.
    pub fn new(
        h: &'a History,
        obj: &'a dyn ConcaveObjective,
        best_value: f64,
        pc: &'a PolicyClass,
    ) -> Result<Self> {
        if h.is_empty() {
            return Err(contract("regret needs a non-empty history"));
        }
        let norm = obj.norm_of_ones(h.num_resources()) * obj.lipschitz();
        if !(norm > 0.0) {
            return Err(contract(
                "objective must have a positive Lipschitz constant",
            ));
        }
        Ok(Self {
            h,
            obj,
            pc,
            table: h.policy_table(pc)?,
            best_value,
            norm,
        })
    }

    fn estimate(&self, p: &MixedPolicy) -> Vec<f64> {
        self.table.mixture_consumption(p)
    }

    /// Maximizes `V_P(Q) + f(V_hat(P)) / c` over the points
    /// `(V_pi(Q), V_hat(pi))` with the given linear oracle; `c = ||1|| L psi mu`.
    fn maximize_d<O>(
        &self,
        smoothed: &SmoothedMass,
        oracle: &mut O,
        tol: f64,
    ) -> Result<(MixedPolicy, f64, f64)>
    where
        O: FnMut(&[f64]) -> Result<(usize, Vec<f64>)>,
    {
        let k = self.pc.num_actions() as f64;
        let c = self.norm * PSI * smoothed.mu();
        let g = Lifted { obj: self.obj, c };
        let res = convex_min_with_linear_oracle(&g, oracle, tol, CONVEX_ITER_CAP)?;
        let shift = self.best_value / c + 2.0 * k;
        Ok((res.weights, -res.value - shift, -res.lower_bound - shift))
    }

    fn point(&self, smoothed: &SmoothedMass, p: usize) -> Vec<f64> {
        let mut u = vec![smoothed.pure_moments(p, self.h, self.pc).0];
        u.extend_from_slice(&self.table.consumption[p]);
        u
    }
}

/// `-(u_0 + f(u_1..) / c)`.
struct Lifted<'a> {
    obj: &'a dyn ConcaveObjective,
    c: f64,
}

impl ConvexFunction for Lifted<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        -y[0] - self.obj.value(&y[1..]) / self.c
    }
    fn subgradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![-1.0];
        g.extend(
            self.obj
                .supergradient(&y[1..])
                .into_iter()
                .map(|s| -s / self.c),
        );
        g
    }
}

impl EmpiricalRegret for ConcaveRegret<'_> {
    fn regret(&self, p: &MixedPolicy) -> Result<f64> {
        Ok((self.best_value - self.obj.value(&self.estimate(p))) / self.norm)
    }

    fn find_violation(
        &self,
        smoothed: &SmoothedMass,
        tol: f64,
        stats: &mut OracleStats,
    ) -> Result<Option<(MixedPolicy, f64)>> {
        let t = self.h.len() as f64;
        let h = self.h;
        let pc = self.pc;
        let mut oracle = |dir: &[f64]| -> Result<(usize, Vec<f64>)> {
            let p = if direction_is_empty(dir) {
                pc.noop_index()
            } else {
                history_oracle(h, pc, stats, |x, a| {
                    let n = h.context_count(x) as f64;
                    let lin = dir[0] * n / (t * smoothed.mass(x, a))
                        + h.consumption_sum(x, a)
                            .iter()
                            .zip(&dir[1..])
                            .map(|(v, g)| v * g)
                            .sum::<f64>()
                            / t;
                    -lin
                })?
            };
            Ok((p, self.point(smoothed, p)))
        };
        let (p, value, upper) = self.maximize_d(smoothed, &mut oracle, 0.1 * tol)?;
        if upper <= tol || value <= 0.0 {
            return Ok(None);
        }
        Ok(Some((p, value)))
    }

    fn exact_max_violation(&self, smoothed: &SmoothedMass) -> Result<f64> {
        let points: Vec<Vec<f64>> = (0..self.pc.len())
            .map(|p| self.point(smoothed, p))
            .collect();
        let mut oracle = |dir: &[f64]| -> Result<(usize, Vec<f64>)> {
            let mut best = 0;
            let mut best_v = f64::INFINITY;
            for (i, u) in points.iter().enumerate() {
                let v: f64 = dir.iter().zip(u).map(|(a, b)| a * b).sum();
                if v < best_v {
                    best = i;
                    best_v = v;
                }
            }
            Ok((best, points[best].clone()))
        };
        let (_, _, upper) = self.maximize_d(smoothed, &mut oracle, 1e-10)?;
        Ok(upper)
    }
}

/// One run of the concave-objective variant: no exploration prefix, no
/// knapsack and no abort. Outcome vectors are the environment's consumption
/// vectors; `score` is `f` of their average.
#[allow(clippy::too_many_arguments)]
pub fn run_cbwr<E, R>(
    env: &mut E,
    horizon: usize,
    delta: f64,
    obj: &dyn ConcaveObjective,
    pc: &PolicyClass,
    config: &AgentConfig,
    seed: u64,
    rng: &mut R,
) -> Result<RunTrace>
where
    E: EnvironmentStream + ?Sized,
    R: Rng + ?Sized,
{
    let d = env.num_resources();
    check_stream(env, pc, d)?;
    if horizon == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(contract("need T > 0 and delta in (0, 1)"));
    }
    let k = pc.num_actions();
    let n_pi = pc.len();
    let mut rec = Recorder::new(d, None, horizon);
    let mut stats = OracleStats::default();
    let mut history = History::for_class(pc, d);
    let mut epochs = Vec::new();
    let mut truncated = false;

    let mut weights = OPWeights::empty();
    let mut default = MixedPolicy::uniform(n_pi);
    let mut table = sampling_table(
        &weights.flatten(),
        &default,
        epoch_mu(0, k, d, n_pi, delta),
        pc,
    )?;
    let mut epoch = 1;
    let rounds = horizon as u64;
    for t in 1..=rounds {
        let Some(round) = env.next_round() else {
            truncated = true;
            break;
        };
        let (a, p) = table[round.x.0].draw(rng);
        let (r, v) = (round.rewards[a], &round.consumption[a]);
        history.push(HistoryRecord {
            x: round.x,
            action: a,
            reward: r,
            consumption: v.clone(),
            prob: p,
        })?;
        rec.push(t as i64, epoch, a, p, r, v);
        if EpochSchedule::is_boundary(t) && t < rounds {
            let m = t.trailing_zeros() as usize;
            let mu = epoch_mu(m, k, d, n_pi, delta);
            let before = stats.calls;
            let best = concave_argmax(&history, obj, pc, config.amo_tol, &mut stats)?;
            let regret = ConcaveRegret::new(&history, obj, best.value, pc)?;
            let init = if config.warm_start {
                weights.clone()
            } else {
                OPWeights::empty()
            };
            let sol =
                coordinate_descent(&history, mu, init, &regret, pc, config.halt_tol, &mut stats)?;
            let check = if config.verify {
                Some(verify_op(
                    &history,
                    mu,
                    &sol.weights,
                    &regret,
                    pc,
                    FEASIBILITY_TOL,
                )?)
            } else {
                None
            };
            epochs.push(EpochReport {
                t: t as i64,
                epoch: m,
                mu,
                update_steps: sol.update_steps,
                update_bound: update_step_bound(k, mu),
                scale_steps: sol.scale_steps,
                oracle_calls: stats.calls - before,
                p_t_regret: regret.regret(&best.policy)?,
                argmax_gap: best.upper_bound - best.value,
                q_total: sol.q.total(),
                feasible: check.map(|c| c.feasible),
                max_violation: check.map(|c| c.max_mixture_violation),
                first_lhs: check.map(|c| c.first_lhs),
            });
            rec.add_oracle_calls(stats.calls - before);
            weights = sol.weights;
            default = best.policy;
            table = sampling_table(&weights.flatten(), &default, mu, pc)?;
            epoch = m + 1;
        }
    }

    let n = rec.rows.len().max(1) as f64;
    let average: Vec<f64> = rec.cum_consumption.iter().map(|c| c / n).collect();
    let total_reward = rec.cum_reward;
    Ok(RunTrace {
        info: RunInfo {
            algorithm: Algorithm::Cbwr,
            horizon,
            budget: None,
            seed,
            num_resources: d,
        },
        rows: rec.rows,
        epochs,
        terminal: Terminal {
            aborted: false,
            truncated,
            out_of_regime: false,
            total_reward,
            score: obj.value(&average),
            opt: None,
            regret: None,
            z: None,
            b_prime: None,
            t0: 0,
            oracle_calls: stats.calls,
        },
    })
}
