//! Arg-max oracle over the enumerable policy class and the optimizers that
//! only touch the policy class through it.
//!
//! [`argmax_oracle`] is exhaustive search, which is exact at the sizes this
//! crate targets. The knapsack-penalized problems (the empirically best
//! policy and the violating-policy search of coordinate descent) are solved
//! by Lagrangian decomposition: a restricted master LP over the policies the
//! oracle has returned so far supplies resource multipliers, and each oracle
//! call on multiplier-penalized rewards either proves the master optimal or
//! contributes a new policy. The returned mixture is supported on oracle
//! answers only.

mod convex;

pub use convex::{convex_min_with_linear_oracle, ConvexFunction, ConvexMinimum, LinearOracle};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::estimators::{budget_violation, History, PolicyTable, RegretParams};
use crate::lp::{LinearProgram, Relation};
use crate::model::{Context, MixedPolicy, PolicyClass};
use crate::opsolver::SmoothedMass;

/// Oracle-call budget of a single constrained solve.
pub const DEFAULT_CALL_CAP: u64 = 500;
/// Absolute optimality tolerance on the objective scale.
pub const DEFAULT_TOL: f64 = 1e-6;

/// One oracle input: a context and a reward for every action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedExample {
    pub x: Context,
    pub reward_per_action: Vec<f64>,
}

/// Counts arg-max oracle invocations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleStats {
    pub calls: u64,
}

impl OracleStats {
    #[inline]
    pub fn record(&mut self) {
        self.calls += 1;
    }
}

/// Returns the policy maximizing the summed rewards of the examples. Ties go
/// to the lowest policy index.
pub fn argmax_oracle(examples: &[WeightedExample], pc: &PolicyClass) -> Result<usize> {
    if examples.is_empty() {
        return Err(contract("arg-max oracle needs at least one example"));
    }
    for ex in examples {
        if ex.reward_per_action.len() != pc.num_actions() {
            return Err(contract("example reward vector length differs from K"));
        }
        if ex.reward_per_action.iter().any(|r| !r.is_finite()) {
            return Err(contract("example rewards must be finite"));
        }
        if ex.x.0 >= pc.num_contexts() {
            return Err(contract("example context outside the policy class support"));
        }
    }
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for p in 0..pc.len() {
        let value: f64 = examples
            .iter()
            .map(|ex| ex.reward_per_action[pc.action(p, ex.x)])
            .sum();
        if value > best_value {
            best = p;
            best_value = value;
        }
    }
    Ok(best)
}

/// Affine map of example rewards into `[0, 1]` that keeps the arg-max: each
/// example is shifted by its own minimum and all are divided by the largest
/// resulting range.
pub fn normalize_examples(examples: &[WeightedExample]) -> Vec<WeightedExample> {
    let mut out: Vec<WeightedExample> = examples
        .iter()
        .map(|ex| {
            let lo = ex
                .reward_per_action
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            WeightedExample {
                x: ex.x,
                reward_per_action: ex.reward_per_action.iter().map(|r| r - lo).collect(),
            }
        })
        .collect();
    let range = out
        .iter()
        .flat_map(|ex| ex.reward_per_action.iter().copied())
        .fold(0.0, f64::max);
    if range > 0.0 {
        for ex in &mut out {
            for r in &mut ex.reward_per_action {
                *r /= range;
            }
        }
    }
    out
}

/// `max over P in C(Pi), lambda >= 0 of score(P) - z * lambda` subject to
/// `consumption(P) <= (cap + lambda) * 1`, with score and consumption given as
/// per-(context, action) contributions that add up along a policy.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    pub examples: Vec<Context>,
    /// `score[i][a]` for example `i`.
    pub score: Vec<Vec<f64>>,
    /// `consumption[i][a][j]` for example `i`.
    pub consumption: Vec<Vec<Vec<f64>>>,
    pub cap: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution {
    pub policy: MixedPolicy,
    /// Objective attained by `policy`.
    pub value: f64,
    /// Certified upper bound on the optimum.
    pub upper_bound: f64,
    pub oracle_calls: u64,
}

impl PenalizedProblem {
    fn num_resources(&self) -> usize {
        self.consumption
            .first()
            .and_then(|c| c.first())
            .map_or(0, Vec::len)
    }

    pub fn policy_score(&self, p: usize, pc: &PolicyClass) -> f64 {
        self.examples
            .iter()
            .zip(&self.score)
            .map(|(&x, s)| s[pc.action(p, x)])
            .sum()
    }

    pub fn policy_consumption(&self, p: usize, pc: &PolicyClass) -> Vec<f64> {
        let mut out = vec![0.0; self.num_resources()];
        for (&x, c) in self.examples.iter().zip(&self.consumption) {
            for (o, v) in out.iter_mut().zip(&c[pc.action(p, x)]) {
                *o += v;
            }
        }
        out
    }

    /// Objective of an arbitrary mixture, evaluated directly.
    pub fn evaluate(&self, p: &MixedPolicy, pc: &PolicyClass) -> f64 {
        let mut score = 0.0;
        let mut cons = vec![0.0; self.num_resources()];
        for (i, w) in p.iter() {
            score += w * self.policy_score(i, pc);
            for (o, v) in cons.iter_mut().zip(self.policy_consumption(i, pc)) {
                *o += w * v;
            }
        }
        score
            - self.z
                * cons
                    .iter()
                    .map(|v| (v - self.cap).max(0.0))
                    .fold(0.0, f64::max)
    }

    pub fn solve(
        &self,
        pc: &PolicyClass,
        tol: f64,
        call_cap: u64,
        stats: &mut OracleStats,
    ) -> Result<PenalizedSolution> {
        if self.examples.is_empty() {
            return Err(contract("penalized problem has no examples"));
        }
        let d = self.num_resources();
        let mut atoms: Vec<(usize, f64, Vec<f64>)> = Vec::new();
        let mut multipliers = vec![0.0; d];
        let mut calls = 0u64;
        let mut best: Option<(MixedPolicy, f64)> = None;
        let mut upper = f64::INFINITY;

        loop {
            let priced: Vec<WeightedExample> = self
                .examples
                .iter()
                .enumerate()
                .map(|(i, &x)| WeightedExample {
                    x,
                    reward_per_action: self.score[i]
                        .iter()
                        .zip(&self.consumption[i])
                        .map(|(s, c)| {
                            s - c.iter().zip(&multipliers).map(|(v, y)| v * y).sum::<f64>()
                        })
                        .collect(),
                })
                .collect();
            let candidate = argmax_oracle(&normalize_examples(&priced), pc)?;
            stats.record();
            calls += 1;
            let score = self.policy_score(candidate, pc);
            let cons = self.policy_consumption(candidate, pc);
            let reduced = score
                - cons
                    .iter()
                    .zip(&multipliers)
                    .map(|(v, y)| v * y)
                    .sum::<f64>();
            upper = upper.min(self.cap * multipliers.iter().sum::<f64>() + reduced);

            if let Some((_, lb)) = &best {
                let gap = upper - lb;
                if gap <= tol || atoms.iter().any(|a| a.0 == candidate) {
                    break;
                }
            }
            if calls >= call_cap {
                let (policy, value) = best.unwrap_or_else(|| {
                    (
                        MixedPolicy::point_mass(candidate),
                        self.evaluate(&MixedPolicy::point_mass(candidate), pc),
                    )
                });
                return Err(Error::NonConvergence {
                    gap: upper - value,
                    best: policy,
                    value,
                    calls,
                });
            }
            atoms.push((candidate, score, cons));

            let (mixture, duals) = self.solve_master(&atoms)?;
            multipliers = duals;
            let value = self.evaluate(&mixture, pc);
            best = Some((mixture, value));
        }
        let (policy, value) = best.expect("at least one master solve precedes termination");
        Ok(PenalizedSolution {
            policy,
            value,
            upper_bound: upper.max(value),
            oracle_calls: calls,
        })
    }

    /// Restricted master over the collected atoms. Returns the mixture and the
    /// resource multipliers (duals of the budget rows).
    fn solve_master(&self, atoms: &[(usize, f64, Vec<f64>)]) -> Result<(MixedPolicy, Vec<f64>)> {
        let k = atoms.len();
        let d = self.num_resources();
        let mut objective: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        objective.push(-self.z);
        let mut lp = LinearProgram::maximize(objective);
        for j in 0..d {
            let mut row: Vec<f64> = atoms.iter().map(|a| a.2[j]).collect();
            row.push(-1.0);
            lp.add_constraint(row, Relation::Le, self.cap);
        }
        let mut ones = vec![1.0; k];
        ones.push(0.0);
        lp.add_constraint(ones, Relation::Eq, 1.0);
        let sol = lp.solve()?;
        let total: f64 = sol.x[..k].iter().sum();
        let mixture = MixedPolicy::from_weights(
            atoms
                .iter()
                .zip(&sol.x[..k])
                .filter(|(_, &w)| w > 0.0)
                .map(|(a, &w)| (a.0, w / total)),
        )?;
        let duals = sol.duals[..d].iter().map(|y| y.max(0.0)).collect();
        Ok((mixture, duals))
    }
}

/// Builds the penalized problem for `R_hat(P) - Z phi(V_hat(P), B')` from the
/// cached sums of a history. Extra per-(context, action) scores can be added
/// through `extra_score`.
pub(crate) fn history_problem(
    h: &History,
    params: &RegretParams,
    mut extra_score: impl FnMut(usize, usize) -> f64,
) -> Result<PenalizedProblem> {
    if h.is_empty() {
        return Err(contract("constrained solve needs a non-empty history"));
    }
    let t = h.len() as f64;
    let mut examples = Vec::new();
    let mut score = Vec::new();
    let mut consumption = Vec::new();
    for x in 0..h.num_contexts() {
        if h.context_count(x) == 0 {
            continue;
        }
        examples.push(Context(x));
        score.push(
            (0..h.num_actions())
                .map(|a| h.reward_sum(x, a) / t + extra_score(x, a))
                .collect(),
        );
        consumption.push(
            (0..h.num_actions())
                .map(|a| h.consumption_sum(x, a).iter().map(|v| v / t).collect())
                .collect(),
        );
    }
    Ok(PenalizedProblem {
        examples,
        score,
        consumption,
        cap: params.per_round_cap(),
        z: params.z,
    })
}

/// Result of the empirically optimal policy computation.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedArgmax {
    pub policy: MixedPolicy,
    /// `R_hat(P_t) - Z phi(V_hat(P_t), B')`.
    pub value: f64,
    pub upper_bound: f64,
}

/// Empirically optimal mixture for reward minus `Z` times budget violation.
pub fn solve_budgeted_argmax(
    h: &History,
    params: &RegretParams,
    pc: &PolicyClass,
    tol: f64,
    stats: &mut OracleStats,
) -> Result<BudgetedArgmax> {
    let problem = history_problem(h, params, |_, _| 0.0)?;
    let sol = problem.solve(pc, tol, DEFAULT_CALL_CAP, stats)?;
    let table = h.policy_table(pc)?;
    let value = table.mixture_reward(&sol.policy)
        - params.z
            * budget_violation(
                &table.mixture_consumption(&sol.policy),
                params.b_prime,
                params.horizon,
            );
    Ok(BudgetedArgmax {
        policy: sol.policy,
        value,
        upper_bound: sol.upper_bound.max(value),
    })
}

/// Searches for a mixture `P` with `D_P(Q) > tol`.
///
/// `best_value` is the penalized objective of the current empirical
/// optimizer. Returns `None` when the certified maximum of `D_P(Q)` over all
/// mixtures is at most `tol`, or when nothing with a positive `D_P(Q)` was
/// found (then the maximum is at most `tol / 10`).
#[allow(clippy::too_many_arguments)]
pub fn find_violating_policy(
    h: &History,
    q: &MixedPolicy,
    mu: f64,
    params: &RegretParams,
    best_value: f64,
    pc: &PolicyClass,
    tol: f64,
    stats: &mut OracleStats,
) -> Result<Option<(MixedPolicy, f64)>> {
    let k = pc.num_actions() as f64;
    if !(mu > 0.0 && mu <= 1.0 / (2.0 * k) + 1e-15) {
        return Err(contract(format!("mu = {mu} outside (0, 1/(2K)]")));
    }
    let smoothed = SmoothedMass::new(q, mu, pc)?;
    let search = KnapsackRegret::new(h, params, best_value, pc)?;
    search.maximize_violation(&smoothed, tol, stats)
}

/// Empirical regret of the knapsack problem together with the searches over
/// `C(Pi)` that coordinate descent needs.
#[derive(Debug, Clone)]
pub struct KnapsackRegret<'a> {
    h: &'a History,
    params: RegretParams,
    best_value: f64,
    table: PolicyTable,
    pc: &'a PolicyClass,
}

impl<'a> KnapsackRegret<'a> {
    /// `best_value` is the penalized objective attained by `P_t`.
    pub fn new(
        h: &'a History,
        params: &RegretParams,
        best_value: f64,
        pc: &'a PolicyClass,
    ) -> Result<Self> {
        if h.is_empty() {
            return Err(contract(
                "violating-policy search needs a non-empty history",
            ));
        }
        Ok(Self {
            h,
            params: *params,
            best_value,
            table: h.policy_table(pc)?,
            pc,
        })
    }

    pub fn params(&self) -> &RegretParams {
        &self.params
    }

    fn objective(&self, p: &MixedPolicy) -> f64 {
        self.table.mixture_reward(p)
            - self.params.z
                * budget_violation(
                    &self.table.mixture_consumption(p),
                    self.params.b_prime,
                    self.params.horizon,
                )
    }

    /// `Reg_t(P)`.
    pub fn regret(&self, p: &MixedPolicy) -> f64 {
        (self.best_value - self.objective(p)) / (self.params.z + 1.0)
    }

    fn violation_scale(&self, mu: f64) -> f64 {
        self.params.psi * mu * (self.params.z + 1.0)
    }

    fn violation_problem(&self, smoothed: &SmoothedMass) -> Result<PenalizedProblem> {
        let scale = self.violation_scale(smoothed.mu());
        let t = self.h.len() as f64;
        history_problem(self.h, &self.params, |x, a| {
            scale * self.h.context_count(x) as f64 / (t * smoothed.mass(x, a))
        })
    }

    /// Oracle-based search for a mixture with `D_P(Q) > tol`.
    pub fn maximize_violation(
        &self,
        smoothed: &SmoothedMass,
        tol: f64,
        stats: &mut OracleStats,
    ) -> Result<Option<(MixedPolicy, f64)>> {
        let k = self.pc.num_actions() as f64;
        let scale = self.violation_scale(smoothed.mu());
        let problem = self.violation_problem(smoothed)?;
        let sol = problem.solve(self.pc, 0.1 * tol * scale, DEFAULT_CALL_CAP, stats)?;
        let upper_d = (sol.upper_bound - self.best_value) / scale - 2.0 * k;
        let d_value = (sol.value - self.best_value) / scale - 2.0 * k;
        if upper_d <= tol || d_value <= 0.0 {
            return Ok(None);
        }
        Ok(Some((sol.policy, d_value)))
    }

    /// `max over C(Pi)` of `D_P(Q)`, from one LP over the whole policy class.
    pub fn exact_max_violation(&self, smoothed: &SmoothedMass) -> Result<f64> {
        let k = self.pc.num_actions() as f64;
        let scale = self.violation_scale(smoothed.mu());
        let problem = self.violation_problem(smoothed)?;
        let n = self.pc.len();
        let d = self.h.num_resources();
        let mut objective: Vec<f64> = (0..n).map(|p| problem.policy_score(p, self.pc)).collect();
        objective.push(-self.params.z);
        let consumption: Vec<Vec<f64>> = (0..n)
            .map(|p| problem.policy_consumption(p, self.pc))
            .collect();
        let mut lp = LinearProgram::maximize(objective);
        for j in 0..d {
            let mut row: Vec<f64> = consumption.iter().map(|c| c[j]).collect();
            row.push(-1.0);
            lp.add_constraint(row, Relation::Le, problem.cap);
        }
        let mut ones = vec![1.0; n];
        ones.push(0.0);
        lp.add_constraint(ones, Relation::Eq, 1.0);
        let sol = lp.solve()?;
        Ok((sol.objective - self.best_value) / scale - 2.0 * k)
    }
}
