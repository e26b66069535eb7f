use rand::Rng;

use super::{check_stream, epoch_mu, reduced_budget, sampling_table, AgentConfig, EpochSchedule};
use crate::amo::{solve_budgeted_argmax, OracleStats};
use crate::env::EnvironmentStream;
use crate::error::Result;
use crate::estimators::{History, HistoryRecord, RegretParams};
use crate::model::{MixedPolicy, PolicyClass, ProblemDims};
use crate::opsolver::{
    coordinate_descent, knapsack_regret, update_step_bound, verify_op, OPInstance, OPWeights,
    FEASIBILITY_TOL,
};
use crate::trace::{Algorithm, EpochReport, Recorder, RunInfo, RunTrace, Terminal};
use crate::zestimate::{
    estimate_Z, exploration_budget_T0, exploration_clamped, ExplorationEstimates,
};

/// One full knapsack run: uniform exploration for `T0` rounds, then epochs
/// of smoothed sampling from the exploration-program solution.
///
/// The run stops early (aborted) at the first round after which some
/// resource's cumulative consumption, exploration included, reaches `B`.
pub fn run_cbwk<E, R>(
    env: &mut E,
    dims: &ProblemDims,
    pc: &PolicyClass,
    config: &AgentConfig,
    seed: u64,
    rng: &mut R,
) -> Result<RunTrace>
where
    E: EnvironmentStream + ?Sized,
    R: Rng + ?Sized,
{
    dims.validate()?;
    check_stream(env, pc, dims.num_resources)?;
    let k = pc.num_actions();
    let d = dims.num_resources;
    let n_pi = pc.len();
    let t0 = exploration_budget_T0(dims, n_pi);
    let b_prime = reduced_budget(dims, t0, n_pi, config.c)?;

    let mut rec = Recorder::new(d, Some(dims.budget), dims.horizon);
    let mut stats = OracleStats::default();
    let mut history =
        History::for_class(pc, d).with_exploration_flag(config.history_includes_exploration);
    let mut est = ExplorationEstimates::new(pc, d);
    let mut epochs = Vec::new();
    let mut aborted = false;
    let mut truncated = false;
    let mut z = None;

    let uniform = 1.0 / k as f64;
    for i in 0..t0 {
        let Some(round) = env.next_round() else {
            truncated = true;
            break;
        };
        let a = rng.gen_range(0..k);
        let (r, v) = (round.rewards[a], &round.consumption[a]);
        est.record(round.x, a, r, v, pc);
        if config.history_includes_exploration {
            history.push(HistoryRecord {
                x: round.x,
                action: a,
                reward: r,
                consumption: v.clone(),
                prob: uniform,
            })?;
        }
        if rec.push(i as i64 - (t0 as i64 - 1), 0, a, uniform, r, v) {
            aborted = true;
            break;
        }
    }

    if !aborted && !truncated {
        let zv = if t0 > 0 {
            estimate_Z(&est, dims, pc)?
        } else {
            log::warn!("no exploration rounds; using Z = 1");
            1.0
        };
        z = Some(zv);
        let params = RegretParams::new(zv, b_prime, dims.budget, dims.horizon)?;
        let main_rounds = (dims.horizon - t0) as u64;

        let mut weights = OPWeights::empty();
        let mut default = MixedPolicy::uniform(n_pi);
        let mut table = sampling_table(
            &weights.flatten(),
            &default,
            epoch_mu(0, k, d, n_pi, dims.delta),
            pc,
        )?;
        let mut epoch = 1;
        for t in 1..=main_rounds {
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
            if rec.push(t as i64, epoch, a, p, r, v) {
                aborted = true;
                break;
            }
            if EpochSchedule::is_boundary(t) && t < main_rounds {
                let m = t.trailing_zeros() as usize;
                let mu = epoch_mu(m, k, d, n_pi, dims.delta);
                let before = stats.calls;
                let best =
                    solve_budgeted_argmax(&history, &params, pc, config.amo_tol, &mut stats)?;
                let inst = OPInstance {
                    history: &history,
                    mu,
                    params,
                    p_t: best.policy.clone(),
                    q_init: if config.warm_start {
                        weights.clone()
                    } else {
                        OPWeights::empty()
                    },
                };
                let regret = knapsack_regret(&inst, pc)?;
                let q_init = inst.q_init.clone();
                let sol = coordinate_descent(
                    &history,
                    mu,
                    q_init,
                    &regret,
                    pc,
                    config.halt_tol,
                    &mut stats,
                )?;
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
                    p_t_regret: regret.regret(&best.policy),
                    argmax_gap: best.upper_bound - best.value,
                    q_total: sol.q.total(),
                    feasible: check.map(|c| c.feasible),
                    max_violation: check.map(|c| c.max_mixture_violation),
                    first_lhs: check.map(|c| c.first_lhs),
                });
                log::debug!(
                    "t={t} m={m} mu={mu:.4} updates={} |Q|={:.4} calls={}",
                    sol.update_steps,
                    sol.q.total(),
                    stats.calls - before
                );
                rec.add_oracle_calls(stats.calls - before);
                weights = sol.weights;
                default = best.policy;
                table = sampling_table(&weights.flatten(), &default, mu, pc)?;
                epoch = m + 1;
            }
        }
    }

    let total_reward = rec.cum_reward;
    Ok(RunTrace {
        info: RunInfo {
            algorithm: Algorithm::Cbwk,
            horizon: dims.horizon,
            budget: Some(dims.budget),
            seed,
            num_resources: d,
        },
        rows: rec.rows,
        epochs,
        terminal: Terminal {
            aborted,
            truncated,
            out_of_regime: exploration_clamped(dims, n_pi),
            total_reward,
            score: total_reward,
            opt: None,
            regret: None,
            z,
            b_prime: Some(b_prime),
            t0,
            oracle_calls: stats.calls,
        },
    })
}
