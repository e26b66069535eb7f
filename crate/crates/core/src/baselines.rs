//! Reference agents for comparison. Both obey the same abort rule as the
//! knapsack agent.

use rand::Rng;

use crate::agents::check_stream;
use crate::env::EnvironmentStream;
use crate::error::{contract, Result};
use crate::model::{mixture_action_distribution, Context, MixedPolicy, PolicyClass, ProblemDims};
use crate::trace::{Algorithm, Recorder, RunInfo, RunTrace, Terminal};

/// Plays every action with probability `1/K`.
pub fn baseline_uniform<E, R>(
    env: &mut E,
    dims: &ProblemDims,
    seed: u64,
    rng: &mut R,
) -> Result<RunTrace>
where
    E: EnvironmentStream + ?Sized,
    R: Rng + ?Sized,
{
    dims.validate()?;
    if env.num_actions() != dims.num_actions || env.num_resources() != dims.num_resources {
        return Err(contract("environment and dimensions disagree"));
    }
    let k = dims.num_actions;
    let prob = 1.0 / k as f64;
    play(env, dims, Algorithm::Uniform, seed, |_| {
        let a = rng.gen_range(0..k);
        (a, prob)
    })
}

/// Samples a policy from `p_star` every round and plays its action.
pub fn baseline_static_lp<E, R>(
    env: &mut E,
    dims: &ProblemDims,
    pc: &PolicyClass,
    p_star: &MixedPolicy,
    seed: u64,
    rng: &mut R,
) -> Result<RunTrace>
where
    E: EnvironmentStream + ?Sized,
    R: Rng + ?Sized,
{
    dims.validate()?;
    check_stream(env, pc, dims.num_resources)?;
    let table = (0..pc.num_contexts())
        .map(|x| mixture_action_distribution(p_star, Context(x), pc))
        .collect::<Result<Vec<_>>>()?;
    play(env, dims, Algorithm::StaticLp, seed, |x| {
        table[x.0].draw(rng)
    })
}

fn play<E>(
    env: &mut E,
    dims: &ProblemDims,
    algorithm: Algorithm,
    seed: u64,
    mut choose: impl FnMut(Context) -> (usize, f64),
) -> Result<RunTrace>
where
    E: EnvironmentStream + ?Sized,
{
    let mut rec = Recorder::new(dims.num_resources, Some(dims.budget), dims.horizon);
    let (mut aborted, mut truncated) = (false, false);
    for t in 1..=dims.horizon {
        let Some(round) = env.next_round() else {
            truncated = true;
            break;
        };
        let (a, p) = choose(round.x);
        if rec.push(t as i64, 0, a, p, round.rewards[a], &round.consumption[a]) {
            aborted = true;
            break;
        }
    }
    let total_reward = rec.cum_reward;
    Ok(RunTrace {
        info: RunInfo {
            algorithm,
            horizon: dims.horizon,
            budget: Some(dims.budget),
            seed,
            num_resources: dims.num_resources,
        },
        rows: rec.rows,
        epochs: Vec::new(),
        terminal: Terminal {
            aborted,
            truncated,
            out_of_regime: false,
            total_reward,
            score: total_reward,
            opt: None,
            regret: None,
            z: None,
            b_prime: None,
            t0: 0,
            oracle_calls: 0,
        },
    })
}
