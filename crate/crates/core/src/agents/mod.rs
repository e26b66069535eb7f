//! The knapsack agent and its concave-objective variant.

mod cbwk;
mod cbwr;

pub use cbwk::run_cbwk;
pub use cbwr::{
    cbwr_opt, concave_argmax, run_cbwr, spot_check_objective, ConcaveArgmax, ConcaveObjective,
    ConcaveRegret, LinearObjective, NegDistance, ObjectiveSpec,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amo::DEFAULT_TOL;
use crate::env::EnvironmentStream;
use crate::error::{contract, Error, Result};
use crate::model::{
    action_mass, smooth_project, ActionDistribution, Context, MixedPolicy, PolicyClass, ProblemDims,
};
use crate::opsolver::HALT_TOL;

/// `tau_m = 2^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    /// Index of the epoch currently being played.
    pub current: usize,
}

impl EpochSchedule {
    pub fn tau(m: usize) -> u64 {
        1u64 << m
    }

    /// Epoch containing main-loop round `t >= 1`: the `m >= 1` with
    /// `tau_{m-1} < t <= tau_m`, with rounds 1 and 2 both in epoch 1.
    pub fn epoch_of(t: u64) -> usize {
        if t <= 2 {
            1
        } else {
            (64 - (t - 1).leading_zeros()) as usize
        }
    }

    /// Whether the exploration program is solved after round `t`.
    pub fn is_boundary(t: u64) -> bool {
        t >= 2 && t.is_power_of_two()
    }
}

/// `min(1/(2K), sqrt(ln(16 tau_m^2 (d+1) |Pi| / delta) / (K tau_m)))`.
pub fn epoch_mu(
    m: usize,
    num_actions: usize,
    num_resources: usize,
    pi_size: usize,
    delta: f64,
) -> f64 {
    let k = num_actions as f64;
    let tau = EpochSchedule::tau(m) as f64;
    let inner = (16.0 * tau * tau * (num_resources as f64 + 1.0) * pi_size as f64 / delta).ln();
    (1.0 / (2.0 * k)).min((inner / (k * tau)).sqrt())
}

/// `B' = B - T0 - c sqrt(K T ln(T |Pi| / delta))`; refuses a non-positive result.
pub fn reduced_budget(dims: &ProblemDims, t0: usize, pi_size: usize, c: f64) -> Result<f64> {
    let k = dims.num_actions as f64;
    let t = dims.horizon as f64;
    let slack = c * (k * t * (t * pi_size as f64 / dims.delta).ln()).sqrt();
    let b_prime = dims.budget - t0 as f64 - slack;
    if b_prime > 0.0 {
        Ok(b_prime)
    } else {
        Err(Error::Config(format!(
            "reduced budget B' = {} - {t0} - {slack:.1} = {b_prime:.1} is not positive; B is too small for T = {} (c = {c})",
            dims.budget, dims.horizon
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Constant in front of the square-root term of `B'`.
    pub c: f64,
    /// Absolute tolerance of the empirical-optimum solves.
    pub amo_tol: f64,
    /// Coordinate descent stops once no mixture violates by more than this.
    pub halt_tol: f64,
    /// Start each solve from the previous epoch's weights.
    pub warm_start: bool,
    /// Check every returned solution exhaustively and record the outcome.
    pub verify: bool,
    /// Feed the exploration rounds into the importance-weighted history.
    pub history_includes_exploration: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            amo_tol: DEFAULT_TOL,
            halt_tol: HALT_TOL,
            warm_start: true,
            verify: true,
            history_includes_exploration: false,
        }
    }
}

/// Environment and agent generators of one run. Both come from the run seed
/// on separate ChaCha streams, so the agent's draws never shift the
/// environment's.
pub fn run_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    env.set_stream(0);
    let mut agent = ChaCha8Rng::seed_from_u64(seed);
    agent.set_stream(1);
    (env, agent)
}

pub(crate) fn check_stream<E: EnvironmentStream + ?Sized>(
    env: &E,
    pc: &PolicyClass,
    num_resources: usize,
) -> Result<()> {
    if env.num_actions() != pc.num_actions() || env.num_contexts() != pc.num_contexts() {
        return Err(contract(format!(
            "environment has {} contexts and {} actions, policy class has {} and {}",
            env.num_contexts(),
            env.num_actions(),
            pc.num_contexts(),
            pc.num_actions()
        )));
    }
    if env.num_resources() != num_resources {
        return Err(contract("environment and dimensions disagree on d"));
    }
    Ok(())
}

/// Per-context sampling distributions for one epoch: `Q` completed by the
/// default mixture, then smoothed with `mu`.
pub(crate) fn sampling_table(
    q: &MixedPolicy,
    default: &MixedPolicy,
    mu: f64,
    pc: &PolicyClass,
) -> Result<Vec<ActionDistribution>> {
    let mut q = q.clone();
    let total = q.total();
    // Negative regret estimates within solver tolerance can push the first
    // constraint's weights a hair above one.
    if total > 1.0 {
        q.scale(1.0 / total);
    }
    let mut full = q.clone();
    full.add_scaled(default, (1.0 - q.total()).max(0.0));
    (0..pc.num_contexts())
        .map(|x| {
            let base = ActionDistribution {
                probs: action_mass(&full, Context(x), pc),
            };
            smooth_project(&base, mu, pc.num_actions())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mu_clamps_early() {
        assert_eq!(epoch_mu(0, 4, 2, 16, 0.05), 0.125);
        assert_eq!(epoch_mu(3, 4, 2, 16, 0.05), 0.125);
    }

    #[test]
    fn mu_at_epoch_fifteen() {
        // ln(16 * 2^30 * 3 * 16 / 0.05) / (4 * 32768), evaluated independently.
        let inner: f64 = (16.0f64 * 32768.0 * 32768.0 * 3.0 * 16.0 / 0.05).ln();
        let expected = (inner / 131072.0).sqrt();
        let mu = epoch_mu(15, 4, 2, 16, 0.05);
        assert!((mu - expected).abs() < 1e-15);
        assert!((mu - 0.015_240).abs() < 1e-5, "{mu}");
    }

    #[test]
    fn mu_is_monotone() {
        for m in 0..20 {
            assert!(epoch_mu(m + 1, 4, 2, 16, 0.05) <= epoch_mu(m, 4, 2, 16, 0.05));
        }
    }

    #[test]
    fn reduced_budget_examples() {
        let dims = ProblemDims::new(4, 2, 32_768, 4096.0, 0.05).unwrap();
        assert_eq!(reduced_budget(&dims, 207, 16, 0.0).unwrap(), 4096.0 - 207.0);
        let slack = (131_072.0f64 * (32_768.0f64 * 16.0 / 0.05).ln()).sqrt();
        assert!((slack - 1455.6).abs() < 0.05, "{slack}");
        let b = reduced_budget(&dims, 207, 16, 1.0).unwrap();
        assert!((b - (4096.0 - 207.0 - slack)).abs() < 1e-9);
        let b = reduced_budget(&dims, 2482, 16, 1.0).unwrap();
        assert!((b - 158.4).abs() < 0.05, "{b}");
        let small = ProblemDims::new(4, 2, 2048, 256.0, 0.05).unwrap();
        assert!(matches!(
            reduced_budget(&small, 682, 16, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn schedule() {
        assert_eq!(EpochSchedule::epoch_of(1), 1);
        assert_eq!(EpochSchedule::epoch_of(2), 1);
        assert_eq!(EpochSchedule::epoch_of(3), 2);
        assert_eq!(EpochSchedule::epoch_of(4), 2);
        assert_eq!(EpochSchedule::epoch_of(5), 3);
        assert_eq!(EpochSchedule::epoch_of(32_768), 15);
        assert_eq!(EpochSchedule::epoch_of(32_769), 16);
        assert!(!EpochSchedule::is_boundary(1));
        assert!(EpochSchedule::is_boundary(2) && EpochSchedule::is_boundary(1024));
        assert!(!EpochSchedule::is_boundary(6));
    }

    proptest! {
        #[test]
        fn epoch_brackets_its_round(t in 1u64..1_000_000) {
            let m = EpochSchedule::epoch_of(t);
            prop_assert!(t <= EpochSchedule::tau(m));
            if m > 1 {
                prop_assert!(EpochSchedule::tau(m - 1) < t);
            }
        }

        #[test]
        fn tau_doubles(m in 0usize..40) {
            let (a, b) = (EpochSchedule::tau(m), EpochSchedule::tau(m + 1));
            prop_assert!(a < b && b <= 2 * a);
        }
    }

    #[test]
    fn streams_differ() {
        use rand::RngCore;
        let (mut e, mut a) = run_rngs(5);
        assert_ne!(e.next_u64(), a.next_u64());
        let (mut e2, _) = run_rngs(5);
        let (mut e3, _) = run_rngs(5);
        assert_eq!(e2.next_u64(), e3.next_u64());
    }
}
