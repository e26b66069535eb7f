//! Pure-exploration prefix and the violation multiplier `Z`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::lp::{LinearProgram, Relation};
use crate::model::{Context, MixedPolicy, PolicyClass, ProblemDims};

/// Running sums of `r_bar(pi(x))` and `v_bar(pi(x))` per policy, where the
/// bars are the observed outcome on the played action and zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationEstimates {
    num_actions: usize,
    pub r_bar_sums: Vec<f64>,
    pub v_bar_sums: Vec<Vec<f64>>,
    pub t0_rounds: usize,
    pub consumed: Vec<f64>,
}

impl ExplorationEstimates {
    pub fn new(pc: &PolicyClass, num_resources: usize) -> Self {
        Self {
            num_actions: pc.num_actions(),
            r_bar_sums: vec![0.0; pc.len()],
            v_bar_sums: vec![vec![0.0; num_resources]; pc.len()],
            t0_rounds: 0,
            consumed: vec![0.0; num_resources],
        }
    }

    /// Adds one uniformly explored round.
    pub fn record(
        &mut self,
        x: Context,
        action: usize,
        reward: f64,
        consumption: &[f64],
        pc: &PolicyClass,
    ) {
        for p in 0..pc.len() {
            if pc.action(p, x) == action {
                self.r_bar_sums[p] += reward;
                for (s, v) in self.v_bar_sums[p].iter_mut().zip(consumption) {
                    *s += v;
                }
            }
        }
        for (c, v) in self.consumed.iter_mut().zip(consumption) {
            *c += v;
        }
        self.t0_rounds += 1;
    }

    /// `r_hat(pi) = (K / t) sum r_bar(pi(x))`.
    pub fn r_hat(&self, p: usize) -> f64 {
        self.num_actions as f64 * self.r_bar_sums[p] / self.t0_rounds as f64
    }

    pub fn v_hat(&self, p: usize) -> Vec<f64> {
        let scale = self.num_actions as f64 / self.t0_rounds as f64;
        self.v_bar_sums[p].iter().map(|v| scale * v).collect()
    }
}

/// `12 K T / B * ln(d |Pi| / delta)` before rounding and clamping.
pub fn exploration_formula(dims: &ProblemDims, pi_size: usize) -> f64 {
    12.0 * dims.num_actions as f64 * dims.horizon as f64 / dims.budget
        * (dims.num_resources as f64 * pi_size as f64 / dims.delta).ln()
}

/// Length of the exploration prefix, at most `floor(T / 3)`.
#[allow(non_snake_case)]
pub fn exploration_budget_T0(dims: &ProblemDims, pi_size: usize) -> usize {
    let raw = exploration_formula(dims, pi_size).ceil().max(0.0);
    let cap = dims.horizon / 3;
    if raw > cap as f64 {
        log::debug!(
            "exploration length {raw} exceeds T/3 = {cap}; clamping (the run is outside the guaranteed regime)"
        );
        cap
    } else {
        raw as usize
    }
}

/// Whether the exploration formula had to be clamped.
pub fn exploration_clamped(dims: &ProblemDims, pi_size: usize) -> bool {
    exploration_formula(dims, pi_size).ceil() > (dims.horizon / 3) as f64
}

/// `max over C0(Pi) of T r_hat(P)` subject to `T v_hat(P) <= (B + gamma) 1`.
pub fn relaxed_opt(
    est: &ExplorationEstimates,
    dims: &ProblemDims,
    gamma: f64,
    pc: &PolicyClass,
) -> Result<(f64, MixedPolicy)> {
    if est.t0_rounds == 0 {
        return Err(contract(
            "relaxed optimum needs at least one exploration round",
        ));
    }
    let t = dims.horizon as f64;
    let n = pc.len();
    let mut lp = LinearProgram::maximize((0..n).map(|p| t * est.r_hat(p)).collect());
    let v: Vec<Vec<f64>> = (0..n).map(|p| est.v_hat(p)).collect();
    for j in 0..dims.num_resources {
        lp.add_constraint(
            v.iter().map(|row| t * row[j]).collect(),
            Relation::Le,
            dims.budget + gamma,
        );
    }
    lp.add_constraint(vec![1.0; n], Relation::Le, 1.0);
    let sol = lp.solve()?;
    let p = MixedPolicy::from_weights(
        sol.x
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, &w)| (i, w)),
    )?;
    Ok((sol.objective, p))
}

/// `Z = max(8 OPT_hat / B, 1)` with slack `gamma = B / 2`.
#[allow(non_snake_case)]
pub fn estimate_Z(est: &ExplorationEstimates, dims: &ProblemDims, pc: &PolicyClass) -> Result<f64> {
    let (opt_hat, _) = relaxed_opt(est, dims, dims.budget / 2.0, pc)?;
    Ok((8.0 * opt_hat / dims.budget).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{compute_opt, reference_environment, reference_policy_class};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(k: usize, d: usize, t: usize, b: f64, delta: f64) -> ProblemDims {
        ProblemDims::new(k, d, t, b, delta).unwrap()
    }

    #[test]
    fn exploration_length_follows_the_formula() {
        let d = dims(4, 2, 32_768, 4096.0, 0.05);
        // 12 * 4 * 32768 / 4096 = 384, and 384 * ln(640) = 2481.2...
        let raw = 384.0 * 640f64.ln();
        assert!((exploration_formula(&d, 16) - raw).abs() < 1e-9);
        assert_eq!(exploration_budget_T0(&d, 16), 2482);
        assert!(!exploration_clamped(&d, 16));
    }

    #[test]
    fn exploration_length_large_budget_and_clamp() {
        let big = dims(2, 1, 1000, 12.0 * 2.0 * 1000.0 * (2.0f64 / 0.1).ln(), 0.1);
        assert!(exploration_budget_T0(&big, 2) <= 1);
        let tiny = dims(4, 2, 3000, 10.0, 0.05);
        assert_eq!(exploration_budget_T0(&tiny, 16), 1000);
        assert!(exploration_clamped(&tiny, 16));
    }

    fn single_policy_estimates(r: f64, v: f64) -> (ExplorationEstimates, PolicyClass) {
        // One context, K = 2, a single non-trivial policy playing action 1.
        let pc = PolicyClass::new(vec![vec![1], vec![0]], 2, 1).unwrap();
        let mut est = ExplorationEstimates::new(&pc, 1);
        // Two rounds: action 1 observed once. r_hat = 2 * r / 2 = r.
        est.record(Context(0), 1, r, &[v], &pc);
        est.record(Context(0), 0, 0.0, &[0.0], &pc);
        (est, pc)
    }

    #[test]
    fn one_variable_lp() {
        let (est, pc) = single_policy_estimates(0.5, 0.25);
        assert!((est.r_hat(0) - 0.5).abs() < 1e-15);
        let t = 100;
        // B + gamma = T / 2 leaves room for full weight (T v_hat = T / 4).
        let dm = dims(2, 1, t, 40.0, 0.1);
        let (value, p) = relaxed_opt(&est, &dm, 10.0, &pc).unwrap();
        assert!((value - 50.0).abs() < 1e-9);
        assert!((p.weight(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_policies_too_expensive_gives_zero() {
        let (est, pc) = single_policy_estimates(0.5, 1.0);
        let dm = dims(2, 1, 100, 1e-9, 0.1);
        let (value, _) = relaxed_opt(&est, &dm, 0.0, &pc).unwrap();
        assert!(value.abs() < 1e-9);
        // OPT_hat = 0 clamps Z at 1.
        let (zero, pc) = single_policy_estimates(0.0, 1.0);
        assert_eq!(
            estimate_Z(&zero, &dims(2, 1, 100, 10.0, 0.1), &pc).unwrap(),
            1.0
        );
    }

    #[test]
    fn footnote_geometry() {
        // Two policies with r_hat = 1 and orthogonal unit consumption.
        let pc = PolicyClass::new(vec![vec![0, 0], vec![1, 0], vec![0, 1]], 2, 0).unwrap();
        let mut est = ExplorationEstimates::new(&pc, 2);
        est.record(Context(0), 1, 1.0, &[1.0, 0.0], &pc);
        est.record(Context(1), 1, 1.0, &[0.0, 1.0], &pc);
        // K / t = 1, so each of the two policies has r_hat 1 and a unit vector.
        let t = 10;
        let dm = dims(2, 2, t, 5.0, 0.1);
        let (value, p) = relaxed_opt(&est, &dm, 0.0, &pc).unwrap();
        assert!((value - t as f64).abs() < 1e-9);
        assert!((p.weight(1) - 0.5).abs() < 1e-9 && (p.weight(2) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn z_formula_at_opt_hat_equal_budget() {
        // OPT_hat = B exactly: one policy, r_hat = 1, no consumption, T = B.
        let pc = PolicyClass::new(vec![vec![1], vec![0]], 2, 1).unwrap();
        let mut est = ExplorationEstimates::new(&pc, 1);
        est.record(Context(0), 1, 0.5, &[0.0], &pc);
        let dm = dims(2, 1, 64, 64.0, 0.1);
        assert!((estimate_Z(&est, &dm, &pc).unwrap() - 8.0).abs() < 1e-9);
    }

    fn explore(seed: u64, rounds: usize) -> ExplorationEstimates {
        let spec = reference_environment();
        let pc = reference_policy_class();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut est = ExplorationEstimates::new(&pc, 2);
        for _ in 0..rounds {
            let round = spec.sample_round(&mut rng).unwrap();
            let a = rng.gen_range(0..4);
            est.record(round.x, a, round.rewards[a], &round.consumption[a], &pc);
        }
        est
    }

    #[test]
    fn relaxed_value_monotone_in_gamma() {
        let est = explore(7, 3000);
        let pc = reference_policy_class();
        let dm = dims(4, 2, 32_768, 4096.0, 0.05);
        let mut last = f64::NEG_INFINITY;
        for gamma in [0.0, 1024.0, 2048.0, 4096.0] {
            let (v, _) = relaxed_opt(&est, &dm, gamma, &pc).unwrap();
            assert!(v >= last - 1e-9);
            last = v;
        }
        assert!(estimate_Z(&est, &dm, &pc).unwrap() >= 1.0);
    }

    #[test]
    fn exploration_estimates_are_unbiased() {
        let pc = reference_policy_class();
        let m = reference_environment().exact_moments(&pc).unwrap();
        let reps = 400;
        let p = 9;
        let mut vals = Vec::new();
        for s in 0..reps {
            vals.push(explore(1000 + s, 200).r_hat(p));
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - m.reward[p]).abs() < 3.0 * (var / reps as f64).sqrt());
    }

    #[test]
    fn z_bracket_on_a_few_reference_runs() {
        let pc = reference_policy_class();
        let m = reference_environment().exact_moments(&pc).unwrap();
        let dm = dims(4, 2, 32_768, 4096.0, 0.05);
        let opt = compute_opt(&m, dm.budget, dm.horizon).unwrap().opt;
        let t0 = exploration_budget_T0(&dm, 16);
        for seed in 0..5 {
            let z = estimate_Z(&explore(seed, t0), &dm, &pc).unwrap();
            assert!(
                z >= (4.0 * opt / dm.budget).max(1.0) && z <= 24.0 * opt / dm.budget + 8.0,
                "Z = {z}"
            );
        }
    }
}
