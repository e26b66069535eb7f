//! Logged history and the importance-weighted estimators built on it.
//!
//! Every record `(x, a, r, v, p)` is completed into fictitious outcome vectors
//! that are zero off the played action and `r / p`, `v / p` on it. Because the
//! history is append-only and contexts come from a finite support, the sums of
//! the fictitious vectors are cached per `(context, action)` as records
//! arrive; any policy or mixture estimate is then a short sum over contexts.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::model::{Context, MixedPolicy, PolicyClass};

/// Regret scale constant of the exploration program.
pub const PSI: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub x: Context,
    pub action: usize,
    pub reward: f64,
    pub consumption: Vec<f64>,
    /// Probability with which `action` was drawn.
    pub prob: f64,
}

impl HistoryRecord {
    pub fn validate(&self, num_actions: usize, num_resources: usize) -> Result<()> {
        if self.action >= num_actions {
            return Err(contract(format!(
                "action {} >= K = {num_actions}",
                self.action
            )));
        }
        if !(0.0..=1.0).contains(&self.reward) {
            return Err(contract(format!("reward {} outside [0,1]", self.reward)));
        }
        if self.consumption.len() != num_resources {
            return Err(contract(format!(
                "consumption has {} entries, expected {num_resources}",
                self.consumption.len()
            )));
        }
        if self.consumption.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(contract("consumption entry outside [0,1]"));
        }
        if !(self.prob > 0.0 && self.prob <= 1.0) {
            return Err(contract(format!(
                "sampling probability {} outside (0,1]",
                self.prob
            )));
        }
        Ok(())
    }
}

/// Importance-weighted completion of one record: `(r_hat, v_hat)` with
/// `r_hat[a]` and `v_hat[a]` nonzero only for the played action.
pub fn fictitious_outcome(
    rec: &HistoryRecord,
    num_actions: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if rec.prob <= 0.0 {
        return Err(contract("record has zero sampling probability"));
    }
    if rec.action >= num_actions {
        return Err(contract("record action out of range"));
    }
    let d = rec.consumption.len();
    let mut r_hat = vec![0.0; num_actions];
    let mut v_hat = vec![vec![0.0; d]; num_actions];
    r_hat[rec.action] = rec.reward / rec.prob;
    for (j, v) in rec.consumption.iter().enumerate() {
        v_hat[rec.action][j] = v / rec.prob;
    }
    Ok((r_hat, v_hat))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    num_contexts: usize,
    num_actions: usize,
    num_resources: usize,
    includes_exploration: bool,
    records: Vec<HistoryRecord>,
    context_counts: Vec<usize>,
    /// `sum r / p` indexed by `x * K + a`.
    reward_sums: Vec<f64>,
    /// `sum v_j / p` indexed by `(x * K + a) * d + j`.
    consumption_sums: Vec<f64>,
}

impl History {
    pub fn new(num_contexts: usize, num_actions: usize, num_resources: usize) -> Self {
        Self {
            num_contexts,
            num_actions,
            num_resources,
            includes_exploration: false,
            records: Vec::new(),
            context_counts: vec![0; num_contexts],
            reward_sums: vec![0.0; num_contexts * num_actions],
            consumption_sums: vec![0.0; num_contexts * num_actions * num_resources],
        }
    }

    pub fn for_class(pc: &PolicyClass, num_resources: usize) -> Self {
        Self::new(pc.num_contexts(), pc.num_actions(), num_resources)
    }

    pub fn with_exploration_flag(mut self, includes_exploration: bool) -> Self {
        self.includes_exploration = includes_exploration;
        self
    }

    pub fn includes_exploration(&self) -> bool {
        self.includes_exploration
    }

    pub fn push(&mut self, rec: HistoryRecord) -> Result<()> {
        rec.validate(self.num_actions, self.num_resources)?;
        if rec.x.0 >= self.num_contexts {
            return Err(contract(format!("context {} outside support", rec.x.0)));
        }
        let cell = rec.x.0 * self.num_actions + rec.action;
        self.context_counts[rec.x.0] += 1;
        self.reward_sums[cell] += rec.reward / rec.prob;
        let d = self.num_resources;
        for (j, v) in rec.consumption.iter().enumerate() {
            self.consumption_sums[cell * d + j] += v / rec.prob;
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    /// Number of records observed in context `x`.
    pub fn context_count(&self, x: usize) -> usize {
        self.context_counts[x]
    }

    /// `sum over records in context x of r_hat(a)`.
    pub fn reward_sum(&self, x: usize, a: usize) -> f64 {
        self.reward_sums[x * self.num_actions + a]
    }

    /// `sum over records in context x of v_hat(a)`.
    pub fn consumption_sum(&self, x: usize, a: usize) -> &[f64] {
        let d = self.num_resources;
        let cell = x * self.num_actions + a;
        &self.consumption_sums[cell * d..(cell + 1) * d]
    }

    /// Per-policy reward and consumption estimates for every pure policy.
    pub fn policy_table(&self, pc: &PolicyClass) -> Result<PolicyTable> {
        if self.is_empty() {
            return Err(contract("estimates need a non-empty history"));
        }
        let t = self.len() as f64;
        let d = self.num_resources;
        let mut reward = vec![0.0; pc.len()];
        let mut consumption = vec![vec![0.0; d]; pc.len()];
        for p in 0..pc.len() {
            for x in 0..self.num_contexts {
                if self.context_counts[x] == 0 {
                    continue;
                }
                let a = pc.action(p, Context(x));
                reward[p] += self.reward_sum(x, a);
                for (j, v) in self.consumption_sum(x, a).iter().enumerate() {
                    consumption[p][j] += v;
                }
            }
            reward[p] /= t;
            for v in &mut consumption[p] {
                *v /= t;
            }
        }
        Ok(PolicyTable {
            reward,
            consumption,
        })
    }
}

/// Estimated reward and consumption of every pure policy on one history.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub reward: Vec<f64>,
    pub consumption: Vec<Vec<f64>>,
}

impl PolicyTable {
    pub fn mixture_reward(&self, p: &MixedPolicy) -> f64 {
        p.iter().map(|(i, w)| w * self.reward[i]).sum()
    }

    pub fn mixture_consumption(&self, p: &MixedPolicy) -> Vec<f64> {
        let d = self.consumption.first().map_or(0, Vec::len);
        let mut out = vec![0.0; d];
        for (i, w) in p.iter() {
            for (o, v) in out.iter_mut().zip(&self.consumption[i]) {
                *o += w * v;
            }
        }
        out
    }
}

/// Importance-weighted reward estimate of a mixture on the history.
pub fn estimate_reward(h: &History, p: &MixedPolicy, pc: &PolicyClass) -> Result<f64> {
    if h.is_empty() {
        return Err(contract("cannot estimate from an empty history"));
    }
    let t = h.len() as f64;
    let mut total = 0.0;
    for x in 0..h.num_contexts() {
        if h.context_count(x) == 0 {
            continue;
        }
        for (i, w) in p.iter() {
            total += w * h.reward_sum(x, pc.action(i, Context(x)));
        }
    }
    Ok(total / t)
}

/// Importance-weighted consumption estimate of a mixture on the history.
pub fn estimate_consumption(h: &History, p: &MixedPolicy, pc: &PolicyClass) -> Result<Vec<f64>> {
    if h.is_empty() {
        return Err(contract("cannot estimate from an empty history"));
    }
    let t = h.len() as f64;
    let mut total = vec![0.0; h.num_resources()];
    for x in 0..h.num_contexts() {
        if h.context_count(x) == 0 {
            continue;
        }
        for (i, w) in p.iter() {
            let sums = h.consumption_sum(x, pc.action(i, Context(x)));
            for (o, v) in total.iter_mut().zip(sums) {
                *o += w * v;
            }
        }
    }
    for o in &mut total {
        *o /= t;
    }
    Ok(total)
}

/// Largest per-round overshoot of `v` above `B' / T`, clipped at zero.
pub fn budget_violation(v: &[f64], b_prime: f64, horizon: usize) -> f64 {
    let cap = b_prime / horizon as f64;
    v.iter().map(|&vj| (vj - cap).max(0.0)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretParams {
    /// Multiplier converting budget violation into reward units.
    pub z: f64,
    /// Reduced budget `B'`.
    pub b_prime: f64,
    pub horizon: usize,
    pub psi: f64,
}

impl RegretParams {
    pub fn new(z: f64, b_prime: f64, budget: f64, horizon: usize) -> Result<Self> {
        if !(z >= 1.0 && z.is_finite()) {
            return Err(contract(format!("Z must be >= 1, got {z}")));
        }
        if !(b_prime > 0.0 && b_prime <= budget) {
            return Err(contract(format!(
                "B' = {b_prime} must lie in (0, B = {budget}]"
            )));
        }
        if horizon == 0 {
            return Err(contract("horizon must be positive"));
        }
        Ok(Self {
            z,
            b_prime,
            horizon,
            psi: PSI,
        })
    }

    /// Per-round consumption cap `B' / T`.
    pub fn per_round_cap(&self) -> f64 {
        self.b_prime / self.horizon as f64
    }
}

/// `R_hat(P) - Z * phi(V_hat(P), B')`.
pub fn penalized_objective(
    h: &History,
    p: &MixedPolicy,
    params: &RegretParams,
    pc: &PolicyClass,
) -> Result<f64> {
    let r = estimate_reward(h, p, pc)?;
    let v = estimate_consumption(h, p, pc)?;
    Ok(r - params.z * budget_violation(&v, params.b_prime, params.horizon))
}

/// Empirical regret of `p` relative to the empirical optimizer `p_t`.
pub fn empirical_regret(
    h: &History,
    p: &MixedPolicy,
    p_t: &MixedPolicy,
    params: &RegretParams,
    pc: &PolicyClass,
) -> Result<f64> {
    let best = penalized_objective(h, p_t, params, pc)?;
    let this = penalized_objective(h, p, params, pc)?;
    Ok((best - this) / (params.z + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(x: usize, a: usize, r: f64, v: Vec<f64>, p: f64) -> HistoryRecord {
        HistoryRecord {
            x: Context(x),
            action: a,
            reward: r,
            consumption: v,
            prob: p,
        }
    }

    fn class() -> PolicyClass {
        // two contexts; p0 no-op, p1 plays 1 everywhere, p2 plays (0, 2), p3 plays (2, 1)
        PolicyClass::new(vec![vec![0, 0], vec![1, 1], vec![0, 2], vec![2, 1]], 3, 0).unwrap()
    }

    #[test]
    fn fictitious_examples() {
        let (r, _) = fictitious_outcome(&rec(0, 1, 0.8, vec![0.0, 0.0], 0.4), 3).unwrap();
        assert_eq!(r, vec![0.0, 2.0, 0.0]);
        let (r, _) = fictitious_outcome(&rec(0, 2, 0.37, vec![0.0, 0.0], 1.0), 3).unwrap();
        assert_eq!(r[2], 0.37);
        let (_, v) = fictitious_outcome(&rec(0, 0, 0.0, vec![0.3, 0.6], 0.5), 3).unwrap();
        assert_eq!(v[0], vec![0.6, 1.2]);
        let bad = rec(0, 0, 0.0, vec![0.0, 0.0], 0.0);
        assert!(fictitious_outcome(&bad, 3).is_err());
    }

    #[test]
    fn single_record_reward_estimates() {
        let pc = class();
        let mut h = History::for_class(&pc, 2);
        h.push(rec(0, 1, 0.8, vec![0.0, 0.0], 0.4)).unwrap();
        assert!(
            (estimate_reward(&h, &MixedPolicy::point_mass(1), &pc).unwrap() - 2.0).abs() < 1e-15
        );
        assert_eq!(
            estimate_reward(&h, &MixedPolicy::point_mass(2), &pc).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_record_consumption_estimates() {
        let pc = class();
        let mut h = History::for_class(&pc, 2);
        h.push(rec(0, 0, 0.0, vec![0.5, 0.0], 0.5)).unwrap();
        // p2 plays action 0 in context 0.
        assert_eq!(
            estimate_consumption(&h, &MixedPolicy::point_mass(2), &pc).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn noop_consumes_nothing() {
        let pc = class();
        let mut h = History::for_class(&pc, 2);
        h.push(rec(0, 1, 0.5, vec![0.5, 0.9], 0.5)).unwrap();
        h.push(rec(1, 2, 0.5, vec![0.1, 0.2], 0.25)).unwrap();
        assert_eq!(
            estimate_consumption(&h, &MixedPolicy::point_mass(0), &pc).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn empty_history_is_rejected() {
        let pc = class();
        let h = History::for_class(&pc, 2);
        assert!(estimate_reward(&h, &MixedPolicy::point_mass(1), &pc).is_err());
        assert!(estimate_consumption(&h, &MixedPolicy::point_mass(1), &pc).is_err());
    }

    #[test]
    fn invalid_records_are_rejected() {
        let pc = class();
        let mut h = History::for_class(&pc, 2);
        assert!(h.push(rec(0, 1, 1.5, vec![0.0, 0.0], 0.5)).is_err());
        assert!(h.push(rec(0, 1, 0.5, vec![0.0], 0.5)).is_err());
        assert!(h.push(rec(0, 1, 0.5, vec![0.0, 0.0], 0.0)).is_err());
        assert!(h.push(rec(5, 1, 0.5, vec![0.0, 0.0], 0.5)).is_err());
        assert!(h.is_empty());
    }

    #[test]
    fn violation_examples() {
        assert!((budget_violation(&[0.5, 0.2], 0.3, 1) - 0.2).abs() < 1e-15);
        assert_eq!(budget_violation(&[0.1, 0.3], 3.0, 10), 0.0);
        assert_eq!(budget_violation(&[0.9], 0.9, 1), 0.0);
    }

    #[test]
    fn regret_of_the_optimizer_is_zero() {
        let pc = class();
        let mut h = History::for_class(&pc, 2);
        h.push(rec(0, 1, 0.8, vec![0.2, 0.1], 0.5)).unwrap();
        let params = RegretParams::new(3.0, 1.0, 2.0, 4).unwrap();
        let p = MixedPolicy::from_weights([(1, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(empirical_regret(&h, &p, &p, &params, &pc).unwrap(), 0.0);
    }

    #[test]
    fn regret_two_policy_hand_computation() {
        // Two records with p = 1 and no consumption, so phi = 0 everywhere.
        // A plays action 1 in both contexts: (0.6 + 1.0) / 2 = 0.8.
        // B plays action 1 only in context 1: 1.0 / 2 = 0.5.
        let pc = PolicyClass::new(vec![vec![0, 0], vec![1, 1], vec![0, 1]], 2, 0).unwrap();
        let mut h = History::for_class(&pc, 1);
        h.push(rec(0, 1, 0.6, vec![0.0], 1.0)).unwrap();
        h.push(rec(1, 1, 1.0, vec![0.0], 1.0)).unwrap();
        let params = RegretParams::new(1.0, 1.0, 1.0, 2).unwrap();
        let a = MixedPolicy::point_mass(1);
        let b = MixedPolicy::point_mass(2);
        assert!((penalized_objective(&h, &a, &params, &pc).unwrap() - 0.8).abs() < 1e-15);
        assert!((penalized_objective(&h, &b, &params, &pc).unwrap() - 0.5).abs() < 1e-15);
        assert!((empirical_regret(&h, &b, &a, &params, &pc).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn regret_reduces_to_reward_gap_when_feasible() {
        let pc = class();
        let mut h = History::for_class(&pc, 2);
        h.push(rec(0, 1, 0.8, vec![0.01, 0.0], 0.5)).unwrap();
        h.push(rec(1, 2, 0.4, vec![0.0, 0.01], 0.5)).unwrap();
        let params = RegretParams::new(1e6, 10.0, 10.0, 10).unwrap();
        let pt = MixedPolicy::point_mass(1);
        let p = MixedPolicy::point_mass(2);
        let expected = (estimate_reward(&h, &pt, &pc).unwrap()
            - estimate_reward(&h, &p, &pc).unwrap())
            / (1e6 + 1.0);
        assert!((empirical_regret(&h, &p, &pt, &params, &pc).unwrap() - expected).abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn violation_is_convex(
            v1 in prop::collection::vec(0.0f64..2.0, 3),
            v2 in prop::collection::vec(0.0f64..2.0, 3),
            lam in 0.0f64..=1.0,
            cap in 0.0f64..1.5,
        ) {
            let mix: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            let lhs = budget_violation(&mix, cap, 1);
            let rhs = lam * budget_violation(&v1, cap, 1) + (1.0 - lam) * budget_violation(&v2, cap, 1);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn estimates_are_linear_in_the_mixture(
            recs in prop::collection::vec((0usize..2, 0usize..3, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.05f64..=1.0), 1..20),
            w1 in prop::collection::vec(0.0f64..1.0, 4),
            w2 in prop::collection::vec(0.0f64..1.0, 4),
            alpha in 0.0f64..=1.0,
        ) {
            let pc = class();
            let mut h = History::for_class(&pc, 2);
            for (x, a, r, v0, v1, p) in recs {
                h.push(rec(x, a, r, vec![v0, v1], p)).unwrap();
            }
            let norm = |w: &[f64]| {
                let s: f64 = w.iter().sum::<f64>() + 1e-6;
                MixedPolicy::from_weights(w.iter().enumerate().map(|(i, &x)| (i, x / s))).unwrap()
            };
            let (p1, p2) = (norm(&w1), norm(&w2));
            let mut mix = MixedPolicy::empty();
            mix.add_scaled(&p1, alpha);
            mix.add_scaled(&p2, 1.0 - alpha);
            let lhs = estimate_reward(&h, &mix, &pc).unwrap();
            let rhs = alpha * estimate_reward(&h, &p1, &pc).unwrap() + (1.0 - alpha) * estimate_reward(&h, &p2, &pc).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            let lv = estimate_consumption(&h, &mix, &pc).unwrap();
            let v1 = estimate_consumption(&h, &p1, &pc).unwrap();
            let v2 = estimate_consumption(&h, &p2, &pc).unwrap();
            for j in 0..2 {
                prop_assert!((lv[j] - (alpha * v1[j] + (1.0 - alpha) * v2[j])).abs() <= 1e-12 * lv[j].abs().max(1.0));
            }
        }

        #[test]
        fn cached_estimates_match_record_by_record_sum(
            recs in prop::collection::vec((0usize..2, 0usize..3, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.05f64..=1.0), 1..30),
            policy in 0usize..4,
        ) {
            let pc = class();
            let mut h = History::for_class(&pc, 2);
            for (x, a, r, v0, v1, p) in recs {
                h.push(rec(x, a, r, vec![v0, v1], p)).unwrap();
            }
            // Naive: average of fictitious outcomes at pi(x_tau).
            let mut r_sum = 0.0;
            let mut v_sum = [0.0; 2];
            for rec in h.records() {
                let (r_hat, v_hat) = fictitious_outcome(rec, 3).unwrap();
                let a = pc.action(policy, rec.x);
                r_sum += r_hat[a];
                v_sum[0] += v_hat[a][0];
                v_sum[1] += v_hat[a][1];
            }
            let t = h.len() as f64;
            let p = MixedPolicy::point_mass(policy);
            prop_assert!((estimate_reward(&h, &p, &pc).unwrap() - r_sum / t).abs() < 1e-12 * (r_sum / t).max(1.0));
            let v = estimate_consumption(&h, &p, &pc).unwrap();
            prop_assert!((v[0] - v_sum[0] / t).abs() < 1e-12 * (v_sum[0] / t).max(1.0));
            prop_assert!((v[1] - v_sum[1] / t).abs() < 1e-12 * (v_sum[1] / t).max(1.0));
        }
    }
}
