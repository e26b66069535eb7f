//! Domain types shared by every part of the simulator: problem dimensions,
//! contexts, the finite policy class, mixtures over policies and the smoothed
//! action distributions the agents sample from.
//!
//! Action `0` is always the no-op action (zero reward, zero consumption) and
//! the policy class carries a designated no-op policy that plays it in every
//! context.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Tolerance used for every "weights sum to one" check on mixtures.
pub const WEIGHT_TOL: f64 = 1e-9;

/// Index of the no-op action.
pub const NOOP_ACTION: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemDims {
    /// Number of actions, including the no-op at index 0.
    pub num_actions: usize,
    /// Number of resources.
    pub num_resources: usize,
    /// Horizon `T`.
    pub horizon: usize,
    /// Common per-resource budget `B`.
    pub budget: f64,
    /// Allowed failure probability.
    pub delta: f64,
}

impl ProblemDims {
    pub fn new(
        num_actions: usize,
        num_resources: usize,
        horizon: usize,
        budget: f64,
        delta: f64,
    ) -> Result<Self> {
        let dims = Self {
            num_actions,
            num_resources,
            horizon,
            budget,
            delta,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_actions < 2 {
            return Err(contract("need at least two actions (no-op plus one)"));
        }
        if self.num_resources < 1 {
            return Err(contract("need at least one resource"));
        }
        if self.horizon < 1 {
            return Err(contract("horizon must be positive"));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(contract(format!(
                "budget must be positive, got {}",
                self.budget
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(contract(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Index into the environment's finite context support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context(pub usize);

impl Context {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// A finite, enumerable set of deterministic policies `context -> action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyClass {
    num_actions: usize,
    num_contexts: usize,
    noop_index: usize,
    /// `table[p][x]` is the action policy `p` plays in context `x`.
    table: Vec<Vec<usize>>,
}

impl PolicyClass {
    pub fn new(table: Vec<Vec<usize>>, num_actions: usize, noop_index: usize) -> Result<Self> {
        if table.is_empty() {
            return Err(contract("policy class is empty"));
        }
        let num_contexts = table[0].len();
        if num_contexts == 0 {
            return Err(contract("policies must cover at least one context"));
        }
        for (p, row) in table.iter().enumerate() {
            if row.len() != num_contexts {
                return Err(contract(format!(
                    "policy {p} covers {} contexts, expected {num_contexts}",
                    row.len()
                )));
            }
            if let Some(&a) = row.iter().find(|&&a| a >= num_actions) {
                return Err(contract(format!(
                    "policy {p} plays action {a} >= K = {num_actions}"
                )));
            }
        }
        match table.get(noop_index) {
            None => {
                return Err(contract(format!(
                    "no-op policy index {noop_index} out of range"
                )))
            }
            Some(row) if row.iter().any(|&a| a != NOOP_ACTION) => {
                return Err(contract("designated no-op policy plays a non-no-op action"));
            }
            _ => {}
        }
        Ok(Self {
            num_actions,
            num_contexts,
            noop_index,
            table,
        })
    }

    #[inline]
    pub fn action(&self, policy: usize, x: Context) -> usize {
        self.table[policy][x.0]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn noop_index(&self) -> usize {
        self.noop_index
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }
}

/// Sparse non-negative weights over policy indices.
///
/// Members of `C0(Pi)` have total weight at most one; members of `C(Pi)`
/// have total weight exactly one (both up to [`WEIGHT_TOL`]).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MixedPolicy {
    weights: BTreeMap<usize, f64>,
}

impl MixedPolicy {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn point_mass(policy: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(policy, 1.0);
        Self { weights }
    }

    /// Uniform distribution over `0..n`.
    pub fn uniform(n: usize) -> Self {
        let w = 1.0 / n as f64;
        Self {
            weights: (0..n).map(|p| (p, w)).collect(),
        }
    }

    /// Builds a mixture from `(policy, weight)` pairs, merging duplicates and
    /// dropping exact zeros.
    pub fn from_weights<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> Result<Self> {
        let mut m = Self::empty();
        for (p, w) in pairs {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(contract(format!(
                    "weight {w} for policy {p} is not a finite non-negative number"
                )));
            }
            m.add(p, w);
        }
        if m.total() > 1.0 + WEIGHT_TOL {
            return Err(contract(format!(
                "mixture weights sum to {} > 1",
                m.total()
            )));
        }
        Ok(m)
    }

    pub fn add(&mut self, policy: usize, weight: f64) {
        if weight == 0.0 {
            return;
        }
        *self.weights.entry(policy).or_insert(0.0) += weight;
    }

    pub fn weight(&self, policy: usize) -> f64 {
        self.weights.get(&policy).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().map(|(&p, &w)| (p, w))
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scale(&mut self, c: f64) {
        for w in self.weights.values_mut() {
            *w *= c;
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &MixedPolicy, c: f64) {
        for (p, w) in other.iter() {
            self.add(p, c * w);
        }
    }

    pub fn is_distribution(&self) -> bool {
        (self.total() - 1.0).abs() <= WEIGHT_TOL
    }

    /// Dense weight vector of length `n`.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (p, w) in self.iter() {
            out[p] += w;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Draws one action by inversion; returns it with its probability.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.gen::<f64>() * self.sum();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = a;
                acc += p;
                if u < acc {
                    return (a, p);
                }
            }
        }
        (last_positive, self.probs[last_positive])
    }
}

/// Per-context action mass `Q(a|x)` of a (possibly sub-unit) mixture, without
/// any normalization.
pub fn action_mass(q: &MixedPolicy, x: Context, pc: &PolicyClass) -> Vec<f64> {
    let mut probs = vec![0.0; pc.num_actions()];
    for (p, w) in q.iter() {
        probs[pc.action(p, x)] += w;
    }
    probs
}

/// `P(a|x) = sum of P(pi) over policies with pi(x) = a`, for `P` in `C(Pi)`.
pub fn mixture_action_distribution(
    p: &MixedPolicy,
    x: Context,
    pc: &PolicyClass,
) -> Result<ActionDistribution> {
    if !p.is_distribution() {
        return Err(contract(format!(
            "mixture weights sum to {}, expected 1",
            p.total()
        )));
    }
    Ok(ActionDistribution {
        probs: action_mass(p, x, pc),
    })
}

/// Smoothed projection `(1 - K mu) q(a) + mu`.
pub fn smooth_project(
    q: &ActionDistribution,
    mu: f64,
    num_actions: usize,
) -> Result<ActionDistribution> {
    let k = num_actions as f64;
    if !(0.0..=1.0 / k).contains(&mu) {
        return Err(contract(format!(
            "smoothing parameter {mu} outside [0, 1/K]"
        )));
    }
    if q.probs.len() != num_actions {
        return Err(contract("distribution length does not match K"));
    }
    let scale = 1.0 - k * mu;
    Ok(ActionDistribution {
        probs: q.probs.iter().map(|&p| scale * p + mu).collect(),
    })
}

/// Assigns the mass missing from `q` to the default mixture.
pub fn complete_mixture(q: &MixedPolicy, default: &MixedPolicy) -> Result<MixedPolicy> {
    let total = q.total();
    if total > 1.0 + WEIGHT_TOL {
        return Err(contract(format!("sub-distribution has mass {total} > 1")));
    }
    if !default.is_distribution() {
        return Err(contract("default mixture is not a distribution"));
    }
    let mut out = q.clone();
    let rest = (1.0 - total).max(0.0);
    out.add_scaled(default, rest);
    Ok(out)
}

/// The action distribution `SAMPLE` draws from in context `x`.
pub fn sampling_distribution(
    x: Context,
    q: &MixedPolicy,
    default: &MixedPolicy,
    mu: f64,
    pc: &PolicyClass,
) -> Result<ActionDistribution> {
    let full = complete_mixture(q, default)?;
    let base = ActionDistribution {
        probs: action_mass(&full, x, pc),
    };
    smooth_project(&base, mu, pc.num_actions())
}

/// Draws an action from the smoothed projection of `q` completed by `default`.
/// Returns the action and the probability it was drawn with.
pub fn sample_action<R: Rng + ?Sized>(
    x: Context,
    q: &MixedPolicy,
    default: &MixedPolicy,
    mu: f64,
    rng: &mut R,
    pc: &PolicyClass,
) -> Result<(usize, f64)> {
    Ok(sampling_distribution(x, q, default, mu, pc)?.draw(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_context_class() -> PolicyClass {
        // p0 no-op, p1 -> (1, 2), p2 -> (2, 1), p3 -> (1, 1)
        PolicyClass::new(vec![vec![0, 0], vec![1, 2], vec![2, 1], vec![1, 1]], 3, 0).unwrap()
    }

    #[test]
    fn point_mass_distribution() {
        let pc = two_context_class();
        let d = mixture_action_distribution(&MixedPolicy::point_mass(1), Context(1), &pc).unwrap();
        assert_eq!(d.probs, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn half_half_distribution() {
        let pc = PolicyClass::new(vec![vec![0], vec![1]], 2, 0).unwrap();
        let p = MixedPolicy::from_weights([(0, 0.5), (1, 0.5)]).unwrap();
        let d = mixture_action_distribution(&p, Context(0), &pc).unwrap();
        assert_eq!(d.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn shared_action_merges_weights() {
        let pc = PolicyClass::new(vec![vec![0], vec![1], vec![1]], 2, 0).unwrap();
        let p = MixedPolicy::from_weights([(1, 0.5), (2, 0.5)]).unwrap();
        let d = mixture_action_distribution(&p, Context(0), &pc).unwrap();
        assert_eq!(d.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn non_distribution_is_rejected() {
        let pc = two_context_class();
        let p = MixedPolicy::from_weights([(1, 0.3)]).unwrap();
        assert!(mixture_action_distribution(&p, Context(0), &pc).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let q = ActionDistribution {
            probs: vec![1.0, 0.0],
        };
        assert_eq!(smooth_project(&q, 0.25, 2).unwrap().probs, vec![0.75, 0.25]);
        let q = ActionDistribution {
            probs: vec![0.2, 0.5, 0.3],
        };
        assert_eq!(smooth_project(&q, 0.0, 3).unwrap().probs, q.probs);
        let q = ActionDistribution {
            probs: vec![0.25; 4],
        };
        assert_eq!(smooth_project(&q, 0.125, 4).unwrap().probs, vec![0.25; 4]);
        assert!(smooth_project(&q, 0.3, 4).is_err());
        assert!(smooth_project(&q, -0.01, 4).is_err());
    }

    #[test]
    fn completion_examples() {
        let q = MixedPolicy::from_weights([(1, 0.4), (2, 0.3)]).unwrap();
        let c = complete_mixture(&q, &MixedPolicy::point_mass(3)).unwrap();
        assert!((c.weight(3) - 0.3).abs() < 1e-15);
        assert!(c.is_distribution());

        let full = MixedPolicy::from_weights([(1, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(
            complete_mixture(&full, &MixedPolicy::point_mass(3)).unwrap(),
            full
        );

        let default = MixedPolicy::uniform(4);
        assert_eq!(
            complete_mixture(&MixedPolicy::empty(), &default).unwrap(),
            default
        );
    }

    #[test]
    fn empty_q_with_noop_default_is_deterministic() {
        let pc = two_context_class();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, p) = sample_action(
                Context(0),
                &MixedPolicy::empty(),
                &MixedPolicy::point_mass(0),
                0.0,
                &mut rng,
                &pc,
            )
            .unwrap();
            assert_eq!((a, p), (0, 1.0));
        }
    }

    #[test]
    fn full_smoothing_is_uniform() {
        let pc = two_context_class();
        let q = MixedPolicy::from_weights([(1, 0.7)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (_, p) = sample_action(
                Context(1),
                &q,
                &MixedPolicy::uniform(4),
                1.0 / 3.0,
                &mut rng,
                &pc,
            )
            .unwrap();
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_frequency_matches_smoothed_mass() {
        // Q on a policy playing action 1, mu = 0.1, K = 2: action 1 has mass 0.8 * 1 + 0.1 = 0.9.
        let pc = PolicyClass::new(vec![vec![0], vec![1]], 2, 0).unwrap();
        let q = MixedPolicy::point_mass(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                sample_action(
                    Context(0),
                    &q,
                    &MixedPolicy::point_mass(0),
                    0.1,
                    &mut rng,
                    &pc,
                )
                .unwrap()
                .0 == 1
            })
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.9).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let pc = two_context_class();
        let q = MixedPolicy::from_weights([(1, 0.3), (2, 0.2)]).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|i| {
                    sample_action(
                        Context(i % 2),
                        &q,
                        &MixedPolicy::uniform(4),
                        0.05,
                        &mut rng,
                        &pc,
                    )
                    .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn policy_class_validation() {
        assert!(PolicyClass::new(vec![vec![0, 0], vec![3, 1]], 3, 0).is_err());
        assert!(PolicyClass::new(vec![vec![1, 0], vec![2, 1]], 3, 0).is_err());
        assert!(PolicyClass::new(vec![vec![0, 0], vec![2]], 3, 0).is_err());
    }

    fn arb_mixture(n: usize) -> impl Strategy<Value = MixedPolicy> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(move |raw| {
            let s: f64 = raw.iter().sum::<f64>() + 1e-3;
            MixedPolicy::from_weights(raw.iter().enumerate().map(|(i, &w)| (i, w / s))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn smoothed_distribution_sums_to_one(q in arb_mixture(4), x in 0usize..2, mu_frac in 0.0f64..=1.0) {
            let pc = two_context_class();
            let mu = mu_frac / 3.0;
            let d = sampling_distribution(Context(x), &q, &MixedPolicy::uniform(4), mu, &pc).unwrap();
            prop_assert!((d.sum() - 1.0).abs() <= 1e-9);
            prop_assert!(d.min() >= mu - 1e-12);
        }

        #[test]
        fn completion_is_a_distribution(q in arb_mixture(4), d in 0usize..4) {
            let c = complete_mixture(&q, &MixedPolicy::point_mass(d)).unwrap();
            prop_assert!((c.total() - 1.0).abs() <= 1e-9);
            prop_assert!(c.iter().all(|(_, w)| w >= 0.0));
        }

        #[test]
        fn reported_probability_is_analytic_mass(q in arb_mixture(4), x in 0usize..2, seed in 0u64..1000) {
            let pc = two_context_class();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, p) = sample_action(Context(x), &q, &MixedPolicy::uniform(4), 0.05, &mut rng, &pc).unwrap();
            let d = sampling_distribution(Context(x), &q, &MixedPolicy::uniform(4), 0.05, &pc).unwrap();
            prop_assert!((d.probs[a] - p).abs() <= 1e-12);
            prop_assert!(p >= 0.05 - 1e-12);
        }
    }
}
