//! Synthetic environments over a finite context support, exact expectations,
//! the static optimum and the reference instance.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amo::{convex_min_with_linear_oracle, ConvexFunction};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, Relation};
use crate::model::{Context, MixedPolicy, PolicyClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    Deterministic,
    /// Every entry is an independent coin with the mean as success rate.
    Bernoulli,
    /// Uniform on `mean +- h`, where `h` is the half-width shrunk per entry
    /// so the interval stays inside `[0, 1]` (which keeps the mean exact).
    UniformJitter {
        half_width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub context_probs: Vec<f64>,
    /// `mean_reward[x][a]`.
    pub mean_reward: Vec<Vec<f64>>,
    /// `mean_consumption[x][a][j]`.
    pub mean_consumption: Vec<Vec<Vec<f64>>>,
    pub noise: NoiseModel,
}

/// One round's full outcome tables. The agent only sees the played column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub x: Context,
    pub rewards: Vec<f64>,
    pub consumption: Vec<Vec<f64>>,
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl EnvironmentSpec {
    pub fn num_contexts(&self) -> usize {
        self.context_probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.mean_reward.first().map_or(0, Vec::len)
    }

    pub fn num_resources(&self) -> usize {
        self.mean_consumption
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_contexts();
        let k = self.num_actions();
        let d = self.num_resources();
        if n == 0 || k < 2 || d == 0 {
            return Err(Error::Config(format!(
                "environment needs contexts, K >= 2 and d >= 1 (got |X| = {n}, K = {k}, d = {d})"
            )));
        }
        if self
            .context_probs
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::Config(
                "context probabilities must be non-negative".into(),
            ));
        }
        let total: f64 = self.context_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "context probabilities sum to {total}, not 1"
            )));
        }
        if self.mean_reward.len() != n || self.mean_consumption.len() != n {
            return Err(Error::Config(
                "mean tables must have one row per context".into(),
            ));
        }
        for x in 0..n {
            if self.mean_reward[x].len() != k || self.mean_consumption[x].len() != k {
                return Err(Error::Config(format!("context {x}: expected {k} actions")));
            }
            for a in 0..k {
                let cons = &self.mean_consumption[x][a];
                if cons.len() != d {
                    return Err(Error::Config(format!(
                        "context {x}, action {a}: expected {d} resources"
                    )));
                }
                if !in_unit(self.mean_reward[x][a]) || !cons.iter().all(|&v| in_unit(v)) {
                    return Err(Error::Config(format!(
                        "context {x}, action {a}: means must lie in [0, 1]"
                    )));
                }
            }
            if self.mean_reward[x][0] != 0.0
                || self.mean_consumption[x][0].iter().any(|&v| v != 0.0)
            {
                return Err(Error::Config(format!(
                    "context {x}: action 0 is the no-op and must have zero reward and consumption"
                )));
            }
        }
        if let NoiseModel::UniformJitter { half_width } = self.noise {
            if !(half_width.is_finite() && half_width >= 0.0) {
                return Err(Error::Config(
                    "jitter half-width must be non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    fn realize<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match self.noise {
            NoiseModel::Deterministic => mean,
            NoiseModel::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::UniformJitter { half_width } => {
                let h = half_width.min(mean).min(1.0 - mean);
                if h <= 0.0 {
                    mean
                } else {
                    rng.gen_range(mean - h..=mean + h)
                }
            }
        }
    }

    /// Outcome tables for a given context.
    pub fn realize_round<R: Rng + ?Sized>(&self, x: Context, rng: &mut R) -> Round {
        let rewards = self.mean_reward[x.0]
            .iter()
            .map(|&m| self.realize(m, rng))
            .collect();
        let consumption = self.mean_consumption[x.0]
            .iter()
            .map(|row| row.iter().map(|&m| self.realize(m, rng)).collect())
            .collect();
        Round {
            x,
            rewards,
            consumption,
        }
    }

    /// Draws a context and its outcome tables.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Round> {
        let dist = WeightedIndex::new(&self.context_probs)
            .map_err(|e| Error::Config(format!("context distribution: {e}")))?;
        Ok(self.realize_round(Context(dist.sample(rng)), rng))
    }

    pub fn exact_moments(&self, pc: &PolicyClass) -> Result<ExactMoments> {
        if pc.num_contexts() != self.num_contexts() || pc.num_actions() != self.num_actions() {
            return Err(Error::Config(
                "policy class does not match the environment".into(),
            ));
        }
        let d = self.num_resources();
        let mut reward = vec![0.0; pc.len()];
        let mut consumption = vec![vec![0.0; d]; pc.len()];
        for p in 0..pc.len() {
            for (x, &px) in self.context_probs.iter().enumerate() {
                let a = pc.action(p, Context(x));
                reward[p] += px * self.mean_reward[x][a];
                for (c, m) in consumption[p].iter_mut().zip(&self.mean_consumption[x][a]) {
                    *c += px * m;
                }
            }
        }
        Ok(ExactMoments {
            reward,
            consumption,
        })
    }
}

/// Exact `R(pi)` and `V(pi)` for every pure policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub reward: Vec<f64>,
    pub consumption: Vec<Vec<f64>>,
}

impl ExactMoments {
    pub fn r_of(&self, p: &MixedPolicy) -> f64 {
        p.iter().map(|(i, w)| w * self.reward[i]).sum()
    }

    pub fn v_of(&self, p: &MixedPolicy) -> Vec<f64> {
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

/// Source of rounds for an agent.
pub trait EnvironmentStream {
    fn num_contexts(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn num_resources(&self) -> usize;
    /// `None` once the stream is exhausted.
    fn next_round(&mut self) -> Option<Round>;
}

/// I.i.d. rounds from a spec.
#[derive(Debug, Clone)]
pub struct SpecStream {
    spec: EnvironmentSpec,
    contexts: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl SpecStream {
    pub fn new(spec: EnvironmentSpec, rng: ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let contexts = WeightedIndex::new(&spec.context_probs)
            .map_err(|e| Error::Config(format!("context distribution: {e}")))?;
        Ok(Self {
            spec,
            contexts,
            rng,
        })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }
}

impl EnvironmentStream for SpecStream {
    fn num_contexts(&self) -> usize {
        self.spec.num_contexts()
    }
    fn num_actions(&self) -> usize {
        self.spec.num_actions()
    }
    fn num_resources(&self) -> usize {
        self.spec.num_resources()
    }
    fn next_round(&mut self) -> Option<Round> {
        let x = Context(self.contexts.sample(&mut self.rng));
        Some(self.spec.realize_round(x, &mut self.rng))
    }
}

/// Plays back a fixed list of rounds.
#[derive(Debug, Clone)]
pub struct ReplayStream {
    rounds: std::vec::IntoIter<Round>,
    num_contexts: usize,
    num_actions: usize,
    num_resources: usize,
}

impl ReplayStream {
    pub fn new(
        rounds: Vec<Round>,
        num_contexts: usize,
        num_actions: usize,
        num_resources: usize,
    ) -> Self {
        Self {
            rounds: rounds.into_iter(),
            num_contexts,
            num_actions,
            num_resources,
        }
    }
}

impl EnvironmentStream for ReplayStream {
    fn num_contexts(&self) -> usize {
        self.num_contexts
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn num_resources(&self) -> usize {
        self.num_resources
    }
    fn next_round(&mut self) -> Option<Round> {
        self.rounds.next()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptSolution {
    pub opt: f64,
    pub p_star: MixedPolicy,
}

/// `max T R(P)` over `C(Pi)` subject to `T V(P) <= B 1`.
pub fn compute_opt(moments: &ExactMoments, budget: f64, horizon: usize) -> Result<OptSolution> {
    let t = horizon as f64;
    let n = moments.reward.len();
    let d = moments.consumption.first().map_or(0, Vec::len);
    let mut lp = LinearProgram::maximize(moments.reward.iter().map(|r| t * r).collect());
    for j in 0..d {
        lp.add_constraint(
            moments.consumption.iter().map(|c| t * c[j]).collect(),
            Relation::Le,
            budget,
        );
    }
    lp.add_constraint(vec![1.0; n], Relation::Eq, 1.0);
    let sol = lp.solve().map_err(|e| match e {
        LpError::Infeasible => {
            Error::Config("no feasible policy; is the no-op in the class?".into())
        }
        other => Error::Lp(other),
    })?;
    let p_star = MixedPolicy::from_weights(
        sol.x
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, &w)| (i, w)),
    )?;
    Ok(OptSolution {
        opt: sol.objective,
        p_star,
    })
}

/// `OPT(b)` for each budget.
pub fn opt_curve(moments: &ExactMoments, budgets: &[f64], horizon: usize) -> Result<Vec<f64>> {
    budgets
        .iter()
        .map(|&b| compute_opt(moments, b, horizon).map(|s| s.opt))
        .collect()
}

/// Whether `v0` equals `V(P)` for some `P` in `C(Pi)`.
pub fn is_attainable(moments: &ExactMoments, v0: &[f64]) -> Result<bool> {
    let n = moments.reward.len();
    let mut lp = LinearProgram::maximize(vec![0.0; n]);
    for (j, &target) in v0.iter().enumerate() {
        lp.add_constraint(
            moments.consumption.iter().map(|c| c[j]).collect(),
            Relation::Eq,
            target,
        );
    }
    lp.add_constraint(vec![1.0; n], Relation::Eq, 1.0);
    match lp.solve() {
        Ok(_) => Ok(true),
        Err(LpError::Infeasible) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// `max f(V(P))` over `C(Pi)` for a concave `f`, given as the convex `-f`.
pub fn concave_opt<G: ConvexFunction + ?Sized>(
    moments: &ExactMoments,
    neg_f: &G,
    tol: f64,
) -> Result<OptSolution> {
    let points = &moments.consumption;
    let mut oracle = |dir: &[f64]| -> Result<(usize, Vec<f64>)> {
        let mut best = 0;
        let mut best_v = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let v: f64 = if dir.is_empty() {
                0.0
            } else {
                dir.iter().zip(p).map(|(a, b)| a * b).sum()
            };
            if v < best_v {
                best = i;
                best_v = v;
            }
        }
        Ok((best, points[best].clone()))
    };
    let res = convex_min_with_linear_oracle(neg_f, &mut oracle, tol, 100_000)?;
    Ok(OptSolution {
        opt: -res.value,
        p_star: res.weights,
    })
}

/// Policies of the reference instance: `pi_{a,b}` plays `a` when the low
/// context bit is 0 and `b` otherwise, at index `4a + b`. Index 0 is the no-op.
pub fn reference_policy_class() -> PolicyClass {
    let table = (0..16)
        .map(|i| {
            let (a, b) = (i / 4, i % 4);
            (0..8).map(|x| if x & 1 == 0 { a } else { b }).collect()
        })
        .collect();
    PolicyClass::new(table, 4, 0).expect("reference class is well formed")
}

/// Eight equally likely contexts, four actions, two resources. Actions 1 and
/// 2 pay well on opposite halves of the contexts but each drains mostly one
/// resource; action 3 is cheap and mediocre.
pub fn reference_environment() -> EnvironmentSpec {
    let mut mean_reward = Vec::new();
    let mut mean_consumption = Vec::new();
    for x in 0..8usize {
        let low = x & 1 == 0;
        mean_reward.push(vec![
            0.0,
            if low { 0.7 } else { 0.4 },
            if low { 0.4 } else { 0.7 },
            0.3 + 0.05 * (x >> 1) as f64,
        ]);
        mean_consumption.push(vec![
            vec![0.0, 0.0],
            vec![0.6, 0.05],
            vec![0.05, 0.6],
            vec![0.1, 0.1],
        ]);
    }
    EnvironmentSpec {
        context_probs: vec![0.125; 8],
        mean_reward,
        mean_consumption,
        noise: NoiseModel::Bernoulli,
    }
}
