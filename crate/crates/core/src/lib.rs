//! Contextual bandits with knapsack constraints and with concave objectives
//! over a finite policy class, together with the exact ground truth and the
//! experiment plumbing used to evaluate them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod agents;
pub mod amo;
pub mod baselines;
pub mod env;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod lp;
pub mod model;
pub mod opsolver;
pub mod trace;
pub mod zestimate;

pub use agents::{run_cbwk, run_cbwr, AgentConfig, ConcaveObjective, ObjectiveSpec};
pub use env::{EnvironmentSpec, EnvironmentStream, ExactMoments, NoiseModel, SpecStream};
pub use error::{Error, Result};
pub use estimators::{History, HistoryRecord, RegretParams};
pub use model::{ActionDistribution, Context, MixedPolicy, PolicyClass, ProblemDims};
pub use trace::{Algorithm, RunTrace};
