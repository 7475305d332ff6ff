//! Offline evaluation of contextual bandit policies from logged
//! exploration data, including nonstationary (learning) policies.
//!
//! The core estimator, [`evaluators::drns_evaluate`], combines doubly
//! robust value estimation with adaptive rejection sampling: it replays a
//! logged exploration stream as if the target policy had generated it,
//! raising the acceptance cap from a running quantile of
//! propensity-to-target ratios. Classic baselines (direct method, inverse
//! propensity scoring, doubly robust, plain rejection sampling, and a
//! worst-case constant cap) live alongside it.
//!
//! Supporting layers: [`oracle`] computes exact values on tiny discrete
//! worlds by brute force and checks the estimator's bias/deviation
//! guarantees against them; [`harness`] orchestrates multi-trial
//! classification-to-bandit experiments and the `bandit-ope` CLI.

pub mod datagen;
pub mod error;
pub mod evaluators;
pub mod harness;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use evaluators::{
    dm_evaluate, dr_evaluate, drns_evaluate, ips_evaluate, rs_evaluate, wc_evaluate, EvalResult,
};
pub use types::{ActionDistribution, Context, ExplorationEvent, Policy, RewardEstimator};
