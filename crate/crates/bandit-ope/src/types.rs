//! Core domain types shared by every evaluator, policy, and data tool.
//!
//! The unit of logged data is an [`ExplorationEvent`]: a context, the action
//! the logging policy took, the observed reward in `[0, 1]`, and the logged
//! probability (propensity) of that action. Target policies are evaluated
//! through the [`Policy`] trait, which maps a context plus an interaction
//! history to a distribution over a finite action set `[0, K)`; stationary
//! policies simply ignore the history. Reward models enter through
//! [`RewardEstimator`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ── Contexts ────────────────────────────────────────────────────────────

/// A feature vector, stored sparsely as sorted `(feature id, value)` pairs.
///
/// Dense vectors are a special case (index becomes the id, zeros dropped),
/// so all learners and estimators operate on the sparse view only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Context {
    features: Vec<(u32, f64)>,
}

impl Context {
    /// Build from sparse pairs. Pairs are sorted by id; zero values are
    /// dropped. Duplicate ids are a caller bug.
    pub fn sparse(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.retain(|&(_, v)| v != 0.0);
        pairs.sort_unstable_by_key(|&(id, _)| id);
        debug_assert!(
            pairs.windows(2).all(|w| w[0].0 < w[1].0),
            "duplicate feature ids"
        );
        Self { features: pairs }
    }

    /// Build from a dense vector; index `i` becomes feature id `i`.
    pub fn dense(values: &[f64]) -> Self {
        Self {
            features: values
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    /// One-hot context used by enumerable worlds: feature `id` set to 1.
    pub fn one_hot(id: u32) -> Self {
        Self {
            features: vec![(id, 1.0)],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.features.iter().copied()
    }

    pub fn get(&self, id: u32) -> f64 {
        match self.features.binary_search_by_key(&id, |&(i, _)| i) {
            Ok(pos) => self.features[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Largest feature id present, if any.
    pub fn max_feature_id(&self) -> Option<u32> {
        self.features.last().map(|&(id, _)| id)
    }

    /// Index encoded by a one-hot context (the first feature id; 0 for an
    /// empty context). Table-driven policies and enumerable worlds key their
    /// rows on this.
    pub fn one_hot_index(&self) -> usize {
        self.features.first().map_or(0, |&(id, _)| id as usize)
    }

    /// Dot product against a dense weight vector; ids beyond its length
    /// contribute nothing.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.features
            .iter()
            .filter(|&&(id, _)| (id as usize) < weights.len())
            .map(|&(id, v)| weights[id as usize] * v)
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.features.iter().map(|&(_, v)| v * v).sum()
    }
}

impl Serialize for Context {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<u32, f64> = self.features.iter().copied().collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Context {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<u32, f64>::deserialize(deserializer)?;
        Ok(Context::sparse(map.into_iter().collect()))
    }
}

// ── Logged events ───────────────────────────────────────────────────────

/// One logged exploration tuple: context, chosen action, observed reward,
/// and the probability with which the logging policy chose that action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationEvent {
    #[serde(rename = "x")]
    pub context: Context,
    #[serde(rename = "a")]
    pub action: usize,
    #[serde(rename = "r")]
    pub reward: f64,
    #[serde(rename = "p")]
    pub propensity: f64,
}

impl ExplorationEvent {
    /// Validating constructor: propensity in `(0, 1]`, reward in `[0, 1]`.
    pub fn new(context: Context, action: usize, reward: f64, propensity: f64) -> Result<Self> {
        let event = Self {
            context,
            action,
            reward,
            propensity,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.propensity > 0.0 && self.propensity <= 1.0) {
            return Err(Error::invalid_argument(format!(
                "propensity must be in (0, 1], got {}",
                self.propensity
            )));
        }
        if !(0.0..=1.0).contains(&self.reward) {
            return Err(Error::invalid_argument(format!(
                "reward must be in [0, 1], got {}",
                self.reward
            )));
        }
        Ok(())
    }
}

// ── Target history ──────────────────────────────────────────────────────

/// One accepted round of the simulated target-policy interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub context: Context,
    pub action: usize,
    pub reward: f64,
}

/// The ordered list of accepted `(context, action, reward)` triples a
/// nonstationary policy conditions on. Append-only; entries are never
/// rewritten.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetHistory {
    entries: Vec<HistoryEntry>,
}

impl TargetHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: HistoryEntry) {
        self.entries.push(entry);
    }

    /// Drop the most recent entry. Used by enumerators that walk the tree of
    /// possible histories; evaluators only ever append.
    pub fn pop(&mut self) -> Option<HistoryEntry> {
        self.entries.pop()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    /// A copy of the first `len` entries.
    pub fn prefix(&self, len: usize) -> TargetHistory {
        TargetHistory {
            entries: self.entries[..len].to_vec(),
        }
    }

    /// A copy of the last `len` entries.
    pub fn suffix(&self, len: usize) -> TargetHistory {
        TargetHistory {
            entries: self.entries[self.entries.len() - len..].to_vec(),
        }
    }
}

// ── Action distributions ────────────────────────────────────────────────

/// A probability distribution over the action set `[0, K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

/// Tolerance on the sum-to-one check.
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

impl ActionDistribution {
    /// Validating constructor: entries nonnegative, summing to 1 within
    /// [`DISTRIBUTION_SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid_argument("empty action distribution"));
        }
        if let Some(p) = probs.iter().find(|&&p| !(p >= 0.0)) {
            return Err(Error::invalid_argument(format!(
                "negative or NaN probability {p}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(Error::invalid_argument(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(action: usize, k: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn num_actions(&self) -> usize {
        self.probs.len()
    }

    /// Probability of `action`. Panics if the action is outside `[0, K)`;
    /// that means the policy and the dataset disagree on K.
    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate()
    }
}

// ── Policy and reward-estimator interfaces ──────────────────────────────

/// A (possibly nonstationary) target policy: a pure function from
/// `(context, history)` to a distribution over actions. Two calls with equal
/// arguments must return equal distributions; internal caching of retrained
/// models is allowed as long as it preserves that.
pub trait Policy: Send + Sync {
    fn action_distribution(&self, context: &Context, history: &TargetHistory) -> ActionDistribution;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn action_distribution(&self, context: &Context, history: &TargetHistory) -> ActionDistribution {
        (**self).action_distribution(context, history)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn action_distribution(&self, context: &Context, history: &TargetHistory) -> ActionDistribution {
        (**self).action_distribution(context, history)
    }
}

/// A fixed estimator of expected conditional reward, trained before
/// evaluation begins on a disjoint split. Outputs must lie in `[0, 1]`.
pub trait RewardEstimator: Send + Sync {
    fn estimate(&self, context: &Context, action: usize) -> f64;
}

impl<R: RewardEstimator + ?Sized> RewardEstimator for &R {
    fn estimate(&self, context: &Context, action: usize) -> f64 {
        (**self).estimate(context, action)
    }
}

impl<R: RewardEstimator + ?Sized> RewardEstimator for Box<R> {
    fn estimate(&self, context: &Context, action: usize) -> f64 {
        (**self).estimate(context, action)
    }
}

/// The constant reward estimator; `ConstantEstimator::new(0.5)` is the usual
/// minimax choice when no model is available, and `0` reduces DR to IPS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimator {
    value: f64,
}

impl ConstantEstimator {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid_argument(format!(
                "constant estimate must be in [0, 1], got {value}"
            )));
        }
        Ok(Self { value })
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

impl RewardEstimator for ConstantEstimator {
    fn estimate(&self, _context: &Context, _action: usize) -> f64 {
        self.value
    }
}
