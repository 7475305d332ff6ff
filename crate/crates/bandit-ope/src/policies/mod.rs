//! Concrete policies and reward estimators.
//!
//! Stationary policies ignore the interaction history: the uniform policy,
//! table-driven policies for enumerable worlds, and ε-greedy over a trained
//! classifier. Nonstationary ones condition on it: [`EmpiricalGreedyPolicy`]
//! tracks per-context empirical means (cheap enough for exact enumeration),
//! and [`AdaptivePolicy`] periodically retrains the classifier on the
//! accepted history, which is the online-learning target the capped
//! rejection evaluator exists for.

pub mod logistic;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::types::{ActionDistribution, Context, Policy, RewardEstimator, TargetHistory};

pub use logistic::{
    train_logistic_ova, train_logistic_partial, BinaryExample, LabeledExample, LearnerConfig,
    LinearModel,
};

// ── Shared pieces ───────────────────────────────────────────────────────

/// ε-greedy mix: probability `(1−eps) + eps/K` on `best`, `eps/K` elsewhere.
/// The uniform branch includes the greedy action.
pub fn eps_greedy_distribution(best: usize, k: usize, eps: f64) -> ActionDistribution {
    let mut probs = vec![eps / k as f64; k];
    probs[best] += 1.0 - eps;
    ActionDistribution::new(probs).expect("eps-greedy mix is a valid distribution")
}

fn validate_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid_argument(format!(
            "eps must be in [0, 1], got {eps}"
        )));
    }
    Ok(())
}

/// Argmax with ties broken toward the lowest index.
fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

// ── Stationary policies ─────────────────────────────────────────────────

/// The uniform random policy over `K` actions.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    k: usize,
}

impl UniformPolicy {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid_argument("need at least one action"));
        }
        Ok(Self { k })
    }
}

impl Policy for UniformPolicy {
    fn action_distribution(&self, _: &Context, _: &TargetHistory) -> ActionDistribution {
        ActionDistribution::uniform(self.k)
    }
}

/// A stationary policy given by one distribution row per one-hot context.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    rows: Vec<ActionDistribution>,
}

impl TablePolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_argument("need at least one context row"));
        }
        let rows = rows
            .into_iter()
            .map(ActionDistribution::new)
            .collect::<Result<Vec<_>>>()?;
        let k = rows[0].num_actions();
        if rows.iter().any(|r| r.num_actions() != k) {
            return Err(Error::invalid_argument("ragged action table"));
        }
        Ok(Self { rows })
    }

    pub fn row(&self, index: usize) -> &ActionDistribution {
        &self.rows[index]
    }

    pub fn num_contexts(&self) -> usize {
        self.rows.len()
    }
}

impl Policy for TablePolicy {
    fn action_distribution(&self, context: &Context, _: &TargetHistory) -> ActionDistribution {
        self.rows[context.one_hot_index()].clone()
    }
}

/// A reward table for enumerable worlds: `r̂(x, a) = rows[x][a]`.
#[derive(Debug, Clone)]
pub struct TableRewardEstimator {
    rows: Vec<Vec<f64>>,
}

impl TableRewardEstimator {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_argument("need at least one context row"));
        }
        for row in &rows {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid_argument(format!(
                    "reward estimate {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { rows })
    }
}

impl RewardEstimator for TableRewardEstimator {
    fn estimate(&self, context: &Context, action: usize) -> f64 {
        self.rows[context.one_hot_index()][action]
    }
}

/// ε-greedy over a trained classifier: the greedy action maximizes the
/// model's score, ties toward the lowest index.
#[derive(Debug, Clone)]
pub struct EpsGreedyPolicy {
    model: Arc<LinearModel>,
    eps: f64,
}

impl EpsGreedyPolicy {
    pub fn new(model: Arc<LinearModel>, eps: f64) -> Result<Self> {
        validate_eps(eps)?;
        if model.num_classes() == 0 {
            return Err(Error::invalid_argument("model has no classes"));
        }
        Ok(Self { model, eps })
    }
}

impl Policy for EpsGreedyPolicy {
    fn action_distribution(&self, context: &Context, _: &TargetHistory) -> ActionDistribution {
        let best = self.model.best_action(context);
        eps_greedy_distribution(best, self.model.num_classes(), self.eps)
    }
}

/// `r̂` read straight off a classifier's per-class sigmoid outputs.
#[derive(Debug, Clone)]
pub struct ModelRewardEstimator {
    model: Arc<LinearModel>,
}

impl ModelRewardEstimator {
    pub fn new(model: Arc<LinearModel>) -> Self {
        Self { model }
    }
}

impl RewardEstimator for ModelRewardEstimator {
    fn estimate(&self, context: &Context, action: usize) -> f64 {
        logistic::sigmoid(self.model.score(context, action))
    }
}

// ── Nonstationary policies ──────────────────────────────────────────────

/// ε-greedy over per-(context, action) empirical mean rewards of the
/// history, with a symmetric pseudo-observation of 1/2 per action so unseen
/// actions stay competitive. A pure function of `(context, history)`, cheap
/// enough for exhaustive enumeration in the oracle tests.
#[derive(Debug, Clone)]
pub struct EmpiricalGreedyPolicy {
    k: usize,
    eps: f64,
}

impl EmpiricalGreedyPolicy {
    pub fn new(k: usize, eps: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid_argument("need at least one action"));
        }
        validate_eps(eps)?;
        Ok(Self { k, eps })
    }
}

impl Policy for EmpiricalGreedyPolicy {
    fn action_distribution(&self, context: &Context, history: &TargetHistory) -> ActionDistribution {
        let idx = context.one_hot_index();
        let mut sums = vec![0.5; self.k];
        let mut counts = vec![1.0; self.k];
        for entry in history.entries() {
            if entry.context.one_hot_index() == idx {
                sums[entry.action] += entry.reward;
                counts[entry.action] += 1.0;
            }
        }
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
        eps_greedy_distribution(argmax_lowest(&means), self.k, self.eps)
    }
}

/// The periodically retrained classifier policy.
///
/// The model in force at history length `n` is trained on the seed examples
/// plus the first `period·floor(min(n, horizon)/period)` accepted triples;
/// triple `(x, a, r)` enters only class `a`'s dataset, with logistic target
/// `r`. Within a period the model is constant, and past `horizon` it is
/// frozen for good. Exploration stays ε-greedy throughout.
///
/// Models are cached per (prefix length, prefix fingerprint), which makes
/// repeated evaluator queries cheap while keeping the policy a pure function
/// of `(context, history)`.
pub struct AdaptivePolicy {
    seed_examples: Vec<LabeledExample>,
    k: usize,
    period: usize,
    horizon: usize,
    eps: f64,
    config: LearnerConfig,
    cache: Mutex<HashMap<(usize, u64), Arc<LinearModel>>>,
}

impl AdaptivePolicy {
    pub fn new(
        seed_examples: Vec<LabeledExample>,
        k: usize,
        period: usize,
        horizon: usize,
        eps: f64,
        config: LearnerConfig,
    ) -> Result<Self> {
        if seed_examples.is_empty() {
            return Err(Error::NoData);
        }
        if period == 0 {
            return Err(Error::invalid_argument("period must be at least 1"));
        }
        if horizon < period {
            return Err(Error::invalid_argument(
                "horizon must be at least one period",
            ));
        }
        validate_eps(eps)?;
        config.validate()?;
        if k == 0 {
            return Err(Error::invalid_argument("need at least one class"));
        }
        Ok(Self {
            seed_examples,
            k,
            period,
            horizon,
            eps,
            config,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Length of the history prefix the model at history length `n` was
    /// trained on.
    fn prefix_len(&self, n: usize) -> usize {
        (n.min(self.horizon) / self.period) * self.period
    }

    /// FNV-1a over the prefix. The cache key only needs to separate the
    /// distinct histories one process ever sees, and this runs on the
    /// evaluator's innermost loop, where SipHash is measurably too slow.
    fn fingerprint(history: &TargetHistory, len: usize) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut word = |w: u64| h = (h ^ w).wrapping_mul(PRIME);
        for entry in &history.entries()[..len] {
            word(entry.action as u64);
            word(entry.reward.to_bits());
            for (id, v) in entry.context.iter() {
                word(id as u64);
                word(v.to_bits());
            }
        }
        h
    }

    fn train_on_prefix(&self, history: &TargetHistory, len: usize) -> Arc<LinearModel> {
        let prefix = &history.entries()[..len];
        let dim = logistic::dimension_of(
            self.seed_examples
                .iter()
                .map(|e| &e.context)
                .chain(prefix.iter().map(|e| &e.context)),
        );
        let mut per_class: Vec<Vec<BinaryExample<'_>>> = vec![Vec::new(); self.k];
        for (a, class) in per_class.iter_mut().enumerate() {
            for e in &self.seed_examples {
                class.push(BinaryExample {
                    context: &e.context,
                    target: if e.has_label(a) { 1.0 } else { 0.0 },
                    weight: e.weight,
                });
            }
        }
        for entry in prefix {
            per_class[entry.action].push(BinaryExample {
                context: &entry.context,
                target: entry.reward,
                weight: 1.0,
            });
        }
        let model = logistic::train_logistic_partial(
            &per_class,
            dim,
            self.seed_examples.len() + len,
            &self.config,
        )
        .expect("validated at construction");
        Arc::new(model)
    }

    fn model_for(&self, history: &TargetHistory) -> Arc<LinearModel> {
        let len = self.prefix_len(history.len());
        let key = (len, Self::fingerprint(history, len));
        if let Some(model) = self
            .cache
            .lock()
            .expect("adaptive policy cache poisoned")
            .get(&key)
        {
            return model.clone();
        }
        // Train outside the lock; a racing duplicate computes the same model.
        let model = self.train_on_prefix(history, len);
        self.cache
            .lock()
            .expect("adaptive policy cache poisoned")
            .entry(key)
            .or_insert(model)
            .clone()
    }
}

impl Policy for AdaptivePolicy {
    fn action_distribution(&self, context: &Context, history: &TargetHistory) -> ActionDistribution {
        let model = self.model_for(history);
        eps_greedy_distribution(model.best_action(context), self.k, self.eps)
    }
}
