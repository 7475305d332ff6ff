//! Data sources and file formats.
//!
//! Three ways events come into existence:
//!
//! * **Supervised conversion** — a multi-label classification dataset is
//!   turned into bandit events: per example, per-action scores
//!   `s_a ~ U[0.1, 1]` define the logging distribution
//!   `μ(a|x) = 0.3·s_a/Σs + 0.7·I(a ∈ c)/|c|`, an action is sampled from it,
//!   and the reward is `I(a ∈ c)`. Correct labels get boosted logging mass,
//!   and every action keeps strictly positive probability.
//! * **Tiny worlds** — fully specified discrete distributions (≤ 8 contexts,
//!   ≤ 4 actions, Bernoulli rewards) small enough for the oracle to
//!   enumerate exactly. Sampling from one produces i.i.d. logs.
//! * **Synthetic multi-label generation** — a seeded generator of noisy
//!   linearly separable multi-label data, so the full pipeline runs without
//!   any external dataset.
//!
//! File formats: events are JSON-lines (`{"x": {id: value…}, "a": …,
//! "r": …, "p": …}` per line); supervised input is svmlight-style sparse
//! multilabel text. Feature ids are kept exactly as written — they are
//! opaque keys to every consumer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{LabeledExample, TablePolicy, TableRewardEstimator};
use crate::rng::UniformStream;
use crate::types::{Context, ExplorationEvent, Policy, TargetHistory};

// ── Supervised datasets ─────────────────────────────────────────────────

/// A multi-label dataset with a declared class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedDataset {
    pub examples: Vec<LabeledExample>,
    pub k: usize,
}

impl SupervisedDataset {
    pub fn new(examples: Vec<LabeledExample>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid_argument(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if let Some(bad) = examples
            .iter()
            .flat_map(|e| e.labels.iter())
            .find(|&&l| l >= k)
        {
            return Err(Error::invalid_argument(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        Ok(Self { examples, k })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn max_feature_id(&self) -> Option<u32> {
        self.examples
            .iter()
            .filter_map(|e| e.context.max_feature_id())
            .max()
    }
}

// ── Tiny enumerable worlds ──────────────────────────────────────────────

/// Hard size limits that keep exhaustive enumeration cheap.
pub const MAX_WORLD_CONTEXTS: usize = 8;
pub const MAX_WORLD_ACTIONS: usize = 4;

/// A fully specified discrete contextual bandit: context marginal `D(x)`,
/// Bernoulli reward table `P(r=1|x,a)`, and a stationary logging policy
/// `μ(a|x)` with strictly positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyWorld {
    /// `D(x)` per context; contexts are the one-hot vectors `e_0, e_1, …`.
    pub contexts: Vec<f64>,
    /// `P(r = 1 | x, a)`, one row per context.
    pub rewards: Vec<Vec<f64>>,
    /// `μ(a | x)`, one row per context, all entries > 0.
    pub logging: Vec<Vec<f64>>,
}

const SUM_TOL: f64 = 1e-9;

impl TinyWorld {
    pub fn new(contexts: Vec<f64>, rewards: Vec<Vec<f64>>, logging: Vec<Vec<f64>>) -> Result<Self> {
        let world = Self {
            contexts,
            rewards,
            logging,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.contexts.len();
        if nx == 0 || nx > MAX_WORLD_CONTEXTS {
            return Err(Error::invalid_argument(format!(
                "world must have 1..={MAX_WORLD_CONTEXTS} contexts, got {nx}"
            )));
        }
        if self.contexts.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid_argument("negative context probability"));
        }
        let csum: f64 = self.contexts.iter().sum();
        if (csum - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid_argument(format!(
                "context probabilities sum to {csum}"
            )));
        }
        if self.rewards.len() != nx || self.logging.len() != nx {
            return Err(Error::invalid_argument(
                "reward/logging tables must have one row per context",
            ));
        }
        let k = self.rewards[0].len();
        if k == 0 || k > MAX_WORLD_ACTIONS {
            return Err(Error::invalid_argument(format!(
                "world must have 1..={MAX_WORLD_ACTIONS} actions, got {k}"
            )));
        }
        for (row_r, row_mu) in self.rewards.iter().zip(&self.logging) {
            if row_r.len() != k || row_mu.len() != k {
                return Err(Error::invalid_argument("ragged world tables"));
            }
            if row_r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid_argument(
                    "reward probabilities must lie in [0, 1]",
                ));
            }
            if row_mu.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::invalid_argument(
                    "logging probabilities must be strictly positive",
                ));
            }
            let msum: f64 = row_mu.iter().sum();
            if (msum - 1.0).abs() > SUM_TOL {
                return Err(Error::invalid_argument(format!(
                    "logging row sums to {msum}"
                )));
            }
        }
        Ok(())
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rewards[0].len()
    }

    /// The `i`-th context as a one-hot vector.
    pub fn context(&self, i: usize) -> Context {
        Context::one_hot(i as u32)
    }

    /// The logging table as a stationary [`TablePolicy`].
    pub fn logging_policy(&self) -> TablePolicy {
        TablePolicy::new(self.logging.clone()).expect("validated world")
    }

    /// The exact conditional mean reward as an estimator — the ideal `r̂`.
    pub fn exact_reward_estimator(&self) -> TableRewardEstimator {
        TableRewardEstimator::new(self.rewards.clone()).expect("validated world")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let world: TinyWorld = serde_json::from_str(json)?;
        world.validate()?;
        Ok(world)
    }

    pub fn save_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_from(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Sample `n` i.i.d. events from the world under its own logging table.
///
/// Per event, three draws in order: context, action, reward.
pub fn sample_world_log(world: &TinyWorld, n: usize, seed: u64) -> Vec<ExplorationEvent> {
    let mut stream = UniformStream::new(seed);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let x = stream.next_weighted(&world.contexts);
        let a = stream.next_weighted(&world.logging[x]);
        let r = if stream.next_f64() < world.rewards[x][a] {
            1.0
        } else {
            0.0
        };
        events.push(
            ExplorationEvent::new(world.context(x), a, r, world.logging[x][a])
                .expect("validated world"),
        );
    }
    events
}

/// Sample under a caller-supplied stationary logging policy instead of the
/// world's table. The policy is consulted with an empty history; its logged
/// propensity must be positive on any action it can emit (guaranteed since
/// zero-probability actions are never drawn).
pub fn sample_world_log_with<P: Policy + ?Sized>(
    world: &TinyWorld,
    n: usize,
    logging: &P,
    seed: u64,
) -> Vec<ExplorationEvent> {
    let mut stream = UniformStream::new(seed);
    let empty = TargetHistory::new();
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let x = stream.next_weighted(&world.contexts);
        let context = world.context(x);
        let dist = logging.action_distribution(&context, &empty);
        let a = stream.next_weighted(dist.probs());
        let r = if stream.next_f64() < world.rewards[x][a] {
            1.0
        } else {
            0.0
        };
        events.push(
            ExplorationEvent::new(context, a, r, dist.prob(a)).expect("positive propensity"),
        );
    }
    events
}

// ── Supervised → bandit conversion ──────────────────────────────────────

/// The conversion logging distribution for one example:
/// `μ(a) = 0.3·s_a/Σs + 0.7·I(a ∈ labels)/|labels|`.
pub(crate) fn conversion_distribution(scores: &[f64], labels: &[usize]) -> Vec<f64> {
    let score_sum: f64 = scores.iter().sum();
    let boost = 0.7 / labels.len() as f64;
    scores
        .iter()
        .enumerate()
        .map(|(a, &s)| {
            let mut p = 0.3 * s / score_sum;
            if labels.contains(&a) {
                p += boost;
            }
            p
        })
        .collect()
}

/// Turn a fully labeled dataset into one pass of logged bandit events.
///
/// Per example: draw `s_a ~ U[0.1, 1]` for each action (K draws), form the
/// conversion distribution, sample the logged action (1 draw), emit
/// `(x, a, r = I(a ∈ c), p = μ(a|x))`.
pub fn convert_supervised(dataset: &SupervisedDataset, seed: u64) -> Result<Vec<ExplorationEvent>> {
    let mut stream = UniformStream::new(seed);
    let mut events = Vec::with_capacity(dataset.len());
    for (i, example) in dataset.examples.iter().enumerate() {
        if example.labels.is_empty() {
            return Err(Error::invalid_argument(format!(
                "example {i} has no labels; conversion divides by |c|"
            )));
        }
        let scores: Vec<f64> = (0..dataset.k)
            .map(|_| stream.next_range(0.1, 1.0))
            .collect();
        let mu = conversion_distribution(&scores, &example.labels);
        let a = stream.next_weighted(&mu);
        let r = if example.has_label(a) { 1.0 } else { 0.0 };
        events.push(ExplorationEvent::new(example.context.clone(), a, r, mu[a])?);
    }
    Ok(events)
}

// ── Splits ──────────────────────────────────────────────────────────────

/// Disjoint random splits with sizes `floor(fraction · n)`, assigned from a
/// seeded shuffle. Leftover examples (rounding, or fractions summing below
/// 1) are discarded.
pub fn split_dataset(
    dataset: &SupervisedDataset,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<SupervisedDataset>> {
    if fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::invalid_argument("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::invalid_argument(format!(
            "split fractions sum to {total} > 1"
        )));
    }
    let counts: Vec<usize> = fractions
        .iter()
        .map(|f| (f * dataset.len() as f64).floor() as usize)
        .collect();
    split_dataset_counts(dataset, &counts, seed)
}

/// Disjoint random splits with exact sizes.
pub fn split_dataset_counts(
    dataset: &SupervisedDataset,
    counts: &[usize],
    seed: u64,
) -> Result<Vec<SupervisedDataset>> {
    let needed: usize = counts.iter().sum();
    if needed > dataset.len() {
        return Err(Error::InsufficientData {
            needed,
            got: dataset.len(),
        });
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut stream = UniformStream::new(seed);
    stream.shuffle(&mut indices);
    let mut splits = Vec::with_capacity(counts.len());
    let mut cursor = 0usize;
    for &count in counts {
        let part: Vec<LabeledExample> = indices[cursor..cursor + count]
            .iter()
            .map(|&i| dataset.examples[i].clone())
            .collect();
        cursor += count;
        splits.push(SupervisedDataset {
            examples: part,
            k: dataset.k,
        });
    }
    Ok(splits)
}

// ── svmlight-style multilabel input ─────────────────────────────────────

/// Parsed multilabel file plus load diagnostics.
#[derive(Debug)]
pub struct MultilabelFile {
    pub dataset: SupervisedDataset,
    /// Examples dropped because they carried no labels.
    pub dropped_empty: usize,
}

/// Parse svmlight-style sparse multilabel text: per line, a comma-separated
/// label list followed by whitespace-separated `id:value` features. Feature
/// ids are used verbatim. Lines without a label field (first token already
/// an `id:value` pair) are dropped and counted. `k` declares the class
/// count; with `None` it becomes `max label + 1`.
pub fn read_multilabel<R: BufRead>(reader: R, k: Option<usize>) -> Result<MultilabelFile> {
    let mut examples = Vec::new();
    let mut dropped_empty = 0usize;
    let mut max_label = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().expect("nonblank line has a token");
        let (labels, feature_tokens): (Vec<usize>, Vec<&str>) = if first.contains(':') {
            // No label field at all — a valid but unlabeled example.
            (Vec::new(), std::iter::once(first).chain(tokens).collect())
        } else {
            let labels = first
                .split(',')
                .map(|tok| {
                    tok.parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno,
                        message: format!("bad label {tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            (labels, tokens.collect())
        };
        if labels.is_empty() {
            dropped_empty += 1;
            continue;
        }
        let mut features = std::collections::BTreeMap::new();
        for tok in feature_tokens {
            let (id_str, value_str) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected id:value, got {tok:?}"),
            })?;
            let id: u32 = id_str.parse().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad feature id {id_str:?}: {e}"),
            })?;
            let value: f64 = value_str.parse().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad feature value {value_str:?}: {e}"),
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidRecord {
                    line: lineno,
                    message: format!("non-finite feature value {value}"),
                });
            }
            if features.insert(id, value).is_some() {
                return Err(Error::InvalidRecord {
                    line: lineno,
                    message: format!("duplicate feature id {id}"),
                });
            }
        }
        if let Some(limit) = k {
            if let Some(&bad) = labels.iter().find(|&&l| l >= limit) {
                return Err(Error::InvalidRecord {
                    line: lineno,
                    message: format!("label {bad} out of range for {limit} classes"),
                });
            }
        }
        max_label = max_label.max(*labels.iter().max().expect("labels nonempty"));
        let context = Context::sparse(features.into_iter().collect());
        examples.push(LabeledExample::new(context, labels, 1.0)?);
    }
    if examples.is_empty() {
        return Err(Error::NoData);
    }
    let k = k.unwrap_or(max_label + 1).max(2);
    Ok(MultilabelFile {
        dataset: SupervisedDataset::new(examples, k)?,
        dropped_empty,
    })
}

pub fn read_multilabel_path(path: &Path, k: Option<usize>) -> Result<MultilabelFile> {
    read_multilabel(BufReader::new(File::open(path)?), k)
}

// ── Event log I/O ───────────────────────────────────────────────────────

/// Write events as JSON-lines. Floats use the shortest decimal rendering
/// that round-trips exactly, so write → read is lossless.
pub fn write_events<W: Write>(mut writer: W, events: &[ExplorationEvent]) -> Result<()> {
    for event in events {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_events_path(path: &Path, events: &[ExplorationEvent]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_events(&mut writer, events)?;
    writer.flush()?;
    Ok(())
}

/// Read a JSON-lines event log, validating every record. Errors carry the
/// 1-based line number.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<ExplorationEvent>> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: ExplorationEvent =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        event.validate().map_err(|e| Error::InvalidRecord {
            line: lineno,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    if events.is_empty() {
        return Err(Error::NoData);
    }
    Ok(events)
}

pub fn read_events_path(path: &Path) -> Result<Vec<ExplorationEvent>> {
    read_events(BufReader::new(File::open(path)?))
}

// ── Synthetic multilabel data ───────────────────────────────────────────

/// Knobs of the synthetic multi-label generator.
///
/// Each example picks a primary class, places a unit spike on that class's
/// coordinate over a bed of uniform noise, and labels it with the primary
/// class — except that with probability `label_flip` the label is replaced
/// by a uniformly random class (irreducible error that any learned `r̂`
/// carries into evaluation), and with probability `extra_label` a second
/// distinct label is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_examples: usize,
    pub k: usize,
    pub dim: usize,
    pub noise: f64,
    pub label_flip: f64,
    pub extra_label: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_examples: 2000,
            k: 4,
            dim: 12,
            noise: 0.6,
            label_flip: 0.25,
            extra_label: 0.15,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_examples == 0 {
            return Err(Error::invalid_argument("num_examples must be positive"));
        }
        if self.k < 2 {
            return Err(Error::invalid_argument("need at least 2 classes"));
        }
        if self.dim < self.k {
            return Err(Error::invalid_argument(
                "dim must be at least the class count",
            ));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid_argument("noise must be nonnegative"));
        }
        for (name, p) in [("label_flip", self.label_flip), ("extra_label", self.extra_label)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid_argument(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Generate a seeded synthetic multilabel dataset per [`SyntheticConfig`].
pub fn generate_synthetic_multilabel(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<SupervisedDataset> {
    config.validate()?;
    let mut stream = UniformStream::new(seed);
    let mut examples = Vec::with_capacity(config.num_examples);
    for _ in 0..config.num_examples {
        let primary = stream.next_index(config.k);
        let mut x = vec![0.0; config.dim];
        for v in x.iter_mut() {
            *v = config.noise * stream.next_f64();
        }
        x[primary] += 1.0;
        let mut label = primary;
        if stream.next_f64() < config.label_flip {
            label = stream.next_index(config.k);
        }
        let mut labels = vec![label];
        if stream.next_f64() < config.extra_label {
            let extra = stream.next_index(config.k);
            if extra != label {
                labels.push(extra);
            }
        }
        labels.sort_unstable();
        examples.push(LabeledExample::new(Context::dense(&x), labels, 1.0)?);
    }
    SupervisedDataset::new(examples, config.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn w1() -> TinyWorld {
        TinyWorld::new(
            vec![0.6, 0.4],
            vec![vec![0.9, 0.2], vec![0.3, 0.7]],
            vec![vec![0.5, 0.5], vec![0.4, 0.6]],
        )
        .unwrap()
    }

    #[test]
    fn world_validation() {
        assert!(w1().validate().is_ok());
        // zero logging mass
        assert!(TinyWorld::new(vec![1.0], vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]]).is_err());
        // context probabilities off
        assert!(TinyWorld::new(vec![0.7, 0.4], vec![vec![0.5]; 2], vec![vec![1.0]; 2]).is_err());
        // reward out of range
        assert!(TinyWorld::new(vec![1.0], vec![vec![1.5]], vec![vec![1.0]]).is_err());
        // ragged
        assert!(TinyWorld::new(vec![1.0], vec![vec![0.5, 0.5]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn world_json_round_trip() {
        let world = w1();
        let back = TinyWorld::from_json(&world.to_json()).unwrap();
        assert_eq!(back, world);
    }

    #[test]
    fn degenerate_world_sampling() {
        let world = TinyWorld::new(vec![1.0], vec![vec![1.0]], vec![vec![1.0]]).unwrap();
        for e in sample_world_log(&world, 20, 3) {
            assert_eq!(e.action, 0);
            assert_eq!(e.reward, 1.0);
            assert_eq!(e.propensity, 1.0);
            assert_eq!(e.context, Context::one_hot(0));
        }
    }

    #[test]
    fn sampled_propensities_match_table() {
        let world = w1();
        for e in sample_world_log(&world, 500, 9) {
            let x = e.context.one_hot_index();
            assert_eq!(e.propensity, world.logging[x][e.action]);
        }
    }

    #[test]
    fn action_frequencies_concentrate() {
        let world = w1();
        let n = 100_000;
        let events = sample_world_log(&world, n, 42);
        let mut counts = vec![vec![0usize; 2]; 2];
        let mut ctx_counts = vec![0usize; 2];
        for e in &events {
            let x = e.context.one_hot_index();
            ctx_counts[x] += 1;
            counts[x][e.action] += 1;
        }
        for x in 0..2 {
            let nx = ctx_counts[x] as f64;
            for a in 0..2 {
                let mu = world.logging[x][a];
                let freq = counts[x][a] as f64 / nx;
                let bound = 3.0 * (mu * (1.0 - mu) / nx).sqrt();
                assert!(
                    (freq - mu).abs() <= bound,
                    "freq {freq} vs mu {mu} at x={x}, a={a}"
                );
            }
        }
    }

    #[test]
    fn custom_logging_policy_sampling() {
        let world = w1();
        let logging = TablePolicy::new(vec![vec![0.25, 0.75], vec![0.9, 0.1]]).unwrap();
        for e in sample_world_log_with(&world, 300, &logging, 5) {
            let x = e.context.one_hot_index();
            let expected = if x == 0 {
                [0.25, 0.75][e.action]
            } else {
                [0.9, 0.1][e.action]
            };
            assert_eq!(e.propensity, expected);
        }
    }

    #[test]
    fn conversion_distribution_equal_scores() {
        let mu = conversion_distribution(&[0.4; 4], &[0]);
        let expected = [0.775, 0.075, 0.075, 0.075];
        for (got, want) in mu.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        // Correct labels always beat incorrect ones under equal scores.
        assert!(mu[0] > mu[1]);
    }

    fn toy_dataset(n: usize) -> SupervisedDataset {
        let examples = (0..n)
            .map(|i| {
                LabeledExample::new(
                    Context::dense(&[i as f64 / n as f64, 1.0]),
                    vec![i % 3],
                    1.0,
                )
                .unwrap()
            })
            .collect();
        SupervisedDataset::new(examples, 3).unwrap()
    }

    #[test]
    fn conversion_propensities_are_valid() {
        let dataset = toy_dataset(500);
        let events = convert_supervised(&dataset, 7).unwrap();
        assert_eq!(events.len(), 500);
        let floor = 0.3 * 0.1 / (0.1 + (dataset.k - 1) as f64);
        for (e, ex) in events.iter().zip(&dataset.examples) {
            assert!(e.propensity > floor);
            assert_eq!(e.reward, if ex.has_label(e.action) { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn conversion_rows_sum_to_one() {
        let mut stream = UniformStream::new(77);
        for labels in [vec![0], vec![1, 3], vec![0, 1, 2, 3]] {
            let scores: Vec<f64> = (0..4).map(|_| stream.next_range(0.1, 1.0)).collect();
            let mu = conversion_distribution(&scores, &labels);
            assert!((mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(mu.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn conversion_is_deterministic() {
        let dataset = toy_dataset(100);
        let a = convert_supervised(&dataset, 11).unwrap();
        let b = convert_supervised(&dataset, 11).unwrap();
        assert_eq!(a, b);
        let c = convert_supervised(&dataset, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn conversion_rejects_unlabeled() {
        let examples = vec![LabeledExample::new(Context::dense(&[1.0]), vec![], 1.0).unwrap()];
        let dataset = SupervisedDataset { examples, k: 2 };
        assert!(convert_supervised(&dataset, 0).is_err());
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let dataset = toy_dataset(200);
        let splits = split_dataset(&dataset, &[0.5, 0.5], 3).unwrap();
        assert_eq!(splits[0].len(), 100);
        assert_eq!(splits[1].len(), 100);

        let splits = split_dataset(&dataset, &[0.1, 0.5], 3).unwrap();
        assert_eq!(splits[0].len(), 20);
        assert_eq!(splits[1].len(), 100);
        // Same seed → same assignment; membership is disjoint.
        let again = split_dataset(&dataset, &[0.1, 0.5], 3).unwrap();
        assert_eq!(splits[0], again[0]);
        for e in &splits[0].examples {
            assert!(!splits[1].examples.contains(e));
        }

        assert!(split_dataset(&dataset, &[0.8, 0.4], 3).is_err());
        assert!(split_dataset(&dataset, &[0.0, 0.5], 3).is_err());

        let counted = split_dataset_counts(&dataset, &[40, 150], 9).unwrap();
        assert_eq!(counted[0].len(), 40);
        assert_eq!(counted[1].len(), 150);
        assert!(split_dataset_counts(&dataset, &[150, 150], 9).is_err());
    }

    #[test]
    fn multilabel_format_example() {
        let file = read_multilabel(Cursor::new("0,2 1:0.5 7:1.0\n"), None).unwrap();
        let e = &file.dataset.examples[0];
        assert_eq!(e.labels, vec![0, 2]);
        assert_eq!(e.context.get(1), 0.5);
        assert_eq!(e.context.get(7), 1.0);
        assert_eq!(e.context.iter().count(), 2);
        assert_eq!(file.dataset.k, 3);
        assert_eq!(file.dropped_empty, 0);
    }

    #[test]
    fn multilabel_drops_unlabeled_lines() {
        let text = "0 1:1.0\n2:0.5 3:0.5\n1 2:1.0\n";
        let file = read_multilabel(Cursor::new(text), Some(2)).unwrap();
        assert_eq!(file.dataset.len(), 2);
        assert_eq!(file.dropped_empty, 1);
    }

    #[test]
    fn multilabel_errors_carry_line_numbers() {
        let err = read_multilabel(Cursor::new("0 1:0.5\nx 1:0.5\n"), None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let err = read_multilabel(Cursor::new("0 1:0.5 1:0.7\n"), None).unwrap_err();
        match err {
            Error::InvalidRecord { line, .. } => assert_eq!(line, 1),
            other => panic!("expected record error, got {other:?}"),
        }
        let err = read_multilabel(Cursor::new("5 1:0.5\n"), Some(4)).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { line: 1, .. }));
    }

    #[test]
    fn events_round_trip() {
        let world = w1();
        let events = sample_world_log(&world, 1000, 13);
        let mut buffer = Vec::new();
        write_events(&mut buffer, &events).unwrap();
        let back = read_events(Cursor::new(buffer)).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn event_read_rejects_bad_records() {
        let good = r#"{"x":{"0":1.0},"a":0,"r":1.0,"p":0.5}"#;
        let zero_p = r#"{"x":{"0":1.0},"a":0,"r":1.0,"p":0.0}"#;
        let text = format!("{good}\n{zero_p}\n");
        let err = read_events(Cursor::new(text)).unwrap_err();
        match err {
            Error::InvalidRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("expected record error, got {other:?}"),
        }
        let err = read_events(Cursor::new("not json\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn synthetic_generator_shapes() {
        let config = SyntheticConfig {
            num_examples: 300,
            ..SyntheticConfig::default()
        };
        let dataset = generate_synthetic_multilabel(&config, 21).unwrap();
        assert_eq!(dataset.len(), 300);
        assert_eq!(dataset.k, config.k);
        for e in &dataset.examples {
            assert!(!e.labels.is_empty() && e.labels.len() <= 2);
            assert!(e.labels.iter().all(|&l| l < config.k));
        }
        let again = generate_synthetic_multilabel(&config, 21).unwrap();
        assert_eq!(dataset, again);
    }

    #[test]
    fn synthetic_data_is_learnable_but_noisy() {
        let config = SyntheticConfig {
            num_examples: 600,
            ..SyntheticConfig::default()
        };
        let dataset = generate_synthetic_multilabel(&config, 33).unwrap();
        let model = crate::policies::train_logistic_ova(
            &dataset.examples,
            dataset.k,
            &crate::policies::LearnerConfig {
                iterations: 120,
                ..Default::default()
            },
        )
        .unwrap();
        let hits = dataset
            .examples
            .iter()
            .filter(|e| e.has_label(model.best_action(&e.context)))
            .count();
        let accuracy = hits as f64 / dataset.len() as f64;
        // Far above the 1/K chance floor, well below perfect: the label
        // noise must leave something for DR to correct.
        assert!(accuracy > 0.5, "accuracy {accuracy} too low");
        assert!(accuracy < 0.95, "accuracy {accuracy} suspiciously perfect");
    }
}
