//! Experiment orchestration: the static and adaptive evaluation protocols,
//! trial statistics, and report rendering.
//!
//! Both protocols follow the same skeleton: fix the dataset splits and the
//! target policy once from the base seed, compute a ground-truth loss, then
//! regenerate the partially labeled evaluation stream independently per
//! trial and run every configured evaluator on it. Per-trial seeds are
//! `base + trial_index`, so any trial's results are independent of how many
//! trials run. Trials execute on a rayon pool (capped by
//! `BANDIT_OPE_THREADS`) and merge in trial-index order; floating-point
//! reductions are all sequential, so reports are byte-identical no matter
//! the thread count.
//!
//! Estimates and ground truth are reported as losses (`1 − value`): the
//! classification tasks score an action as correct (reward 1) when it is
//! one of the example's labels.

pub mod cli;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    convert_supervised, generate_synthetic_multilabel, read_multilabel_path, split_dataset_counts,
    SupervisedDataset, SyntheticConfig, TinyWorld,
};
use crate::error::{Error, Result};
use crate::evaluators::{
    dm_evaluate, dr_evaluate, drns_evaluate_with, ips_evaluate, min_propensity, rs_evaluate_with,
    wc_evaluate_with, EvalOptions, EvalResult,
};
use crate::oracle::{
    bias_experiment, coverage_experiment, random_history, verify_lemmas, BiasReport,
    CoverageReport, LemmaReport, LemmaState,
};
use crate::policies::{
    train_logistic_ova, train_logistic_partial, AdaptivePolicy, BinaryExample, EpsGreedyPolicy,
    LearnerConfig, LinearModel, ModelRewardEstimator, TablePolicy,
};
use crate::rng::{derive_seed, UniformStream};
use crate::types::{
    ActionDistribution, Context, ExplorationEvent, HistoryEntry, Policy, RewardEstimator,
    TargetHistory,
};

/// ε of every ε-greedy policy built by the harness.
const POLICY_EPS: f64 = 0.1;

/// Bootstrap resamples behind each rmse confidence interval.
const BOOTSTRAP_RESAMPLES: usize = 10_000;

// Stream labels for seed derivation. Trial-level stages hang off
// `base + trial`, experiment-level stages off the base seed itself.
const STAGE_SPLIT: u64 = 1;
const STAGE_CONVERT: u64 = 2;
const STAGE_SHUFFLE: u64 = 3;
const STAGE_TRUTH: u64 = 4;
const STAGE_EVAL: u64 = 100;
const STAGE_BOOTSTRAP: u64 = 200;
const STAGE_DIAG: u64 = 300;

// ── Configuration ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Static,
    Adaptive,
    TinyworldDiagnostic,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Static => "static",
            TaskKind::Adaptive => "adaptive",
            TaskKind::TinyworldDiagnostic => "tinyworld-diagnostic",
        })
    }
}

/// Where the task's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// svmlight-style multilabel text file.
    File {
        path: PathBuf,
        /// Number of classes; default: largest label in the file + 1.
        #[serde(default)]
        classes: Option<usize>,
    },
    /// Generated multilabel data.
    Synthetic {
        seed: u64,
        #[serde(flatten)]
        config: SyntheticConfig,
    },
    /// A serialized [`TinyWorld`]; only valid for the diagnostic task.
    World { path: PathBuf },
}

/// One evaluator to run each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorSpec {
    /// Report label; defaults to a name derived from the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: EvaluatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "evaluator", rename_all = "snake_case")]
pub enum EvaluatorKind {
    Dm,
    Ips,
    Dr,
    /// Plain rejection sampling; `c` defaults to the minimum propensity of
    /// its input stream.
    Rs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    /// Constant worst-case cap; same default as RS.
    Wc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    Drns {
        q: f64,
        #[serde(default = "default_c_max")]
        c_max: f64,
    },
}

fn default_c_max() -> f64 {
    1.0
}

impl EvaluatorSpec {
    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match &self.kind {
            EvaluatorKind::Dm => "DM".to_string(),
            EvaluatorKind::Ips => "IPS".to_string(),
            EvaluatorKind::Dr => "DR".to_string(),
            EvaluatorKind::Rs { .. } => "RS".to_string(),
            EvaluatorKind::Wc { .. } => "WC".to_string(),
            EvaluatorKind::Drns { q, .. } => format!("DR-ns(q={q})"),
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            EvaluatorKind::Rs { c } | EvaluatorKind::Wc { c } => {
                if let Some(c) = c {
                    if !(c > 0.0 && c <= 1.0) {
                        return Err(Error::config(format!("cap c must be in (0, 1], got {c}")));
                    }
                }
            }
            EvaluatorKind::Drns { q, c_max } => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::config(format!("quantile q must be in [0, 1], got {q}")));
                }
                if !(c_max > 0.0 && c_max <= 1.0) {
                    return Err(Error::config(format!(
                        "c_max must be in (0, 1], got {c_max}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Dataset split fractions. `policy_fraction` is the static task's fully
/// labeled π₀ training share; `eval_fraction` feeds both tasks' evaluation
/// stream; `truth_fraction` is the adaptive task's held-out simulation
/// share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub policy_fraction: f64,
    pub eval_fraction: f64,
    pub truth_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            policy_fraction: 0.1,
            eval_fraction: 0.5,
            truth_fraction: 0.19,
        }
    }
}

/// Adaptive-task parameters: the fixed fully labeled seed set, the retrain
/// period, the online horizon, and the ground-truth simulation count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub seed_count: usize,
    pub period: usize,
    pub horizon: usize,
    pub sims: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            seed_count: 400,
            period: 15,
            horizon: 300,
            sims: 2000,
        }
    }
}

/// One oracle check for the diagnostic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum DiagnosticCheck {
    Lemmas {
        #[serde(default = "default_lemma_states")]
        states: usize,
    },
    Bias {
        #[serde(default = "default_bias_blocks")]
        t_blocks: usize,
        #[serde(default = "default_bias_runs")]
        runs: usize,
        #[serde(default = "default_one")]
        q: f64,
        #[serde(default = "default_one")]
        c_max: f64,
    },
    Coverage {
        #[serde(default = "default_coverage_events")]
        events: usize,
        #[serde(default = "default_coverage_runs")]
        runs: usize,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        q: f64,
        #[serde(default = "default_coverage_cap")]
        c_max: f64,
    },
}

fn default_lemma_states() -> usize {
    100
}
fn default_bias_blocks() -> usize {
    2
}
fn default_bias_runs() -> usize {
    2000
}
fn default_one() -> f64 {
    1.0
}
fn default_coverage_events() -> usize {
    300
}
fn default_coverage_runs() -> usize {
    1000
}
fn default_delta() -> f64 {
    0.05
}
fn default_coverage_cap() -> f64 {
    0.5
}

fn default_diagnostic_checks() -> Vec<DiagnosticCheck> {
    vec![DiagnosticCheck::Lemmas {
        states: default_lemma_states(),
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub dataset: DatasetSpec,
    pub evaluators: Vec<EvaluatorSpec>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub splits: SplitConfig,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default = "LearnerConfig::default")]
    pub learner: LearnerConfig,
    #[serde(default = "default_diagnostic_checks")]
    pub diagnostic: Vec<DiagnosticCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.task != TaskKind::TinyworldDiagnostic {
            if self.trials < 2 {
                return Err(Error::config("need at least 2 trials"));
            }
            if self.evaluators.is_empty() {
                return Err(Error::config("no evaluators configured"));
            }
        }
        let mut names = HashSet::new();
        for spec in &self.evaluators {
            spec.validate()?;
            if !names.insert(spec.display_name()) {
                return Err(Error::config(format!(
                    "duplicate evaluator name {:?}",
                    spec.display_name()
                )));
            }
        }
        let s = &self.splits;
        for (label, f) in [
            ("policy_fraction", s.policy_fraction),
            ("eval_fraction", s.eval_fraction),
            ("truth_fraction", s.truth_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config(format!("{label} must be in (0, 1), got {f}")));
            }
        }
        match self.task {
            TaskKind::Static => {
                if s.policy_fraction + s.eval_fraction > 1.0 + 1e-12 {
                    return Err(Error::config("static split fractions exceed the dataset"));
                }
            }
            TaskKind::Adaptive => {
                if s.eval_fraction + s.truth_fraction > 1.0 + 1e-12 {
                    return Err(Error::config("adaptive split fractions exceed the dataset"));
                }
                let a = &self.adaptive;
                if a.seed_count == 0 || a.period == 0 || a.horizon == 0 || a.sims == 0 {
                    return Err(Error::config(
                        "adaptive seed_count, period, horizon, and sims must be positive",
                    ));
                }
            }
            TaskKind::TinyworldDiagnostic => {
                if !matches!(self.dataset, DatasetSpec::World { .. }) {
                    return Err(Error::config("diagnostic task needs a world dataset"));
                }
                if self.diagnostic.is_empty() {
                    return Err(Error::config("no diagnostic checks configured"));
                }
            }
        }
        if self.task != TaskKind::TinyworldDiagnostic
            && matches!(self.dataset, DatasetSpec::World { .. })
        {
            return Err(Error::config(format!(
                "{} task needs a supervised dataset, not a world",
                self.task
            )));
        }
        self.learner.validate()?;
        Ok(())
    }
}

// ── Reports ─────────────────────────────────────────────────────────────

/// One evaluator's outcome in one trial. A `None` estimate is a recorded
/// failure (e.g. rejection sampling that never completed the required
/// trajectory); it is never coerced to a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialCell {
    pub estimate: Option<f64>,
    pub accepted_count: usize,
    pub events_used: usize,
}

/// Aggregate statistics for one evaluator. The stats are `None` when fewer
/// than two trials produced estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub evaluator: String,
    pub trials_used: usize,
    pub failures: usize,
    pub mean_accepted: f64,
    pub mean_estimate: Option<f64>,
    pub rmse: Option<f64>,
    pub rmse_ci: Option<[f64; 2]>,
    pub bias: Option<f64>,
    pub stdev: Option<f64>,
}

/// Full experiment output: the ground truth, per-trial raw cells, and the
/// per-evaluator summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTable {
    pub task: TaskKind,
    pub trials: usize,
    pub seed: u64,
    /// Ground truth as a loss (`1 − value`).
    pub ground_truth: f64,
    pub evaluators: Vec<String>,
    /// `cells[e][t]`: evaluator `e` in trial `t`.
    pub cells: Vec<Vec<TrialCell>>,
    pub summaries: Vec<SummaryRow>,
}

impl TrialTable {
    pub fn summary(&self, evaluator: &str) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| s.evaluator == evaluator)
    }

    /// Schema self-check: shapes agree, failure counts match the `None`
    /// cells, and the reported statistics are mutually consistent
    /// (`rmse² = bias² + stdev²·(n−1)/n` to 1e-9).
    pub fn validate(&self) -> Result<()> {
        let ne = self.evaluators.len();
        if self.cells.len() != ne || self.summaries.len() != ne {
            return Err(Error::config("report shape mismatch"));
        }
        for (e, row) in self.summaries.iter().enumerate() {
            if self.cells[e].len() != self.trials {
                return Err(Error::config("trial count mismatch"));
            }
            if row.evaluator != self.evaluators[e] {
                return Err(Error::config("summary order mismatch"));
            }
            let failures = self.cells[e]
                .iter()
                .filter(|c| c.estimate.is_none())
                .count();
            if failures != row.failures || row.trials_used + failures != self.trials {
                return Err(Error::config(format!(
                    "failure bookkeeping broken for {}",
                    row.evaluator
                )));
            }
            if row.trials_used >= 2 {
                let (Some(rmse), Some(bias), Some(stdev), Some(_)) =
                    (row.rmse, row.bias, row.stdev, row.rmse_ci)
                else {
                    return Err(Error::config(format!(
                        "missing statistics for {}",
                        row.evaluator
                    )));
                };
                let n = row.trials_used as f64;
                let recomposed = bias * bias + stdev * stdev * (n - 1.0) / n;
                if (rmse * rmse - recomposed).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "rmse decomposition off for {}: rmse²={} vs bias²+((n−1)/n)·stdev²={}",
                        row.evaluator,
                        rmse * rmse,
                        recomposed
                    )));
                }
            } else if row.rmse.is_some()
                || row.bias.is_some()
                || row.stdev.is_some()
                || row.rmse_ci.is_some()
            {
                return Err(Error::config(format!(
                    "statistics reported from fewer than two estimates for {}",
                    row.evaluator
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one diagnostic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckOutcome {
    Lemmas(LemmaReport),
    Bias(BiasReport),
    Coverage(CoverageReport),
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        match self {
            CheckOutcome::Lemmas(r) => r.pass,
            CheckOutcome::Bias(r) => r.within_bound && !r.inconclusive,
            CheckOutcome::Coverage(r) => r.pass,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            CheckOutcome::Lemmas(_) => "lemmas",
            CheckOutcome::Bias(_) => "bias",
            CheckOutcome::Coverage(_) => "coverage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub world_contexts: usize,
    pub world_actions: usize,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

/// What an experiment run produces: a trial table for the evaluation
/// tasks, or a check report for the diagnostic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum ExperimentOutcome {
    Table(TrialTable),
    Diagnostic(DiagnosticReport),
}

impl ExperimentOutcome {
    pub fn as_table(&self) -> Option<&TrialTable> {
        match self {
            ExperimentOutcome::Table(t) => Some(t),
            ExperimentOutcome::Diagnostic(_) => None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

// ── Summary statistics ──────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub rmse: f64,
    /// Percentile bootstrap 95% interval for the rmse.
    pub rmse_ci: [f64; 2],
    pub bias: f64,
    pub stdev: f64,
}

/// Compare a set of per-trial estimates against the ground truth:
/// `rmse = √(mean (e−truth)²)`, `bias = |mean − truth|`, `stdev` the sample
/// standard deviation, and a seeded percentile bootstrap
/// ([`BOOTSTRAP_RESAMPLES`] resamples of the squared errors) for the rmse
/// interval.
pub fn summarize(estimates: &[f64], truth: f64, seed: u64) -> Result<SummaryStats> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: estimates.len(),
        });
    }
    let n = estimates.len();
    let n_f = n as f64;
    let mean = estimates.iter().sum::<f64>() / n_f;
    let bias = (mean - truth).abs();
    let sq_errors: Vec<f64> = estimates.iter().map(|e| (e - truth) * (e - truth)).collect();
    let mse = sq_errors.iter().sum::<f64>() / n_f;
    let rmse = mse.sqrt();
    let stdev = (estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n_f - 1.0))
        .sqrt();

    let mut stream = UniformStream::new(seed);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut total = 0.0;
        for _ in 0..n {
            total += sq_errors[stream.next_index(n)];
        }
        boot.push(total / n_f);
    }
    boot.sort_by(|a, b| a.total_cmp(b));
    let rank = |p: f64| (p * (BOOTSTRAP_RESAMPLES - 1) as f64).floor() as usize;
    let rmse_ci = [boot[rank(0.025)].sqrt(), boot[rank(0.975)].sqrt()];

    Ok(SummaryStats {
        mean,
        rmse,
        rmse_ci,
        bias,
        stdev,
    })
}

// ── Experiment execution ────────────────────────────────────────────────

/// Run an experiment on a rayon pool sized by `BANDIT_OPE_THREADS`
/// (default: available parallelism).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let pool = thread_pool()?;
    pool.install(|| match config.task {
        TaskKind::Static => Ok(ExperimentOutcome::Table(run_static_experiment(config)?)),
        TaskKind::Adaptive => Ok(ExperimentOutcome::Table(run_adaptive_experiment(config)?)),
        TaskKind::TinyworldDiagnostic => {
            Ok(ExperimentOutcome::Diagnostic(run_diagnostic(config)?))
        }
    })
}

/// Build the work pool, honoring `BANDIT_OPE_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("BANDIT_OPE_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                Error::config(format!(
                    "BANDIT_OPE_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::config(format!("failed to build thread pool: {e}")))
}

fn load_supervised(spec: &DatasetSpec) -> Result<SupervisedDataset> {
    match spec {
        DatasetSpec::File { path, classes } => {
            Ok(read_multilabel_path(path, *classes)?.dataset)
        }
        DatasetSpec::Synthetic { seed, config } => generate_synthetic_multilabel(config, *seed),
        DatasetSpec::World { .. } => Err(Error::config(
            "this task needs a supervised dataset, not a world",
        )),
    }
}

fn dataset_dim(dataset: &SupervisedDataset) -> usize {
    dataset
        .examples
        .iter()
        .filter_map(|e| e.context.max_feature_id())
        .max()
        .map_or(1, |m| m as usize + 1)
}

fn count_for(fraction: f64, n: usize, label: &str) -> Result<usize> {
    let count = (fraction * n as f64).floor() as usize;
    if count == 0 {
        return Err(Error::config(format!(
            "dataset too small: {label} share of {n} examples is empty"
        )));
    }
    Ok(count)
}

/// Train a reward model on partially labeled events: each event lands only
/// in its chosen action's binary dataset with the observed reward as the
/// target.
fn train_rhat(
    events: &[ExplorationEvent],
    k: usize,
    dim: usize,
    config: &LearnerConfig,
) -> Result<LinearModel> {
    let mut per_class: Vec<Vec<BinaryExample<'_>>> = (0..k).map(|_| Vec::new()).collect();
    for event in events {
        if event.action >= k {
            return Err(Error::config(format!(
                "event action {} outside the {k}-class task",
                event.action
            )));
        }
        per_class[event.action].push(BinaryExample {
            context: &event.context,
            target: event.reward,
            weight: 1.0,
        });
    }
    train_logistic_partial(&per_class, dim, events.len(), config)
}

fn correctness(example: &crate::policies::LabeledExample, action: usize) -> f64 {
    example.labels.contains(&action) as u8 as f64
}

/// Restart the wrapped policy every `horizon` accepted steps: the inner
/// policy only ever sees the current trajectory's slice of the history.
/// This is how a single exploration stream yields many simulated online
/// runs of a fixed length instead of one ever-growing run.
struct EpisodicPolicy<'a> {
    inner: &'a dyn Policy,
    horizon: usize,
}

impl Policy for EpisodicPolicy<'_> {
    fn action_distribution(&self, context: &Context, history: &TargetHistory) -> ActionDistribution {
        let step = history.len() % self.horizon;
        self.inner.action_distribution(context, &history.suffix(step))
    }
}

/// Run one configured evaluator on one trial's data. With `horizon` set
/// (adaptive task) the target restarts every `horizon` accepted steps and an
/// evaluator that cannot fill even one trajectory becomes a failure cell.
fn run_one_evaluator(
    spec: &EvaluatorSpec,
    policy: &dyn Policy,
    rhat: &dyn RewardEstimator,
    full: &[ExplorationEvent],
    half: &[ExplorationEvent],
    seed: u64,
    horizon: Option<usize>,
) -> Result<TrialCell> {
    let episodic;
    let target: &dyn Policy = match horizon {
        Some(h) => {
            episodic = EpisodicPolicy { inner: policy, horizon: h };
            &episodic
        }
        None => policy,
    };
    let plain_cell = |value: Result<f64>, n: usize| {
        value.map(|v| TrialCell {
            estimate: Some(1.0 - v),
            accepted_count: n,
            events_used: n,
        })
    };
    let sampled_cell = |result: Result<EvalResult>, events_len: usize| match result {
        Ok(r) => {
            let complete = horizon.is_none_or(|need| r.accepted_count >= need);
            Ok(TrialCell {
                estimate: complete.then(|| 1.0 - r.estimate),
                accepted_count: r.accepted_count,
                events_used: r.events_used,
            })
        }
        Err(Error::NoAcceptedSamples) => Ok(TrialCell {
            estimate: None,
            accepted_count: 0,
            events_used: events_len,
        }),
        Err(e) => Err(e),
    };
    let options = EvalOptions::default();
    match spec.kind {
        EvaluatorKind::Dm => plain_cell(dm_evaluate(half, target, rhat), half.len()),
        EvaluatorKind::Ips => plain_cell(ips_evaluate(half, target), half.len()),
        EvaluatorKind::Dr => plain_cell(dr_evaluate(half, target, rhat), half.len()),
        EvaluatorKind::Rs { c } => {
            let c = match c {
                Some(c) => c,
                None => min_propensity(full)?,
            };
            sampled_cell(rs_evaluate_with(full, target, c, seed, None), full.len())
        }
        EvaluatorKind::Wc { c } => {
            let c = match c {
                Some(c) => c,
                None => min_propensity(half)?,
            };
            sampled_cell(
                wc_evaluate_with(half, target, rhat, c, seed, &options),
                half.len(),
            )
        }
        EvaluatorKind::Drns { q, c_max } => sampled_cell(
            drns_evaluate_with(half, target, rhat, q, c_max, seed, &options),
            half.len(),
        ),
    }
}

fn build_table(
    config: &ExperimentConfig,
    ground_truth: f64,
    trial_cells: Vec<Vec<TrialCell>>,
) -> Result<TrialTable> {
    let names: Vec<String> = config.evaluators.iter().map(|s| s.display_name()).collect();
    // Transpose [trial][evaluator] → [evaluator][trial].
    let mut cells: Vec<Vec<TrialCell>> = vec![Vec::with_capacity(config.trials); names.len()];
    for trial in trial_cells {
        for (e, cell) in trial.into_iter().enumerate() {
            cells[e].push(cell);
        }
    }
    let mut summaries = Vec::with_capacity(names.len());
    for (e, name) in names.iter().enumerate() {
        let estimates: Vec<f64> = cells[e].iter().filter_map(|c| c.estimate).collect();
        let failures = config.trials - estimates.len();
        let mean_accepted = cells[e]
            .iter()
            .map(|c| c.accepted_count as f64)
            .sum::<f64>()
            / config.trials as f64;
        let stats = if estimates.len() >= 2 {
            Some(summarize(
                &estimates,
                ground_truth,
                derive_seed(config.seed, STAGE_BOOTSTRAP + e as u64),
            )?)
        } else {
            None
        };
        summaries.push(SummaryRow {
            evaluator: name.clone(),
            trials_used: estimates.len(),
            failures,
            mean_accepted,
            mean_estimate: stats.as_ref().map(|s| s.mean),
            rmse: stats.as_ref().map(|s| s.rmse),
            rmse_ci: stats.as_ref().map(|s| s.rmse_ci),
            bias: stats.as_ref().map(|s| s.bias),
            stdev: stats.as_ref().map(|s| s.stdev),
        });
    }
    let table = TrialTable {
        task: config.task,
        trials: config.trials,
        seed: config.seed,
        ground_truth,
        evaluators: names,
        cells,
        summaries,
    };
    table.validate()?;
    Ok(table)
}

struct StaticSetup {
    k: usize,
    dim: usize,
    eval_set: SupervisedDataset,
    policy: EpsGreedyPolicy,
    ground_truth: f64,
}

/// Fix the static task's splits, train π₀, and compute its exact average
/// loss on the evaluation share.
fn static_setup(config: &ExperimentConfig) -> Result<StaticSetup> {
    let dataset = load_supervised(&config.dataset)?;
    let dim = dataset_dim(&dataset);
    let n = dataset.len();
    let policy_count = count_for(config.splits.policy_fraction, n, "policy training")?;
    let eval_count = count_for(config.splits.eval_fraction, n, "evaluation")?;
    let mut splits = split_dataset_counts(
        &dataset,
        &[policy_count, eval_count],
        derive_seed(config.seed, STAGE_SPLIT),
    )?;
    let eval_set = splits.swap_remove(1);
    let policy_train = splits.swap_remove(0);
    if eval_set.len() < 4 {
        return Err(Error::config("evaluation share too small to split in half"));
    }

    let model = train_logistic_ova(&policy_train.examples, dataset.k, &config.learner)?;
    let policy = EpsGreedyPolicy::new(Arc::new(model), POLICY_EPS)?;

    let empty = TargetHistory::new();
    let truth_value = eval_set
        .examples
        .iter()
        .map(|ex| {
            let dist = policy.action_distribution(&ex.context, &empty);
            (0..dataset.k)
                .map(|a| dist.prob(a) * correctness(ex, a))
                .sum::<f64>()
        })
        .sum::<f64>()
        / eval_set.len() as f64;
    Ok(StaticSetup {
        k: dataset.k,
        dim,
        eval_set,
        policy,
        ground_truth: 1.0 - truth_value,
    })
}

/// The static protocol: train π₀ on a fully labeled share, take its exact
/// average loss on the evaluation share as ground truth, then per trial
/// convert the evaluation share to bandit events with fresh randomness and
/// run every evaluator. Half of each trial's events train the reward model;
/// the other half feeds the evaluators (rejection sampling gets the full
/// stream, as it needs no reward model).
pub fn run_static_experiment(config: &ExperimentConfig) -> Result<TrialTable> {
    config.validate()?;
    let setup = static_setup(config)?;
    let trial_cells: Vec<Vec<TrialCell>> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<TrialCell>> {
            let trial_seed = config.seed.wrapping_add(t as u64);
            let mut events =
                convert_supervised(&setup.eval_set, derive_seed(trial_seed, STAGE_CONVERT))?;
            UniformStream::new(derive_seed(trial_seed, STAGE_SHUFFLE)).shuffle(&mut events);
            let (rhat_half, eval_half) = events.split_at(events.len() / 2);
            let rhat_model = train_rhat(rhat_half, setup.k, setup.dim, &config.learner)?;
            let rhat = ModelRewardEstimator::new(Arc::new(rhat_model));
            config
                .evaluators
                .iter()
                .enumerate()
                .map(|(e, spec)| {
                    run_one_evaluator(
                        spec,
                        &setup.policy,
                        &rhat,
                        &events,
                        eval_half,
                        derive_seed(trial_seed, STAGE_EVAL + e as u64),
                        None,
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    build_table(config, setup.ground_truth, trial_cells)
}

struct AdaptiveSetup {
    k: usize,
    dim: usize,
    eval_set: SupervisedDataset,
    policy: AdaptivePolicy,
    ground_truth: f64,
}

/// Fix the adaptive task's splits and policy, and estimate the ground
/// truth by simulating the policy on the shuffled held-out share.
fn adaptive_setup(config: &ExperimentConfig) -> Result<AdaptiveSetup> {
    let dataset = load_supervised(&config.dataset)?;
    let dim = dataset_dim(&dataset);
    let n = dataset.len();
    let a = &config.adaptive;
    let eval_count = count_for(config.splits.eval_fraction, n, "evaluation")?;
    let truth_count = count_for(config.splits.truth_fraction, n, "ground truth")?;
    if eval_count < 4 {
        return Err(Error::config("evaluation share too small to split in half"));
    }
    if truth_count < a.horizon {
        return Err(Error::config(format!(
            "ground-truth share ({truth_count} examples) shorter than the horizon {}",
            a.horizon
        )));
    }
    let mut splits = split_dataset_counts(
        &dataset,
        &[a.seed_count, eval_count, truth_count],
        derive_seed(config.seed, STAGE_SPLIT),
    )?;
    let truth_set = splits.swap_remove(2);
    let eval_set = splits.swap_remove(1);
    let seed_set = splits.swap_remove(0);

    let policy = AdaptivePolicy::new(
        seed_set.examples,
        dataset.k,
        a.period,
        a.horizon,
        POLICY_EPS,
        config.learner.clone(),
    )?;

    let truth_seed = derive_seed(config.seed, STAGE_TRUTH);
    let sim_values: Vec<f64> = (0..a.sims)
        .into_par_iter()
        .map(|s| {
            let mut stream = UniformStream::new(derive_seed(truth_seed, s as u64));
            let mut order: Vec<usize> = (0..truth_set.len()).collect();
            stream.shuffle(&mut order);
            let mut history = TargetHistory::new();
            let mut total = 0.0;
            for &i in order.iter().take(a.horizon) {
                let ex = &truth_set.examples[i];
                let dist = policy.action_distribution(&ex.context, &history);
                let action = stream.next_weighted(dist.probs());
                let reward = correctness(ex, action);
                total += reward;
                history.push(HistoryEntry {
                    context: ex.context.clone(),
                    action,
                    reward,
                });
            }
            total / a.horizon as f64
        })
        .collect();
    let ground_truth = 1.0 - sim_values.iter().sum::<f64>() / a.sims as f64;
    Ok(AdaptiveSetup {
        k: dataset.k,
        dim,
        eval_set,
        policy,
        ground_truth,
    })
}

/// Per-task ground-truth loss, without running any trials.
pub fn ground_truth(config: &ExperimentConfig) -> Result<f64> {
    config.validate()?;
    let pool = thread_pool()?;
    pool.install(|| match config.task {
        TaskKind::Static => Ok(static_setup(config)?.ground_truth),
        TaskKind::Adaptive => Ok(adaptive_setup(config)?.ground_truth),
        TaskKind::TinyworldDiagnostic => Err(Error::config(
            "the diagnostic task has no scalar ground truth",
        )),
    })
}

/// The adaptive protocol: fix a fully labeled seed set and an adaptive
/// ε-greedy policy retrained every `period` accepted rounds up to
/// `horizon`; estimate ground truth by simulating the policy on the
/// shuffled held-out share. Per trial, permute and convert the evaluation
/// share and run every evaluator against the policy restarted every
/// `horizon` accepted steps, so each evaluator extracts as many full
/// online runs from the stream as its acceptance rate allows. A sampling
/// evaluator that cannot fill even one trajectory is a failure cell.
pub fn run_adaptive_experiment(config: &ExperimentConfig) -> Result<TrialTable> {
    config.validate()?;
    let setup = adaptive_setup(config)?;
    let a = &config.adaptive;
    let trial_cells: Vec<Vec<TrialCell>> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<TrialCell>> {
            let trial_seed = config.seed.wrapping_add(t as u64);
            let mut order: Vec<usize> = (0..setup.eval_set.len()).collect();
            UniformStream::new(derive_seed(trial_seed, STAGE_SHUFFLE)).shuffle(&mut order);
            let permuted = SupervisedDataset {
                examples: order
                    .iter()
                    .map(|&i| setup.eval_set.examples[i].clone())
                    .collect(),
                k: setup.eval_set.k,
            };
            let events = convert_supervised(&permuted, derive_seed(trial_seed, STAGE_CONVERT))?;
            // Keep stream order: the first half trains r̂, the second half
            // is the evaluator's event stream.
            let (rhat_half, eval_half) = events.split_at(events.len() / 2);
            let rhat_model = train_rhat(rhat_half, setup.k, setup.dim, &config.learner)?;
            let rhat = ModelRewardEstimator::new(Arc::new(rhat_model));
            config
                .evaluators
                .iter()
                .enumerate()
                .map(|(e, spec)| {
                    run_one_evaluator(
                        spec,
                        &setup.policy,
                        &rhat,
                        &events,
                        eval_half,
                        derive_seed(trial_seed, STAGE_EVAL + e as u64),
                        Some(a.horizon),
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    build_table(config, setup.ground_truth, trial_cells)
}

/// ε-greedy over the world's true best actions — a nontrivial stationary
/// target for the diagnostic checks.
fn diagnostic_target(world: &TinyWorld, eps: f64) -> TablePolicy {
    let k = world.num_actions();
    let rows = world
        .rewards
        .iter()
        .map(|row| {
            let best = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let mut probs = vec![eps / k as f64; k];
            probs[best] += 1.0 - eps;
            probs
        })
        .collect();
    TablePolicy::new(rows).expect("valid eps-greedy rows")
}

/// Run the configured oracle checks against a serialized world.
pub fn run_diagnostic(config: &ExperimentConfig) -> Result<DiagnosticReport> {
    config.validate()?;
    let DatasetSpec::World { path } = &config.dataset else {
        return Err(Error::config("diagnostic task needs a world dataset"));
    };
    let world = TinyWorld::load_from(path)?;
    let target = diagnostic_target(&world, POLICY_EPS);
    let rhat = world.exact_reward_estimator();
    let mut checks = Vec::with_capacity(config.diagnostic.len());
    for (i, check) in config.diagnostic.iter().enumerate() {
        let seed = derive_seed(config.seed, STAGE_DIAG + i as u64);
        let outcome = match *check {
            DiagnosticCheck::Lemmas { states } => {
                let mut stream = UniformStream::new(seed);
                let states: Vec<LemmaState> = (0..states)
                    .map(|_| LemmaState {
                        history: random_history(&world, &mut stream, 6),
                        cap: 0.05 + 0.95 * stream.next_f64(),
                    })
                    .collect();
                CheckOutcome::Lemmas(verify_lemmas(&world, &target, &rhat, &states))
            }
            DiagnosticCheck::Bias {
                t_blocks,
                runs,
                q,
                c_max,
            } => CheckOutcome::Bias(bias_experiment(
                &world, &target, &rhat, q, c_max, t_blocks, runs, seed,
            )?),
            DiagnosticCheck::Coverage {
                events,
                runs,
                delta,
                q,
                c_max,
            } => CheckOutcome::Coverage(coverage_experiment(
                &world, &target, &rhat, q, c_max, events, runs, delta, seed,
            )?),
        };
        checks.push(outcome);
    }
    Ok(DiagnosticReport {
        world_contexts: world.num_contexts(),
        world_actions: world.num_actions(),
        seed: config.seed,
        pass: checks.iter().all(|c| c.passed()),
        checks,
    })
}

// ── Text rendering ──────────────────────────────────────────────────────

/// Format with 6 significant digits.
fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), fmt6)
}

/// Aligned UTF-8 summary table.
pub fn render_text(outcome: &ExperimentOutcome) -> String {
    match outcome {
        ExperimentOutcome::Table(table) => render_table_text(table),
        ExperimentOutcome::Diagnostic(report) => render_diagnostic_text(report),
    }
}

fn render_table_text(table: &TrialTable) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "task: {}   trials: {}   seed: {}\nground truth loss: {}\n\n",
        table.task,
        table.trials,
        table.seed,
        fmt6(table.ground_truth)
    ));
    let header = [
        "evaluator", "rmse", "ci_lo", "ci_hi", "bias", "stdev", "failures",
    ];
    let rows: Vec<[String; 7]> = table
        .summaries
        .iter()
        .map(|row| {
            [
                row.evaluator.clone(),
                fmt_opt(row.rmse),
                fmt_opt(row.rmse_ci.map(|ci| ci[0])),
                fmt_opt(row.rmse_ci.map(|ci| ci[1])),
                fmt_opt(row.bias),
                fmt_opt(row.stdev),
                row.failures.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let render_row = |cells: &[String]| -> String {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str(" | ");
            }
            line.push_str(cell);
            for _ in cell.chars().count()..*w {
                line.push(' ');
            }
        }
        line.trim_end().to_string()
    };
    let header_cells: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    out.push_str(&render_row(&header_cells));
    out.push('\n');
    let rule_len = widths.iter().sum::<usize>() + 3 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    for row in &rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out
}

fn render_diagnostic_text(report: &DiagnosticReport) -> String {
    let mut out = format!(
        "world: {} contexts × {} actions   seed: {}\n",
        report.world_contexts, report.world_actions, report.seed
    );
    for check in &report.checks {
        let verdict = if check.passed() { "pass" } else { "FAIL" };
        let detail = match check {
            CheckOutcome::Lemmas(r) => format!(
                "states={} worst_mean_gap={} worst_range_margin={} worst_second_moment_margin={}",
                r.states_checked,
                fmt6(r.worst_mean_gap),
                fmt6(r.worst_range_margin),
                fmt6(r.worst_second_moment_margin)
            ),
            CheckOutcome::Bias(r) => format!(
                "runs={} bias={} bound={} se={} eps_max={}",
                r.runs,
                fmt6(r.measured_bias),
                fmt6(r.bound),
                fmt6(r.mc_standard_error),
                fmt6(r.eps_max)
            ),
            CheckOutcome::Coverage(r) => format!(
                "runs={} coverage={} threshold={} mean_bound={}",
                r.runs,
                fmt6(r.coverage),
                fmt6(r.threshold),
                fmt6(r.mean_bound)
            ),
        };
        out.push_str(&format!("{}: {} ({})\n", check.label(), verdict, detail));
    }
    out.push_str(if report.pass { "overall: pass\n" } else { "overall: FAIL\n" });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_learner() -> LearnerConfig {
        LearnerConfig {
            iterations: 60,
            ..LearnerConfig::default()
        }
    }

    fn small_synthetic() -> DatasetSpec {
        DatasetSpec::Synthetic {
            seed: 11,
            config: SyntheticConfig {
                num_examples: 320,
                ..SyntheticConfig::default()
            },
        }
    }

    fn static_config() -> ExperimentConfig {
        ExperimentConfig {
            task: TaskKind::Static,
            dataset: small_synthetic(),
            evaluators: vec![
                EvaluatorSpec {
                    name: None,
                    kind: EvaluatorKind::Dm,
                },
                EvaluatorSpec {
                    name: None,
                    kind: EvaluatorKind::Rs { c: None },
                },
                EvaluatorSpec {
                    name: None,
                    kind: EvaluatorKind::Drns { q: 0.05, c_max: 1.0 },
                },
            ],
            trials: 3,
            seed: 71,
            splits: SplitConfig::default(),
            adaptive: AdaptiveConfig::default(),
            learner: fast_learner(),
            diagnostic: default_diagnostic_checks(),
            output: None,
        }
    }

    #[test]
    fn summarize_hand_example() {
        let stats = summarize(&[0.4, 0.6], 0.5, 1).unwrap();
        assert!((stats.rmse - 0.1).abs() < 1e-12);
        assert!(stats.bias.abs() < 1e-12);
        assert!((stats.stdev - 0.02f64.sqrt()).abs() < 1e-12);
        // Both resampled squared errors equal 0.01, so the interval is a point.
        assert!((stats.rmse_ci[0] - 0.1).abs() < 1e-12);
        assert!((stats.rmse_ci[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn summarize_exact_estimates() {
        let stats = summarize(&[0.5, 0.5, 0.5], 0.5, 2).unwrap();
        assert_eq!(stats.rmse, 0.0);
        assert_eq!(stats.bias, 0.0);
        assert_eq!(stats.stdev, 0.0);
        assert_eq!(stats.rmse_ci, [0.0, 0.0]);
    }

    #[test]
    fn summarize_is_seeded_and_brackets_the_point() {
        let estimates = [0.42, 0.48, 0.55, 0.51, 0.46, 0.61, 0.39, 0.52];
        let a = summarize(&estimates, 0.5, 33).unwrap();
        let b = summarize(&estimates, 0.5, 33).unwrap();
        assert_eq!(a, b);
        assert!(a.rmse_ci[0] <= a.rmse && a.rmse <= a.rmse_ci[1]);
        assert!(summarize(&[0.4], 0.5, 1).is_err());
    }

    #[test]
    fn fmt6_significant_digits() {
        assert_eq!(fmt6(0.0), "0.00000");
        assert_eq!(fmt6(0.0051234567), "0.00512346");
        assert_eq!(fmt6(123.4564), "123.456");
        assert_eq!(fmt6(-0.25), "-0.250000");
    }

    #[test]
    fn config_round_trip_and_validation() {
        let config = static_config();
        let json = serde_json::to_string(&config).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(config, back);

        let mut bad = static_config();
        bad.trials = 1;
        assert!(bad.validate().is_err());

        let mut bad = static_config();
        bad.evaluators[2].kind = EvaluatorKind::Drns { q: 1.5, c_max: 1.0 };
        assert!(bad.validate().is_err());

        let mut bad = static_config();
        bad.evaluators.push(bad.evaluators[0].clone());
        assert!(bad.validate().is_err());

        let mut bad = static_config();
        bad.dataset = DatasetSpec::World {
            path: PathBuf::from("w.json"),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn evaluator_names() {
        let spec = EvaluatorSpec {
            name: None,
            kind: EvaluatorKind::Drns { q: 0.05, c_max: 1.0 },
        };
        assert_eq!(spec.display_name(), "DR-ns(q=0.05)");
        let spec = EvaluatorSpec {
            name: None,
            kind: EvaluatorKind::Drns { q: 0.0, c_max: 1.0 },
        };
        assert_eq!(spec.display_name(), "DR-ns(q=0)");
    }

    #[test]
    fn static_experiment_smoke() {
        let config = static_config();
        let table = run_static_experiment(&config).unwrap();
        table.validate().unwrap();
        assert_eq!(table.evaluators, vec!["DM", "RS", "DR-ns(q=0.05)"]);
        assert!(table.ground_truth > 0.0 && table.ground_truth < 1.0);
        // DM and DR-ns use every event they see; estimates always present.
        assert_eq!(table.summary("DM").unwrap().failures, 0);
        let text = render_text(&ExperimentOutcome::Table(table));
        assert!(text.contains("evaluator"));
        assert!(text.contains("failures"));
        assert!(text.contains("DR-ns(q=0.05)"));
    }

    #[test]
    fn static_experiment_trials_are_independent() {
        let mut config = static_config();
        let three = run_static_experiment(&config).unwrap();
        config.trials = 4;
        let four = run_static_experiment(&config).unwrap();
        for e in 0..three.evaluators.len() {
            assert_eq!(three.cells[e][..3], four.cells[e][..3]);
        }
    }

    #[test]
    fn static_experiment_is_deterministic() {
        let config = static_config();
        let a = run_static_experiment(&config).unwrap();
        let b = run_static_experiment(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn adaptive_experiment_smoke() {
        let config = ExperimentConfig {
            task: TaskKind::Adaptive,
            dataset: small_synthetic(),
            evaluators: vec![
                EvaluatorSpec {
                    name: None,
                    kind: EvaluatorKind::Dm,
                },
                EvaluatorSpec {
                    name: None,
                    kind: EvaluatorKind::Drns { q: 0.1, c_max: 1.0 },
                },
                EvaluatorSpec {
                    name: None,
                    kind: EvaluatorKind::Rs { c: None },
                },
            ],
            trials: 2,
            seed: 5,
            splits: SplitConfig {
                eval_fraction: 0.5,
                truth_fraction: 0.3,
                ..SplitConfig::default()
            },
            adaptive: AdaptiveConfig {
                seed_count: 40,
                period: 5,
                horizon: 20,
                sims: 10,
            },
            learner: fast_learner(),
            diagnostic: default_diagnostic_checks(),
            output: None,
        };
        let table = run_adaptive_experiment(&config).unwrap();
        table.validate().unwrap();
        // RS needs a full 20-step trajectory from ~160 low-propensity events;
        // it must either complete or be recorded as a failure, never a zero.
        let rs = table.summary("RS").unwrap();
        assert_eq!(rs.trials_used + rs.failures, 2);
        for cell in &table.cells[2] {
            if cell.estimate.is_none() {
                assert!(cell.accepted_count < 20);
            }
        }
        // DM never fails.
        assert_eq!(table.summary("DM").unwrap().failures, 0);
    }

    #[test]
    fn diagnostic_runs_all_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("world.json");
        let world = TinyWorld::new(
            vec![0.6, 0.4],
            vec![vec![0.9, 0.2], vec![0.3, 0.7]],
            vec![vec![0.5, 0.5], vec![0.4, 0.6]],
        )
        .unwrap();
        world.save_to(&path).unwrap();
        let config = ExperimentConfig {
            task: TaskKind::TinyworldDiagnostic,
            dataset: DatasetSpec::World { path },
            evaluators: vec![],
            trials: 2,
            seed: 9,
            splits: SplitConfig::default(),
            adaptive: AdaptiveConfig::default(),
            learner: LearnerConfig::default(),
            diagnostic: vec![
                DiagnosticCheck::Lemmas { states: 20 },
                DiagnosticCheck::Coverage {
                    events: 200,
                    runs: 300,
                    delta: 0.05,
                    q: 0.0,
                    c_max: 0.4,
                },
            ],
            output: None,
        };
        let report = run_diagnostic(&config).unwrap();
        assert_eq!(report.checks.len(), 2);
        assert!(report.pass, "diagnostic failed: {report:?}");
        let text = render_text(&ExperimentOutcome::Diagnostic(report));
        assert!(text.contains("lemmas: pass"));
        assert!(text.contains("coverage: pass"));
    }
}
