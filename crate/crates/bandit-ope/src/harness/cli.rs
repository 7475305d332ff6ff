//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::datagen::{convert_supervised, read_events_path, read_multilabel_path, write_events_path};
use crate::error::{Error, Result};
use crate::evaluators::{
    dm_evaluate, dr_evaluate, drns_evaluate_with, ips_evaluate, min_propensity, rs_evaluate_with,
    wc_evaluate_with, EvalOptions,
};
use crate::harness::{
    ground_truth, render_text, run_experiment, DatasetSpec, DiagnosticCheck, ExperimentConfig,
    TaskKind,
};
use crate::policies::{
    AdaptivePolicy, EmpiricalGreedyPolicy, EpsGreedyPolicy, LearnerConfig, LinearModel,
    TablePolicy, TableRewardEstimator, UniformPolicy,
};
use crate::types::{ConstantEstimator, Policy, RewardEstimator};

#[derive(Parser)]
#[command(
    name = "bandit-ope",
    version,
    about = "Offline policy evaluation for contextual bandits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base random seed (default 0; `experiment` defaults to the config's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write the JSON output to this path.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Stdout rendering.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a multilabel dataset into a logged bandit event file.
    Convert {
        /// svmlight-style multilabel input.
        #[arg(long)]
        input: PathBuf,
        /// Class count; default: largest label in the file + 1.
        #[arg(long)]
        classes: Option<usize>,
        /// Destination JSON-lines event log.
        #[arg(long)]
        events: PathBuf,
    },
    /// Run one evaluator over an event log and print its estimate.
    Evaluate {
        #[arg(long, value_enum)]
        evaluator: EvaluatorName,
        /// Ratio quantile (drns).
        #[arg(long)]
        q: Option<f64>,
        /// Cap ceiling (drns).
        #[arg(long = "cmax")]
        c_max: Option<f64>,
        /// Constant cap (rs/wc); default: the log's minimum propensity.
        #[arg(long)]
        c: Option<f64>,
        /// JSON-lines event log.
        #[arg(long)]
        events: PathBuf,
        /// Target policy spec (JSON).
        #[arg(long)]
        policy: PathBuf,
        /// Reward estimator spec (JSON); required by dm, dr, wc, drns.
        #[arg(long)]
        rhat: Option<PathBuf>,
        /// Stop after this many acceptances.
        #[arg(long)]
        accept_limit: Option<usize>,
    },
    /// Run a configured experiment and report the trial table.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute an experiment's ground-truth loss without running trials.
    GroundTruth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run oracle checks against a serialized world.
    Diagnose {
        #[arg(long)]
        world: PathBuf,
        #[arg(long, value_enum, default_value_t = CheckName::Lemmas)]
        check: CheckName,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvaluatorName {
    Dm,
    Ips,
    Dr,
    Rs,
    Wc,
    Drns,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckName {
    Lemmas,
    Bias,
    Coverage,
    All,
}

/// Serialized target-policy description. Model paths are resolved relative
/// to the spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicySpec {
    Uniform {
        k: usize,
    },
    Table {
        rows: Vec<Vec<f64>>,
    },
    EpsGreedy {
        model: PathBuf,
        eps: f64,
    },
    EmpiricalGreedy {
        k: usize,
        eps: f64,
    },
    /// Retrained-on-history policy seeded from a fully labeled file.
    Adaptive {
        data: PathBuf,
        #[serde(default)]
        classes: Option<usize>,
        seed_count: usize,
        period: usize,
        horizon: usize,
        eps: f64,
        #[serde(default = "LearnerConfig::default")]
        learner: LearnerConfig,
    },
}

/// Serialized reward-estimator description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rhat", rename_all = "snake_case")]
pub enum RhatSpec {
    Constant { value: f64 },
    Table { rows: Vec<Vec<f64>> },
    Model { model: PathBuf },
}

fn resolve(spec_path: &Path, target: &Path) -> PathBuf {
    if target.is_absolute() {
        target.to_path_buf()
    } else {
        spec_path
            .parent()
            .map_or_else(|| target.to_path_buf(), |dir| dir.join(target))
    }
}

/// Load a policy from a [`PolicySpec`] JSON file.
pub fn load_policy(path: &Path) -> Result<Box<dyn Policy>> {
    let spec: PolicySpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(match spec {
        PolicySpec::Uniform { k } => Box::new(UniformPolicy::new(k)?),
        PolicySpec::Table { rows } => Box::new(TablePolicy::new(rows)?),
        PolicySpec::EpsGreedy { model, eps } => {
            let model = LinearModel::load_from(&resolve(path, &model))?;
            Box::new(EpsGreedyPolicy::new(Arc::new(model), eps)?)
        }
        PolicySpec::EmpiricalGreedy { k, eps } => Box::new(EmpiricalGreedyPolicy::new(k, eps)?),
        PolicySpec::Adaptive {
            data,
            classes,
            seed_count,
            period,
            horizon,
            eps,
            learner,
        } => {
            let file = read_multilabel_path(&resolve(path, &data), classes)?;
            if file.dataset.len() < seed_count {
                return Err(Error::InsufficientData {
                    needed: seed_count,
                    got: file.dataset.len(),
                });
            }
            let seed_examples = file.dataset.examples[..seed_count].to_vec();
            Box::new(AdaptivePolicy::new(
                seed_examples,
                file.dataset.k,
                period,
                horizon,
                eps,
                learner,
            )?)
        }
    })
}

/// Load a reward estimator from an [`RhatSpec`] JSON file.
pub fn load_rhat(path: &Path) -> Result<Box<dyn RewardEstimator>> {
    let spec: RhatSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(match spec {
        RhatSpec::Constant { value } => Box::new(ConstantEstimator::new(value)?),
        RhatSpec::Table { rows } => Box::new(TableRewardEstimator::new(rows)?),
        RhatSpec::Model { model } => {
            let model = LinearModel::load_from(&resolve(path, &model))?;
            Box::new(crate::policies::ModelRewardEstimator::new(Arc::new(model)))
        }
    })
}

#[derive(Debug, Serialize)]
struct EvaluateOutput {
    evaluator: &'static str,
    estimate: f64,
    accepted_count: usize,
    completed_blocks: usize,
    events_used: usize,
}

#[derive(Debug, Serialize)]
struct ConvertOutput {
    examples: usize,
    classes: usize,
    dropped_empty: usize,
    events_written: usize,
    output: PathBuf,
}

#[derive(Debug, Serialize)]
struct GroundTruthOutput {
    task: TaskKind,
    ground_truth: f64,
    ground_truth_value: f64,
}

/// Run the CLI and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

fn emit(format: Format, json: &str, text: &str, output: Option<&Path>) -> Result<()> {
    match format {
        Format::Json => print!("{json}"),
        Format::Table => print!("{text}"),
    }
    if let Some(path) = output {
        std::fs::write(path, json)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Convert {
            input,
            classes,
            events,
        } => {
            let file = read_multilabel_path(&input, classes)?;
            let converted = convert_supervised(&file.dataset, seed)?;
            write_events_path(&events, &converted)?;
            let out = ConvertOutput {
                examples: file.dataset.len(),
                classes: file.dataset.k,
                dropped_empty: file.dropped_empty,
                events_written: converted.len(),
                output: events,
            };
            let json = to_json_line(&out);
            emit(cli.format, &json, &json, cli.output.as_deref())
        }
        Command::Evaluate {
            evaluator,
            q,
            c_max,
            c,
            events,
            policy,
            rhat,
            accept_limit,
        } => {
            let log = read_events_path(&events)?;
            let policy = load_policy(&policy)?;
            let rhat = match (&rhat, evaluator) {
                (Some(path), _) => Some(load_rhat(path)?),
                (None, EvaluatorName::Ips | EvaluatorName::Rs) => None,
                (None, _) => {
                    return Err(Error::invalid_argument(
                        "this evaluator needs --rhat (a reward-estimator spec)",
                    ))
                }
            };
            let need_rhat = || rhat.as_deref().expect("checked above");
            let options = EvalOptions {
                record_trace: false,
                accept_limit,
            };
            let out = match evaluator {
                EvaluatorName::Dm => {
                    plain_output("dm", dm_evaluate(&log, &*policy, need_rhat())?, log.len())
                }
                EvaluatorName::Ips => {
                    plain_output("ips", ips_evaluate(&log, &*policy)?, log.len())
                }
                EvaluatorName::Dr => {
                    plain_output("dr", dr_evaluate(&log, &*policy, need_rhat())?, log.len())
                }
                EvaluatorName::Rs => {
                    let c = match c {
                        Some(c) => c,
                        None => min_propensity(&log)?,
                    };
                    let r = rs_evaluate_with(&log, &*policy, c, seed, accept_limit)?;
                    sampled_output("rs", &r)
                }
                EvaluatorName::Wc => {
                    let c = match c {
                        Some(c) => c,
                        None => min_propensity(&log)?,
                    };
                    let r = wc_evaluate_with(&log, &*policy, need_rhat(), c, seed, &options)?;
                    sampled_output("wc", &r)
                }
                EvaluatorName::Drns => {
                    let q = q.ok_or_else(|| Error::invalid_argument("drns needs --q"))?;
                    let c_max = c_max.unwrap_or(1.0);
                    let r = drns_evaluate_with(
                        &log,
                        &*policy,
                        need_rhat(),
                        q,
                        c_max,
                        seed,
                        &options,
                    )?;
                    sampled_output("drns", &r)
                }
            };
            let json = to_json_line(&out);
            emit(cli.format, &json, &json, cli.output.as_deref())
        }
        Command::Experiment { config } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let outcome = run_experiment(&config)?;
            let json = outcome.to_json();
            let text = render_text(&outcome);
            let report_path = cli.output.clone().or_else(|| config.output.clone());
            emit(cli.format, &json, &text, report_path.as_deref())
        }
        Command::GroundTruth { config } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let loss = ground_truth(&config)?;
            let out = GroundTruthOutput {
                task: config.task,
                ground_truth: loss,
                ground_truth_value: 1.0 - loss,
            };
            let json = to_json_line(&out);
            emit(cli.format, &json, &json, cli.output.as_deref())
        }
        Command::Diagnose { world, check } => {
            let checks = match check {
                CheckName::Lemmas => vec![lemmas_check()],
                CheckName::Bias => vec![bias_check()],
                CheckName::Coverage => vec![coverage_check()],
                CheckName::All => vec![lemmas_check(), bias_check(), coverage_check()],
            };
            let config = ExperimentConfig {
                task: TaskKind::TinyworldDiagnostic,
                dataset: DatasetSpec::World { path: world },
                evaluators: vec![],
                trials: 2,
                seed,
                splits: Default::default(),
                adaptive: Default::default(),
                learner: LearnerConfig::default(),
                diagnostic: checks,
                output: None,
            };
            let outcome = run_experiment(&config)?;
            let json = outcome.to_json();
            let text = render_text(&outcome);
            emit(cli.format, &json, &text, cli.output.as_deref())
        }
    }
}

fn lemmas_check() -> DiagnosticCheck {
    DiagnosticCheck::Lemmas { states: 100 }
}

fn bias_check() -> DiagnosticCheck {
    DiagnosticCheck::Bias {
        t_blocks: 2,
        runs: 2000,
        q: 1.0,
        c_max: 1.0,
    }
}

fn coverage_check() -> DiagnosticCheck {
    DiagnosticCheck::Coverage {
        events: 300,
        runs: 1000,
        delta: 0.05,
        q: 0.0,
        c_max: 0.5,
    }
}

fn plain_output(name: &'static str, value: f64, n: usize) -> EvaluateOutput {
    EvaluateOutput {
        evaluator: name,
        estimate: value,
        accepted_count: n,
        completed_blocks: 0,
        events_used: n,
    }
}

fn sampled_output(name: &'static str, r: &crate::evaluators::EvalResult) -> EvaluateOutput {
    EvaluateOutput {
        evaluator: name,
        estimate: r.estimate,
        accepted_count: r.accepted_count,
        completed_blocks: r.completed_blocks,
        events_used: r.events_used,
    }
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text
}
