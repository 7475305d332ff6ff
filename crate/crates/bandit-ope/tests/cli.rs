//! End-to-end runs of the installed binary: happy paths for every
//! subcommand plus the exit-code contract (0 ok, 1 usage/config, 2 data).

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bandit-ope"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

/// A small multilabel file plus converted event log, shared by the tests.
fn converted(dir: &TempDir) -> (String, String) {
    let input = dir.path().join("data.svm");
    let mut lines = String::new();
    for i in 0..120 {
        let label = i % 3;
        let second = if i % 5 == 0 { ",2" } else { "" };
        lines.push_str(&format!(
            "{label}{second} 0:{} 1:{} 2:1.0\n",
            (i % 7) as f64 / 7.0,
            ((i + 3) % 5) as f64 / 5.0,
        ));
    }
    std::fs::write(&input, lines).unwrap();
    let events = dir.path().join("events.jsonl");
    let output = run(&[
        "convert",
        "--input",
        input.to_str().unwrap(),
        "--classes",
        "3",
        "--events",
        events.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    (
        input.to_str().unwrap().to_string(),
        events.to_str().unwrap().to_string(),
    )
}

fn write_json(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn convert_reports_counts_and_writes_events() {
    let dir = tempfile::tempdir().unwrap();
    let (_, events) = converted(&dir);
    let text = std::fs::read_to_string(events).unwrap();
    assert_eq!(text.lines().count(), 120);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["p"].as_f64().unwrap() > 0.0);
}

#[test]
fn evaluate_runs_every_evaluator() {
    let dir = tempfile::tempdir().unwrap();
    let (_, events) = converted(&dir);
    let policy = write_json(&dir.path().join("policy.json"), r#"{"policy": "uniform", "k": 3}"#);
    let rhat = write_json(&dir.path().join("rhat.json"), r#"{"rhat": "constant", "value": 0.5}"#);

    for evaluator in ["dm", "ips", "dr", "rs", "wc"] {
        let mut args = vec![
            "evaluate",
            "--evaluator",
            evaluator,
            "--events",
            &events,
            "--policy",
            &policy,
            "--seed",
            "3",
        ];
        if evaluator != "ips" && evaluator != "rs" {
            args.extend(["--rhat", &rhat]);
        }
        let output = run(&args);
        assert!(
            output.status.success(),
            "{evaluator}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let json = stdout_json(&output);
        assert!(json["estimate"].as_f64().unwrap().is_finite(), "{evaluator}");
    }

    let output = run(&[
        "evaluate", "--evaluator", "drns", "--q", "0.05", "--cmax", "1.0", "--events", &events,
        "--policy", &policy, "--rhat", &rhat, "--seed", "3",
    ]);
    assert!(output.status.success());
    let json = stdout_json(&output);
    assert!(json["accepted_count"].as_u64().unwrap() > 0);
    assert_eq!(json["evaluator"], "drns");
}

#[test]
fn evaluate_requires_rhat_for_model_based_evaluators() {
    let dir = tempfile::tempdir().unwrap();
    let (_, events) = converted(&dir);
    let policy = write_json(&dir.path().join("policy.json"), r#"{"policy": "uniform", "k": 3}"#);
    let output = run(&["evaluate", "--evaluator", "dm", "--events", &events, "--policy", &policy]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--rhat"));
}

#[test]
fn experiment_and_ground_truth_agree() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(
        &dir.path().join("config.json"),
        r#"{
  "task": "static",
  "dataset": {"kind": "synthetic", "seed": 4, "num_examples": 400, "k": 3, "dim": 6,
              "noise": 0.3, "label_flip": 0.1, "extra_label": 0.1},
  "evaluators": [{"evaluator": "dm"}, {"evaluator": "drns", "q": 0.1, "c_max": 1.0}],
  "trials": 3,
  "seed": 21,
  "learner": {"lambda": 1.0, "iterations": 60, "grad_tolerance": 1e-6}
}"#,
    );

    let report_path = dir.path().join("report.json");
    let output = bin()
        .args(["experiment", "--config", &config, "--format", "table"])
        .args(["--output"])
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("evaluator") && text.contains("rmse"), "{text}");
    assert!(text.contains("DR-ns(q=0.1)"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let table_truth = report["ground_truth"].as_f64().unwrap();

    let output = run(&["ground-truth", "--config", &config]);
    assert!(output.status.success());
    let json = stdout_json(&output);
    assert_eq!(json["ground_truth"].as_f64().unwrap(), table_truth);
}

#[test]
fn diagnose_passes_on_shipped_world() {
    let world = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../worlds/w1.json");
    let output = bin()
        .args(["diagnose", "--world"])
        .arg(&world)
        .args(["--check", "lemmas", "--seed", "12"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("lemmas: pass"), "{text}");
}

#[test]
fn exit_codes_distinguish_usage_from_data_errors() {
    // Unknown flag: usage error, code 1.
    let output = run(&["evaluate", "--no-such-flag"]);
    assert_eq!(output.status.code(), Some(1));

    // Missing events file: data/runtime error, code 2.
    let dir = tempfile::tempdir().unwrap();
    let policy = write_json(&dir.path().join("policy.json"), r#"{"policy": "uniform", "k": 3}"#);
    let output = run(&[
        "evaluate", "--evaluator", "ips", "--events", "/nonexistent/events.jsonl",
        "--policy", &policy,
    ]);
    assert_eq!(output.status.code(), Some(2));

    // Malformed config: config error, code 1.
    let config = write_json(&dir.path().join("bad.json"), r#"{"task": "static"}"#);
    let output = run(&["experiment", "--config", &config]);
    assert_eq!(output.status.code(), Some(1));

    // --help exits 0.
    let output = run(&["--help"]);
    assert_eq!(output.status.code(), Some(0));
}
