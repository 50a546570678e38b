use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use primech_cli::report::{outcomes_csv, OutcomeRecord, OUTCOME_COLUMNS};
use primech_cli::ExperimentConfig;
use priority_mechanism::{run_game, Scenario};

fn primech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_primech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("primech-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_ic_on_defaults_passes() {
    let out = primech(&["verify", "ic"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn payment_check_vcg_fails_condition_two() {
    let out = primech(&["payment-check", "--scheme=VCGStyle"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["condition1Holds"], true);
    assert_eq!(report["condition2Holds"], false);
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn payment_check_rejects_report_only() {
    let out = primech(&["payment-check", "--scheme=ReportOnly(0,1)"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let a = scratch("a.csv");
    let b = scratch("b.csv");
    for path in [&a, &b] {
        let out = primech(&["run", "--seeds=10", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 11);
}

#[test]
fn run_csv_header_matches_outcome_columns() {
    let out = primech(&["run", "--seeds=2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), OUTCOME_COLUMNS.join(","));
}

#[test]
fn empty_seed_list_gives_header_only() {
    let cfg = scratch("empty.json");
    fs::write(&cfg, r#"{"seeds": []}"#).unwrap();
    let out = primech(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        format!("{}\n", OUTCOME_COLUMNS.join(","))
    );
}

#[test]
fn worked_example_row() {
    let scenario = Scenario::from_thetas(
        &[2.0, 3.0, 4.0],
        &[],
        ExperimentConfig::default().environment().unwrap(),
        ExperimentConfig::default().theta_grid().unwrap(),
    )
    .unwrap();
    let outcome = run_game(&scenario).unwrap();
    let csv = outcomes_csv(&[OutcomeRecord::new(&scenario, outcome).unwrap()]);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[OUTCOME_COLUMNS.iter().position(|c| *c == name).unwrap()];
    assert_eq!(col("winner_id"), "1");
    assert_eq!(col("theta_bar"), "3");
    assert_eq!(col("gamma_realized"), "0.5");
    assert_eq!(col("social_welfare"), "2.25");
    assert_eq!(col("welfare_gap"), "0");
}

#[test]
fn unknown_command_is_usage_error() {
    assert_eq!(primech(&["bogus"]).status.code(), Some(2));
}

#[test]
fn bad_config_names_the_key() {
    let cfg = scratch("bad.json");
    fs::write(&cfg, r#"{"gammaGrid": {"step": 0}}"#).unwrap();
    let out = primech(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("gammaGrid.step"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let cfg = scratch("unknown.json");
    fs::write(&cfg, r#"{"nAgent": 3}"#).unwrap();
    assert_eq!(
        primech(&["run", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn counterexample_ir_for_realization_only_exits_one() {
    let out = primech(&["counterexample", "ir", "--scheme=RealizationOnly(1,-1)"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"], "Found");
}

#[test]
fn counterexample_ic_for_linear_mechanism_finds_nothing() {
    let cfg = scratch("small.json");
    fs::write(
        &cfg,
        r#"{"nAgents": 2, "thetaGrid": {"lo": 0, "hi": 2, "step": 0.5}}"#,
    )
    .unwrap();
    let out = primech(&["counterexample", "ic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"], "NoneFound");
}

#[test]
fn sweep_emits_one_row_per_point() {
    let cfg = scratch("sweep.json");
    fs::write(
        &cfg,
        r#"{"seeds": 5, "sweep": [{"axis": "nAgents", "values": [2, 3]}, {"axis": "costPower", "values": [1, 2, 3]}]}"#,
    )
    .unwrap();
    let out = primech(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("nAgents,costPower,scenarios,"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn sweep_without_axes_is_usage_error() {
    assert_eq!(primech(&["sweep"]).status.code(), Some(2));
}
