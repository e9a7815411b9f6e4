//! End-to-end tests of the `cse` binary.

use std::path::Path;
use std::process::{Command, Output};

fn cse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cse")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn field<'a>(text: &'a str, name: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(name).filter(|rest| rest.starts_with("  ")))
        .map(str::trim)
        .unwrap_or_else(|| panic!("no line {name:?} in\n{text}"))
}

#[test]
fn budget_text_report() {
    let out = cse(&["budget", "--variant", "csws", "--n", "20", "--k", "4", "--B", "500"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(field(&text, "rounds R"), "4");
    assert_eq!(field(&text, "partitions P"), "5 2 1 1");
    assert_eq!(field(&text, "per-set budgets b"), "25 62 125 125");
}

#[test]
fn budget_round_robin_counts_all_sets() {
    let out = cse(&["budget", "--variant", "rr", "--n", "6", "--k", "3"]);
    assert!(out.status.success());
    assert_eq!(field(&stdout(&out), "max distinct query sets"), "20");
}

#[test]
fn budget_json_matches_text() {
    let out = cse(&["budget", "--variant", "csws", "--n", "20", "--k", "4", "--B", "500", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rounds"], 4);
    assert_eq!(v["partitions"], serde_json::json!([5, 2, 1, 1]));
    assert_eq!(v["per_set_budgets"], serde_json::json!([25, 62, 125, 125]));
}

#[test]
fn gap_fields_without_profile_are_an_error() {
    let out = cse(&["budget", "--variant", "csh", "--n", "6", "--k", "2", "--with-gaps"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["sufficient_budget", "lower_bound_gcw", "lower_bound_gbw_gcopew", "--profile"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn generated_limits_feed_the_budget_report() {
    let dir = tempfile::tempdir().unwrap();
    let limits = dir.path().join("limits.json");
    let limits = limits.to_str().unwrap();
    assert!(cse(&["gen", "--n", "6", "--k", "2", "--seed", "3", "--limits", "--output", limits]).status.success());
    let out = cse(&["budget", "--variant", "csws", "--n", "6", "--k", "2", "--B", "100", "--profile", limits, "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["sufficient_budget"].as_u64().unwrap() > 0);
    assert!(v["lower_bound_gcw"].as_u64().unwrap() > 0);
    let mismatched = cse(&["budget", "--variant", "csws", "--n", "7", "--k", "2", "--profile", limits]);
    assert!(!mismatched.status.success());
}

#[test]
fn gen_writes_a_loadable_spec() {
    let out = cse(&["gen", "--env", "preference", "--n", "8", "--k", "2", "--seed", "5", "--epsilon", "0.2"]);
    assert!(out.status.success());
    let spec: cse_core::env::EnvironmentSpec = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((spec.n, spec.k, spec.seed), (8, 2, 5));
    assert!((spec.epsilon - 0.2).abs() < 1e-15);
    assert!(spec.build().is_ok());
}

fn run_csv(extra: &[&str], path: &Path) -> String {
    let mut args = vec!["run", "--n", "6", "--k", "2", "--B", "100", "--repetitions", "5", "--variant", "csws", "--variant", "rr"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--output", path.to_str().unwrap()]);
    let out = cse(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn run_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_csv(&["--seed", "11"], &dir.path().join("a.csv"));
    let b = run_csv(&["--seed", "11"], &dir.path().join("b.csv"));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algo,statistic,env,n,k,B,seed,returned_arm,true_best,success,pulls_used,distinct_query_sets,simulated_wallclock,flags"
    );
    assert_eq!(lines.count(), 10);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.json");
    let grid = cse_core::harness::ExperimentGrid::new(
        cse_core::env::EnvironmentSpec::gaussian(8, 2, 0),
        vec![cse_core::harness::AlgorithmSpec::Csh],
        vec![8],
        vec![2],
        vec![50],
    );
    std::fs::write(&config, serde_json::to_string(&grid).unwrap()).unwrap();
    let out = cse(&["run", "--config", config.to_str().unwrap(), "--B", "80", "--repetitions", "3", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<cse_core::harness::ResultRow> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.budget == 80 && r.n == 8 && r.algo == "CSH"));
}

#[test]
fn invalid_overrides_are_rejected() {
    assert!(!cse(&["run", "--n", "3", "--k", "5", "--B", "10"]).status.success());
    assert!(!cse(&["run", "--n", "6", "--k", "2", "--B", "10", "--variant", "nope"]).status.success());
    assert!(!cse(&["run", "--n", "6", "--k", "2", "--B", "10", "--statistic", "power-mean"]).status.success());
    assert!(!cse(&["run", "--n", "6"]).status.success());
}

#[test]
fn summarize_reads_run_output() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    run_csv(&[], &rows);
    let out = cse(&["summarize", "--input", rows.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("algo,env,n,k,B,runs,successes,success_rate,ci_low,ci_high"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn verify_passes_on_even_subset_sizes() {
    let out = cse(&["verify", "--instances", "1", "--rr-instances", "1", "--only", "csws", "--only", "roundrobin"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 3);
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_exit_status_reports_mismatches() {
    let out = cse(&["verify", "--instances", "6", "--rr-instances", "0", "--only", "csh"]);
    let text = stdout(&out);
    assert_eq!(out.status.success(), !text.contains("FAIL"), "{text}");
}

#[test]
fn every_subcommand_documents_its_flags() {
    for (sub, flags) in [
        ("budget", &["--variant", "--n", "--k", "--B", "--profile", "--format"][..]),
        ("gen", &["--env", "--n", "--k", "--seed", "--epsilon", "--limits"][..]),
        ("run", &["--config", "--n", "--k", "--B", "--seed", "--variant", "--statistic", "--output"][..]),
        ("verify", &["--instances", "--rr-instances", "--seed", "--format"][..]),
        ("summarize", &["--input", "--format", "--output"][..]),
    ] {
        let out = cse(&[sub, "--help"]);
        assert!(out.status.success());
        let text = stdout(&out);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
        assert!(text.contains("[default"), "{sub} --help shows no defaults");
    }
}
