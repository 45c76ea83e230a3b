//! The binary's exit-code contract and its report files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tfm_lab::cli::{ClaimRow, CSV_HEADER};

fn tfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfm-lab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn gta_dsic_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), r#"{"mechanism": {"variant": "gta"}, "checks": ["check_dsic"], "output_dir": "out"}"#);
    let out = tfm(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("DSIC: HoldsOnGrid"), "{report}");
    // no temp files left behind
    let names: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "{names:?}");
}

#[test]
fn expected_violation_exits_zero_and_unexpected_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mechanism": {"variant": "upga", "block": 1},
            "checks": [{"property": "mmic", "expect": "violated"}],
            "grid": {"n": 2}, "output_dir": "out"}"#,
    );
    assert_eq!(tfm(&["run", &cfg]).status.code(), Some(0));

    let cfg = write_config(
        dir.path(),
        r#"{"mechanism": {"variant": "upga", "block": 1}, "checks": ["mmic"], "grid": {"n": 2}, "output_dir": "out"}"#,
    );
    let out = tfm(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("expected holds: FAIL"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"checks": ["dsic"]}"#,
        r#"{"mechanism": {"variant": "gta"}, "checks": ["dsic", "truthiness"]}"#,
        r#"{"mechanism": {"variant": "pabga"}}"#,
        r#"{"mechanism": {"variant": "gta"}, "revenue_tasks": [{"task": "guess", "n": 2}]}"#,
        "{ not json",
    ];
    for body in cases {
        let cfg = write_config(dir.path(), body);
        let out = tfm(&["run", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(text(&out.stderr).contains("config error"), "{body}: {}", text(&out.stderr));
    }
    assert_eq!(tfm(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
    assert_eq!(tfm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tfm(&["verify-claims", "--samples", "100"]).status.code(), Some(2));
}

#[test]
fn missing_field_diagnostic_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "{\n  \"mechanism\": {\"variant\": \"gta\"},\n  \"grid\": {\"n\": \"three\"}\n}");
    let out = tfm(&["run", &cfg]);
    let err = text(&out.stderr);
    assert!(err.contains("grid.n") && err.contains("line 3"), "{err}");
}

#[test]
fn budget_exceeded_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mechanism": {"variant": "gta"}, "checks": ["scp"], "output_dir": "out"}"#);
    let out =
        Command::new(env!("CARGO_BIN_EXE_tfm-lab")).args(["run", &cfg]).env("TFM_LAB_BUDGET", "10").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("budget"), "{}", text(&out.stdout));
}

#[test]
fn task_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mechanism": {"variant": "pabga", "block": 2},
            "revenue_tasks": [{"task": "mc_revenue", "n": 4, "samples": 20000, "seed": 5},
                              {"task": "uniform_exact", "n": 4, "k": 2}],
            "output_dir": "out"}"#,
    );
    let out = tfm(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("out/task01_mc_revenue.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<ClaimRow> = lines.map(|l| ClaimRow::from_csv(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].n, Some(4));
    assert_eq!(rows[0].k, Some(2));
    let rewritten: Vec<String> = rows.iter().map(ClaimRow::to_csv).collect();
    assert_eq!(rewritten.join("\n"), csv.lines().skip(1).collect::<Vec<_>>().join("\n"));
    assert!(dir.path().join("out/task02_uniform_exact.csv").exists());
}

#[test]
fn verify_claims_rows_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("claims");
    let out = tfm(&["verify-claims", "--samples", "10000", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let stdout = text(&out.stdout);
    let row = |name: &str| {
        stdout.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("no row {name}")).to_string()
    };
    assert!(row("PABGA n=4 k=3 rev").contains("3/5 (0.600000)"));
    assert!(row("GTA desiderata").contains("4/4 HoldsOnGrid"));
    assert!(row("GTA desiderata").contains("finite grid"));
    assert_eq!(fs::read_to_string(out_dir.join("report.txt")).unwrap(), stdout);
    let csv = fs::read_to_string(out_dir.join("claims.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| ClaimRow::from_csv(l).is_ok()));
}

#[test]
fn check_and_bid_subcommands() {
    let out = tfm(&["check", "upga:1:0", "scp", "--n", "2", "--max-fake", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("SCP: Violated") && stdout.contains("replay: exact"), "{stdout}");

    let out = tfm(&["check", "gta", "dsic", "--coalition", "2"]);
    assert!(text(&out.stdout).contains("DSIC: HoldsOnGrid"));
    assert_eq!(tfm(&["check", "gta:3", "dsic"]).status.code(), Some(2));

    let out = tfm(&["bid", "--n", "3", "--k", "1", "--v", "0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let bid: f64 = text(&out.stdout).trim().parse().unwrap();
    assert!((bid - 0.6).abs() < 1e-12, "{bid}");
    assert_eq!(tfm(&["bid", "--n", "3", "--k", "1", "--v", "1.5"]).status.code(), Some(2));
}
