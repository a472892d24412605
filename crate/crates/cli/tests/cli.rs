use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_traffic-mpc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario_file(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn validate_accepts_the_shipped_scenarios() {
    for name in ["benchmark.toml", "benchmark_emergency.toml"] {
        let out = cli(&["validate", "--scenario", &scenario_file(name)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(
            text.starts_with("ok: 14 lanes, 4 intersections, 3 inlets, 4 units"),
            "{text}"
        );
    }
}

#[test]
fn validate_reports_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[network]\nlanes = [1, 2]\n").unwrap();
    let out = cli(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = dir.path().join("missing.toml");
    let out = cli(&["validate", "--scenario", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(cli(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        cli(&["run", "--controller", "nobody"]).status.code(),
        Some(2)
    );
}

#[test]
fn zero_step_run_writes_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "run",
        "--controller",
        "baseline",
        "--steps",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("t,"));
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn decentralized_run_logs_every_round() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let out = cli(&[
        "run",
        "--scenario",
        "benchmark-emergency",
        "--steps",
        "12",
        "--seed",
        "4",
        "--out",
        path,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = fs::read_to_string(dir.path().join("rounds.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 12);
    for line in log.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("controller decentralized"));
    assert!(summary.contains("\ndep "));
    assert_eq!(
        fs::read_to_string(dir.path().join("run.csv"))
            .unwrap()
            .lines()
            .count(),
        14
    );
}

#[test]
fn batch_tabulates_normalized_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let out = cli(&["batch", "--runs", "2", "--steps", "6", "--out", path]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let header = table.lines().next().unwrap();
    assert!(header.contains("ssd_norm") && header.contains("ct_norm"));
    assert_eq!(table.lines().count(), 4);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_rejects_an_empty_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "sweep",
        "--tf-min",
        "3",
        "--tf-max",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let out = cli(&[
        "sweep", "--tf-min", "1", "--tf-max", "3", "--runs", "2", "--steps", "8", "--out", path,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    let horizons: Vec<u64> = rows
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["horizon"].as_u64().unwrap())
        .collect();
    assert_eq!(horizons, [1, 2, 3]);
}
