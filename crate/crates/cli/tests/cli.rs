//! End-to-end checks through the installed binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fleetfair"))
}

fn demo_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/demo.toml")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_demo_scenario_reports_cost_sixteen() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario"])
        .arg(demo_scenario())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("total cost: 16"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("16,0,2,2,"));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 21, "header plus one row per tick");
}

#[test]
fn missing_scenario_exits_two_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = bin()
        .args(["run", "--scenario", "nowhere/missing.toml", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "no partial outputs on failure");
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["run", "--bogus-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn invalid_scenario_content_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[network]\nnot_a_field = 1\n").unwrap();
    let out = bin()
        .args(["run", "--scenario"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn small_sweep_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("sweep.toml");
    std::fs::write(
        &path,
        r#"
[network]
grid = { rows = 6, cols = 6, weight_min = 4, weight_max = 12, label_density = 1.0, seed = 2 }

[fleet]
count = 4
capacity = 2
seed = 5

[params]
horizon = 400
ticks_per_minute = 20
lambda_ko = 5000.0
lambda = 0.5
alpha = 1.0

[generator]
seed = 11
count = 8
"#,
    )
    .unwrap();
    path
}

#[test]
fn ab_sweep_writes_paired_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_sweep_scenario(dir.path());
    let run_once = |out_name: &str| -> String {
        let out_dir = dir.path().join(out_name);
        let out = bin()
            .args(["ab", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out_dir)
            .args(["--sweep-vehicles", "3,5", "--reps", "2", "--seed", "9"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_dir.join("ab_report.csv")).unwrap()
    };
    let report = run_once("a");

    // 2 points x 2 reps x 2 arms plus 2 mean rows per point and a header.
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 1 + 8 + 4);
    assert!(lines[0].starts_with("point,rep,arm,stream_hash"));
    assert_eq!(report.matches(",mean,").count(), 4);

    // Paired rows share the request-stream hash.
    for pair in lines[1..9].chunks(2) {
        let fair: Vec<&str> = pair[0].split(',').collect();
        let base: Vec<&str> = pair[1].split(',').collect();
        assert_eq!(fair[2], "fair");
        assert_eq!(base[2], "baseline");
        assert_eq!(fair[3], base[3], "paired arms must hash the same stream");
    }

    // Byte-identical on a re-run with the same seed.
    let again = run_once("b");
    assert_eq!(report, again);
}

#[test]
fn ab_with_zeroed_fair_arm_matches_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_sweep_scenario(dir.path());
    let out_dir = dir.path().join("zero");
    let out = bin()
        .args(["ab", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out_dir)
        .args([
            "--sweep-vehicles",
            "4",
            "--reps",
            "2",
            "--lambda",
            "0",
            "--alpha",
            "0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = std::fs::read_to_string(out_dir.join("ab_report.csv")).unwrap();
    for pair in report.lines().skip(1).take(4).collect::<Vec<_>>().chunks(2) {
        let fair = pair[0].replace("fair", "ARM");
        let base = pair[1].replace("baseline", "ARM");
        assert_eq!(fair, base, "identical parameters give identical metrics");
    }
}

#[test]
fn ab_requires_exactly_one_sweep_axis() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_sweep_scenario(dir.path());
    let out = bin()
        .args(["ab", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_formula_reports_automaton_stats() {
    let out = bin()
        .args(["check-formula", "F (a & F b)", "--export"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("automaton states: 3"));
    assert!(text.contains("atoms: a, b"));
    assert!(text.contains("->"));

    let out = bin().args(["check-formula", "! (a & b)"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_network_output_is_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.net");
    let out = bin()
        .args(["gen-network", "--rows", "3", "--cols", "4", "--seed", "7", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let net = fleetfair_core::network::load_network(&text).unwrap();
    assert_eq!(net.num_states(), 12);
}
