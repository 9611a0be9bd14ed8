use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gainloss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gainloss"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const QUARTIC: &str = r#"
[model]
name = "quartic_translational"
params = { omega0 = 1.4142135623730951, beta0 = 1.0, a = 1.0 }
[initial]
coords = "z"
q = [0.0, 1.0]
v = [1.0, 0.0]
[simulate]
t_end = 20.0
"#;

const RUNAWAY: &str = r#"
[model]
name = "bateman"
params = { omega = 1.0, gamma = 2.0, s = 1.0 }
[initial]
coords = "x"
q = [1.0, 0.5]
v = [0.0, 0.0]
[simulate]
t_end = 100.0
"#;

#[test]
fn simulate_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), QUARTIC).unwrap();
    let out = gainloss(
        dir.path(),
        &["--config", "run.toml", "simulate", "--out", "traj.csv"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = json(&out);
    assert_eq!(summary["reached"], 20.0);
    assert!(summary["blow_up"].is_null());
    for (name, drift) in summary["drifts"].as_object().unwrap() {
        assert!(drift.as_f64().unwrap() < 1e-8, "{name} drifted by {drift}");
    }
    let csv = fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,zp1,zm1,dzp1,dzm1,H,Pi1");
    assert_eq!(csv.lines().count(), 1 + 201);
}

#[test]
fn blow_up_exits_three_with_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), RUNAWAY).unwrap();
    let out = gainloss(
        dir.path(),
        &["--config", "run.toml", "simulate", "--out", "traj.csv"],
    );
    assert_eq!(out.status.code(), Some(3));
    let summary = json(&out);
    assert_eq!(summary["blow_up"]["kind"], "blow_up");
    assert!(summary["reached"].as_f64().unwrap() < 100.0);
    assert!(
        fs::read_to_string(dir.path().join("traj.csv"))
            .unwrap()
            .lines()
            .count()
            > 2
    );
}

#[test]
fn verify_case_reports_required_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = gainloss(dir.path(), &["verify", "--case", "trans-cn"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&out);
    for key in ["case", "params", "residual", "stability", "period"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    assert_eq!(report["case"], "trans-cn");
    assert!(report["residual"]["max_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn injected_fault_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = gainloss(dir.path(), &["verify", "--inject-fault", "structural"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scan_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "scan",
        "--case",
        "trans-cn",
        "--axis",
        "omega0=1.2:2:3",
        "--axis",
        "beta0=0.5:1:2",
    ];
    let a = gainloss(dir.path(), &args);
    let b = gainloss(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 7);
    for (i, row) in rows[1..].iter().enumerate() {
        assert!(row.starts_with(&format!("{i},")));
    }
}

#[test]
fn qes_reports_two_level_energies() {
    let dir = tempfile::tempdir().unwrap();
    let out = gainloss(
        dir.path(),
        &[
            "qes", "--n", "1", "--atilde", "1", "--btilde", "0.5", "--p", "0",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let mut e: Vec<f64> = report["E"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    e.sort_by(f64::total_cmp);
    // −2b̃ ∓ 2√(b̃² + 2ã(1 + 2p))
    assert!(
        (e[0] + 4.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12,
        "{e:?}"
    );
    assert!(report["normalizable"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v == true));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        gainloss(dir.path(), &["verify", "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        gainloss(dir.path(), &["scan", "--axis", "omega0=2:1"])
            .status
            .code(),
        Some(2)
    );
}
