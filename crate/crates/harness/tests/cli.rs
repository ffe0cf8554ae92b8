use std::path::Path;
use std::process::{Command, Output};

use samplize_sim::output::csv_body;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_samplize-sim"))
        .args(args)
        .env_remove("SAMPLIZE_SIM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SAMPLIZED: &str = r#"
method = "samplized"
epsilons = [0.4, 0.3]
trials = 6
seed = 17

[pair]
family = "psi_x"
x = 0.6
"#;

#[test]
fn usage_errors_exit_one() {
    let none = bin(&[]);
    assert_eq!(none.status.code(), Some(1));
    let unknown = bin(&["run", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("Usage"), "{}", stderr(&unknown));
    assert_eq!(bin(&["run"]).status.code(), Some(1));
    assert_eq!(bin(&["run", "--config", "/nonexistent/config.toml"]).status.code(), Some(1));
    assert_eq!(bin(&["fit", "--in", "x.csv", "--method", "swap"]).status.code(), Some(1));
    assert_eq!(bin(&["calibrate", "--state", "nonsense", "--delta", "0.1"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let help = bin(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for sub in ["run", "fit", "calibrate", "demo"] {
        assert!(stdout(&help).contains(sub));
    }
}

#[test]
fn invalid_config_reports_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "method = \"samplized\"\ntrials = 3\n");
    let out = bin(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pair") || stderr(&out).contains("epsilons"), "{}", stderr(&out));
}

#[test]
fn run_is_reproducible_across_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "exp.toml", SAMPLIZED);
    let mut bodies = Vec::new();
    for (i, workers) in ["1", "4", "4"].iter().enumerate() {
        let out_path = dir.path().join(format!("run{i}.csv"));
        let out = bin(&["run", "--config", &cfg, "--out", out_path.to_str().unwrap(), "--workers", workers]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = std::fs::read_to_string(&out_path).unwrap();
        assert!(text.starts_with("# samplize-sim"));
        assert!(dir.path().join(format!("run{i}.gp")).exists());
        assert!(dir.path().join(format!("run{i}.calibration.json")).exists());
        bodies.push(csv_body(&text));
    }
    assert_eq!(bodies[0].lines().count(), 13);
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[1], bodies[2]);
}

#[test]
fn run_to_stdout_and_json_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "exp.json",
        r#"{"method": "query", "pair": {"family": "zero_plus"}, "epsilons": [0.05], "trials": 3}"#,
    );
    let out = bin(&["run", "--config", &cfg, "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let body = csv_body(&stdout(&out));
    assert_eq!(body.lines().count(), 4);
    assert!(body.lines().skip(1).all(|l| l.starts_with("query,zero_plus,0.05,") && l.ends_with(",ok")));
}

#[test]
fn demo_then_fit() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("demo.csv");
    let demo = bin(&["demo", "--out", csv.to_str().unwrap(), "--trials", "4"]);
    assert_eq!(demo.status.code(), Some(0), "{}", stderr(&demo));
    let text = stdout(&demo);
    assert!(text.contains("T_true = 0.7071067812  F_true = 0.7071067812"), "{text}");
    assert!(text.contains("ledger="));

    let fit = bin(&["fit", "--in", csv.to_str().unwrap(), "--method", "samplized"]);
    assert_eq!(fit.status.code(), Some(0), "{}", stderr(&fit));
    let report = stdout(&fit);
    assert!(report.contains("points=4") && report.contains("slope="), "{report}");

    let wrong = bin(&["fit", "--in", csv.to_str().unwrap(), "--method", "folklore"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn calibrate_reports_rounds() {
    let out = bin(&["calibrate", "--state", "plus", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rounds"], 128);
    assert!(v["choi_distance"].as_f64().unwrap() <= 0.05);

    let capped = bin(&["calibrate", "--state", "haar:2:1", "--delta", "0.01", "--controlled", "--r-cap", "16"]);
    assert_eq!(capped.status.code(), Some(2));
    assert!(stderr(&capped).contains("cap"));
}
