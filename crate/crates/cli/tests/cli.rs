use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SCENARIO: &str = r#"
name = "ghz-test"
seed = 11

[polarization]
n_photons = 2
epsilon = 0.1

[meter]
family = "sum_gaussian"

[coupling]
g = 1e-3
operator = "X"

[grid]
points = 512

[estimation]
n_events = 2000
replications = 20

[sweep]
photon_numbers = [1, 2, 4]
"#;

fn wva_sim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wva-sim"));
    cmd.args(args).env_remove("WVA_SIM_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn scenario_file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_task(task: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![task, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    wva_sim(&args, &[])
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listed_files(dir: &Path) -> BTreeSet<String> {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap().to_string())
        .collect()
}

fn files_on_disk(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect()
}

#[test]
fn empty_scenario_is_a_positioned_parse_error() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "empty.toml", "");
    let out = run_task("simulate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "parse");
    assert_eq!((err["line"].as_u64(), err["column"].as_u64()), (Some(1), Some(1)));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn syntax_errors_report_line_and_column() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "bad.toml", "name = \"x\"\n\n[polarization\n");
    let out = run_task("fisher", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["line"], 3);
    assert!(err["message"].as_str().unwrap().contains("bad.toml:3:"));
}

#[test]
fn unknown_keys_and_missing_files_are_parse_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "typo.toml", &SCENARIO.replace("epsilon", "epsilom"));
    assert_eq!(run_task("simulate", &cfg, dir.path(), &[]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    let out = run_task("simulate", &missing, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "parse");
}

#[test]
fn precondition_violations_are_aggregated() {
    let dir = TempDir::new().unwrap();
    let text = SCENARIO
        .replace("n_photons = 2", "n_photons = 3")
        .replace("epsilon = 0.1", "epsilon = 0.1\nk = 0.2")
        .replace("points = 512", "points = 16");
    let cfg = scenario_file(&dir, "pre.toml", &text);
    let out = run_task("simulate", &cfg, &dir.path().join("out"), &["--engine", "grid"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "precondition");
    assert_eq!(err["problems"].as_array().unwrap().len(), 3, "{err}");
}

#[test]
fn orthogonal_postselection_is_a_precondition_violation() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "orth.toml", &SCENARIO.replace("epsilon = 0.1", "epsilon = 0.0"));
    let out = run_task("fisher", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("orthogonal"));
}

#[test]
fn thread_variable_must_be_a_positive_integer() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", SCENARIO);
    let out_dir = dir.path().join("out");
    let args = ["fisher", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    let out = wva_sim(&args, &[("WVA_SIM_THREADS", "0")]);
    assert_eq!(out.status.code(), Some(3));
    assert!(wva_sim(&args, &[("WVA_SIM_THREADS", "1")]).status.success());
}

#[test]
fn simulate_writes_two_column_tables_and_a_complete_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", SCENARIO);
    let out_dir = dir.path().join("sim");
    let out = run_task("simulate", &cfg, &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(listed_files(&out_dir), files_on_disk(&out_dir));
    let table = fs::read_to_string(out_dir.join("coincidences.csv")).unwrap();
    let mut lines = table.split("\r\n");
    assert_eq!(lines.next(), Some("s,density"));
    assert_eq!(table.split("\r\n").filter(|l| !l.is_empty()).count(), 513);

    let summary: Value = serde_json::from_slice(&fs::read(out_dir.join("coincidences.json")).unwrap()).unwrap();
    let shift = summary["displacement"].as_f64().unwrap();
    let expected = -2e-3 / 0.1f64.tan();
    assert!((shift / expected - 1.0).abs() < 1e-2, "{shift}");

    let m = manifest(&out_dir);
    assert_eq!(m["task"], "simulate");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["engine"], "exact");
    assert_eq!(m["scenario"]["polarization"]["n_photons"], 2);
    let svg = fs::read_to_string(out_dir.join("coincidences.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("<image"));
}

#[test]
fn single_photon_simulation_adds_the_position_table() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", &SCENARIO.replace("n_photons = 2", "n_photons = 1"));
    let out_dir = dir.path().join("sim");
    assert!(run_task("simulate", &cfg, &out_dir, &["--engine", "grid"]).status.success());
    assert!(listed_files(&out_dir).contains("position.csv"));
    assert_eq!(listed_files(&out_dir), files_on_disk(&out_dir));
}

#[test]
fn flags_override_scenario_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", SCENARIO);
    let out_dir = dir.path().join("f");
    assert!(run_task("fisher", &cfg, &out_dir, &["--engine", "weak", "--seed", "99"]).status.success());
    let m = manifest(&out_dir);
    assert_eq!((m["engine"].as_str(), m["seed"].as_u64()), (Some("weak"), Some(99)));
    let report: Value = serde_json::from_slice(&fs::read(out_dir.join("fisher.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["engine"], "weak");
    assert!(report["max_relative_spread"].as_f64().unwrap() < 1e-3);
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", SCENARIO);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert!(run_task("mc-estimate", &cfg, out, &[]).status.success());
    }
    for name in listed_files(&a).iter().chain(["manifest.json".to_string()].iter()) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }

    let c = dir.path().join("c");
    assert!(run_task("mc-estimate", &cfg, &c, &["--seed", "12"]).status.success());
    assert_ne!(
        fs::read(a.join("estimates.csv")).unwrap(),
        fs::read(c.join("estimates.csv")).unwrap()
    );
}

#[test]
fn sweep_plots_spread_against_photon_number() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", SCENARIO);
    let out_dir = dir.path().join("sweep");
    assert!(run_task("sweep", &cfg, &out_dir, &[]).status.success());
    assert_eq!(
        listed_files(&out_dir),
        ["sweep.csv", "sweep.json", "sweep.svg"].iter().map(|s| s.to_string()).collect()
    );
    assert_eq!(listed_files(&out_dir), files_on_disk(&out_dir));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let summary: Value = serde_json::from_slice(&fs::read(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert!((summary["slope"].as_f64().unwrap() + 1.0).abs() < 0.05);
    let svg = fs::read_to_string(out_dir.join("sweep.svg")).unwrap();
    assert!(svg.contains("1e-3") && svg.contains("photon number N"));
}

#[test]
fn validate_reports_every_invariant() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(&dir, "s.toml", SCENARIO);
    let out_dir = dir.path().join("v");
    let out = run_task("validate", &cfg, &out_dir, &[]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    for name in [
        "engine-matrix",
        "spdc-width-invariance",
        "weak-breakdown",
        "scenario-postselection",
        "scenario-exact-vs-grid",
    ] {
        assert!(stdout.contains(&format!("PASS {name}:")), "{name} missing in\n{stdout}");
    }
    assert!(stdout.contains("5 of 5 invariants passed"));
    let matrix = fs::read_to_string(out_dir.join("engine_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 31);
    assert_eq!(listed_files(&out_dir), files_on_disk(&out_dir));
}
