use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FAST_CONFIG: &str = r#"{
  "kernel": { "forest_trees": 10 },
  "nystrom": { "trials": 20 },
  "bo": { "iterations": 4, "candidates": { "n_uniform": 300, "n_local": 100 },
          "linebo": { "line_points": 50 } },
  "cli": { "n_prior": 12 }
}"#;

/// Runs `tuner` inside `dir` so that every recorded path is relative.
fn tuner(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tuner"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("tuner binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tuner(dir, args);
    assert!(
        out.status.success(),
        "tuner {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    tuner(dir, args).status.code().expect("exit code")
}

fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("fast.json"), FAST_CONFIG).unwrap();
    dir
}

fn run_pipeline(dir: &Path, out: &str) {
    let base = ["--config", "fast.json", "--out", out, "--seed", "7", "--threads", "1"];
    for cmd in [&["prior"][..], &["select"], &["tune"], &["simulate", "--gains", &format!("{out}/best.json")]] {
        let args: Vec<&str> = cmd.iter().copied().chain(base).collect();
        ok(dir, &args);
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn pipeline_writes_every_artifact() {
    let ws = workspace();
    let dir = ws.path();
    run_pipeline(dir, "run");
    let run = dir.join("run");

    assert_eq!(header(&run.join("prior.csv")), "p1,p2,p3,p4,p5,p6,p7,p8,p9,P");
    assert_eq!(fs::read_to_string(run.join("prior.csv")).unwrap().lines().count(), 13);
    assert_eq!(
        header(&run.join("trace.csv")),
        "iter,p1,p2,p3,p4,p5,p6,p7,p8,p9,P,safe,lb_at_selection,best_so_far,stalled"
    );
    assert_eq!(fs::read_to_string(run.join("trace.csv")).unwrap().lines().count(), 5);
    assert_eq!(header(&run.join("trajectory.csv")), "t,x,z,theta,x_ref,z_ref,theta_ref,T1,T2");

    let selection = json(&run.join("selection.json"));
    assert_eq!(selection["orders"].as_array().unwrap().len(), 9);
    assert_eq!(selection["selected"].as_array().unwrap().len(), 3);

    let best = json(&run.join("best.json"));
    let summary = json(&run.join("summary.json"));
    assert_eq!(best["gains"], summary["gains"]);
    assert_eq!(best["performance"], summary["performance"]);

    let manifest = json(&run.join("manifest.json"));
    let commands: Vec<&str> = manifest["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["command"].as_str().unwrap())
        .collect();
    assert_eq!(commands, ["prior", "select", "tune", "simulate"]);
    assert_eq!(manifest["runs"][2]["inputs"], serde_json::json!(["prior.csv", "selection.json"]));
    assert_eq!(manifest["runs"][3]["inputs"], serde_json::json!(["best.json"]));
    for run in manifest["runs"].as_array().unwrap() {
        assert_eq!(run["seed"], 7);
        assert_eq!(run["threads"], 1);
        assert!(run["config"].is_object());
    }
}

#[test]
fn single_thread_pipeline_is_byte_identical() {
    let ws = workspace();
    let dir = ws.path();
    run_pipeline(dir, "a");
    run_pipeline(dir, "b");
    for name in ["prior.csv", "selection.json", "trace.csv", "best.json", "trajectory.csv", "summary.json"] {
        let a = fs::read(dir.join("a").join(name)).unwrap();
        let b = fs::read(dir.join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }
}

#[test]
fn rerunning_a_command_replaces_its_manifest_entry() {
    let ws = workspace();
    let dir = ws.path();
    let args = ["prior", "--config", "fast.json", "--out", "o"];
    ok(dir, &args);
    ok(dir, &args);
    let manifest = json(&dir.join("o/manifest.json"));
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn baselines_and_explicit_orders_need_no_selection() {
    let ws = workspace();
    let dir = ws.path();
    ok(dir, &["prior", "--config", "fast.json", "--out", "o"]);
    for method in ["standard", "linebo"] {
        let out = ok(dir, &["tune", "--config", "fast.json", "--out", "o", "--method", method]);
        assert!(out.contains(method), "{out}");
        assert_eq!(json(&dir.join("o/best.json"))["method"], method);
    }
    ok(
        dir,
        &["tune", "--config", "fast.json", "--out", "o", "--method", "unconstrained", "--kernel-orders", "1,2", "--iterations", "2"],
    );
    assert_eq!(fs::read_to_string(dir.join("o/trace.csv")).unwrap().lines().count(), 3);
}

#[test]
fn report_summarizes_runs() {
    let ws = workspace();
    let dir = ws.path();
    ok(dir, &["prior", "--config", "fast.json", "--out", "p"]);
    for (out, method) in [("s", "standard"), ("l", "linebo")] {
        ok(dir, &["tune", "--config", "fast.json", "--out", out, "--prior", "p/prior.csv", "--method", method]);
    }
    let table = ok(dir, &["report", "s", "l", "--out", "r"]);
    assert!(table.contains("standard") && table.contains("linebo"), "{table}");
    let csv = fs::read_to_string(dir.join("r/report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,run,iteration,best_so_far,unsafe_count");
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    assert!(dir.join("r/report.txt").exists());
}

#[test]
fn simulate_accepts_inline_gains() {
    let ws = workspace();
    let dir = ws.path();
    ok(dir, &["simulate", "--out", "s", "--gains", "2,0,2,4,0.2,3,10,0,5"]);
    let summary = json(&dir.join("s/summary.json"));
    assert_eq!(summary["terminated_early"], false);
    assert!(summary["performance"].as_f64().unwrap() > 0.0);
    let rows = fs::read_to_string(dir.join("s/trajectory.csv")).unwrap().lines().count();
    assert_eq!(rows as u64, 1 + summary["steps"].as_u64().unwrap());
}

#[test]
fn argument_and_config_errors_exit_with_two() {
    let ws = workspace();
    let dir = ws.path();
    fs::write(dir.join("typo.json"), r#"{ "bo": { "itterations": 3 } }"#).unwrap();
    fs::write(dir.join("bad.json"), r#"{ "kernel": { "lengthscale": -1 } }"#).unwrap();
    assert_eq!(code(dir, &["prior", "--config", "typo.json"]), 2);
    assert_eq!(code(dir, &["prior", "--config", "bad.json"]), 2);
    assert_eq!(code(dir, &["frobnicate"]), 2);
    assert_eq!(code(dir, &["tune", "--method", "bogus"]), 2);
    assert_eq!(code(dir, &["tune", "--kernel-orders", "1,12", "--method", "ours"]), 2);
    assert_eq!(code(dir, &["simulate", "--gains", "1,2,3"]), 2);
    assert_eq!(code(dir, &["simulate", "--gains", "99,0,2,4,0.2,3,10,0,5"]), 2);

    let stderr = String::from_utf8(tuner(dir, &["prior", "--config", "typo.json"]).stderr).unwrap();
    assert!(stderr.contains("itterations"), "{stderr}");
}

#[test]
fn malformed_inputs_are_config_errors() {
    let ws = workspace();
    let dir = ws.path();
    fs::write(dir.join("prior.csv"), "p1,p2,p3,p4,p5,p6,p7,p8,p9,P\n0.1,0.2,0.3\n").unwrap();
    let out = tuner(dir, &["select", "--config", "fast.json", "--prior", "prior.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
}

#[test]
fn missing_files_exit_with_three() {
    let ws = workspace();
    let dir = ws.path();
    assert_eq!(code(dir, &["prior", "--config", "absent.json"]), 3);
    assert_eq!(code(dir, &["select", "--prior", "absent.csv"]), 3);
    assert_eq!(code(dir, &["simulate", "--gains", "absent.json"]), 3);
    assert_eq!(code(dir, &["report", "nowhere"]), 3);
}
