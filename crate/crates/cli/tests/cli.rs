use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = r#"{
  "schema_version": 1,
  "train": { "lr": 0.005, "weight_decay": 0.0005, "epochs": 40, "hidden": 16, "seed": 0 },
  "attack": { "max_iters": 200, "patience": 50 },
  "max_requests": 1,
  "trials": 2,
  "seed": 3
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unlearnprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let p = dir.join("c.json");
    std::fs::write(&p, QUICK).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_config_exits_with_usage_status() {
    let out = run(&["experiment", "--config", "/nonexistent/c.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn unknown_flag_exits_with_usage_status() {
    assert_eq!(run(&["experiment", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["attack", "--mode", "grey"]).status.code(), Some(2));
}

#[test]
fn malformed_config_exits_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{ \"trials\": ").unwrap();
    assert_eq!(run(&["experiment", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn selfcheck_reports_counts() {
    let out = run(&["selfcheck"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("7 passed, 0 failed"), "{stdout}");
}

#[test]
fn experiment_writes_results_and_config_echo_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = run(&["experiment", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("config.json").exists());
    }
    let a = std::fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("dataset,backbone,policy,removal_size,mode,baseline,trial,"));
    assert_eq!(a.lines().count(), 1 + 3 * 3);
}

#[test]
fn stages_chain_through_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = out_dir.to_str().unwrap();
    for stage in ["gen", "train", "unlearn", "attack", "eval"] {
        let o = run(&[stage, "--config", &cfg, "--out", out, "--policy", "worst", "--seed", "5"]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "nodes.csv",
        "edges.csv",
        "model.json",
        "unlearn/grad_diff.bin",
        "unlearn/grad_un.bin",
        "unlearn/counts.json",
        "attack/toxin/features.csv",
        "metrics.json",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["toxin"]["att_acc"].is_number());
}

#[test]
fn attack_without_earlier_stages_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["attack", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
