use std::path::Path;
use std::process::{Command, Output};

use dfp_cli::export::{CONTROL_SAMPLES_HEADER, COSTS_BY_STAGE_HEADER, RICCATI_HEADER, TRAJECTORY_ERRORS_HEADER};

fn dfp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfp")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, lq_extra: &str, jobs: usize) -> String {
    let text = format!(
        r#"{{
  "lq": {{"a": 1, "q": 0, "epsilon": 1, "c": 1, "sigma": 1, "rho": 0 {lq_extra},
         "dims": {{"n_players": 2, "state_dim": 1, "control_dim": 1, "noise_dim": 1, "horizon": 1, "n_steps": 5}},
         "x0": [0.5, 1.5]}},
  "run": {{"max_stages": 2, "n_paths": 256, "n_eval_paths": 300, "seed": 5, "jobs": {jobs},
          "train": {{"epochs": 5, "minibatch": 64}}, "policy": {{"hidden_width": 4}}}},
  "oracle_grid": 1000
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn stages_without_timing(dir: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(dir.join("stages.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_s");
            v
        })
        .collect()
}

#[test]
fn check_reports_the_factor() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", 1);
    let out = dfp(&["check", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("factor"), "{text}");
    assert!(text.contains("converges"));
}

#[test]
fn invalid_coupling_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", 1);
    // q^2 > epsilon.
    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"q\": 0", "\"q\": 2");
    std::fs::write(&cfg, text).unwrap();
    let out = dfp(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("q"));
}

#[test]
fn unknown_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#", "gamma": 1"#, 1);
    let out = dfp(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_artifacts_with_fixed_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", 1);
    let run = tmp.path().join("nested/run");
    let out = dfp(&["train", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "stages.jsonl", "run.json", "evaluation.json", "policy_player0.json", "policy_player1.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert_eq!(stages_without_timing(&run).len(), 2);
    assert_eq!(first_line(&run.join("costs_by_stage.csv")), COSTS_BY_STAGE_HEADER.join(","));
    assert_eq!(first_line(&run.join("trajectory_errors.csv")), TRAJECTORY_ERRORS_HEADER.join(","));
    assert_eq!(first_line(&run.join("control_samples.csv")), CONTROL_SAMPLES_HEADER.join(","));

    let evaluation: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(evaluation["n_eval_paths"], 300);
    assert_eq!(evaluation["passes"], 2);

    // Re-evaluating the saved checkpoints gives the same report.
    let again = dfp(&["evaluate", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert!(again.status.success());
    let second: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(evaluation, second);

    // A checkpoint from another format version is refused.
    let ckpt = run.join("policy_player1.json");
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ckpt).unwrap()).unwrap();
    value["format_version"] = 99.into();
    std::fs::write(&ckpt, value.to_string()).unwrap();
    let out = dfp(&["evaluate", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_without_checkpoints_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", 1);
    let out = dfp(&["evaluate", "--config", &cfg, "--out", tmp.path().join("empty").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_same_stages_at_any_job_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", 1);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(dfp(&["train", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(dfp(&["train", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "2"]).status.success());
    assert_eq!(stages_without_timing(&a), stages_without_timing(&b));
    let c = tmp.path().join("c");
    assert!(dfp(&["train", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "6"]).status.success());
    assert_ne!(stages_without_timing(&a), stages_without_timing(&c));
}

#[test]
fn oracle_writes_riccati_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", 1);
    let out_dir = tmp.path().join("oracle");
    let out = dfp(&["oracle", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_dir.join("riccati.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RICCATI_HEADER.join(","));
    assert_eq!(lines.count(), 1001);
}
