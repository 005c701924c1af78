use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evogame::payoff::{Axis, PayoffModel};
use evogame::{StrategySpace, TrajectoryDataset};

fn evogame(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evogame"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = evogame(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    evogame(dir, args).status.code().expect("exit code")
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn simulate_is_reproducible_and_the_echoed_config_replays_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--realizations", "3", "--seed", "42", "--out", "a.ndjson"]);
    ok(d, &["simulate", "--realizations", "3", "--seed", "42", "--out", "b.ndjson"]);
    let a = std::fs::read(path(d, "a.ndjson")).unwrap();
    assert_eq!(a, std::fs::read(path(d, "b.ndjson")).unwrap());

    ok(d, &["--config", "a.ndjson.config.json", "simulate", "--out", "c.ndjson"]);
    assert_eq!(a, std::fs::read(path(d, "c.ndjson")).unwrap());

    ok(d, &["simulate", "--realizations", "3", "--seed", "43", "--out", "e.ndjson"]);
    assert_ne!(a, std::fs::read(path(d, "e.ndjson")).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--threads", "1", "simulate", "--realizations", "4", "--out", "a.ndjson"]);
    ok(d, &["--threads", "3", "simulate", "--realizations", "4", "--out", "b.ndjson"]);
    assert_eq!(
        std::fs::read(path(d, "a.ndjson")).unwrap(),
        std::fs::read(path(d, "b.ndjson")).unwrap()
    );
}

#[test]
fn rollout_under_the_generator_reproduces_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--realizations", "2", "--steps", "20", "--out", "d.ndjson"]);
    let stdout = ok(
        d,
        &["rollout", "--payoff", "builtin:origin_repulsion_1d", "--dataset", "d.ndjson", "--out", "r.ndjson"],
    );
    assert!(stdout.contains("gap to the dataset at matching times 0.000e0"), "{stdout}");
    let a = TrajectoryDataset::load(path(d, "d.ndjson")).unwrap();
    let b = TrajectoryDataset::load(path(d, "r.ndjson")).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (s, t) in a.snapshots.iter().zip(&b.snapshots) {
        for (x, y) in s.x.as_slice().iter().zip(t.x.as_slice()) {
            assert!((x - y).abs() <= 1e-8);
        }
    }
}

#[test]
fn fitted_payoff_rolls_out_close_to_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--realizations", "10", "--seed", "3", "--out", "d.ndjson"]);
    ok(d, &["infer", "--dataset", "d.ndjson", "--out", "p.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path(d, "p.json.report.json")).unwrap()).unwrap();
    assert!(report["final_data_term"].as_f64().unwrap() <= 1e-4);

    ok(d, &["rollout", "--payoff", "p.json", "--dataset", "d.ndjson", "--out", "r.ndjson"]);
    let a = TrajectoryDataset::load(path(d, "d.ndjson")).unwrap();
    let b = TrajectoryDataset::load(path(d, "r.ndjson")).unwrap();
    let gap = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(s, t)| evogame::metrics::norm_n(&s.x, &t.x).unwrap())
        .fold(0.0, f64::max);
    assert!(gap <= 0.02, "gap {gap}");
}

#[test]
fn zero_payoff_rollout_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = PayoffModel::split(
        StrategySpace::scalar(&[-1.0, 1.0]).unwrap(),
        vec![Axis::bounded(-1.0, 1.0, 5)],
        vec![Axis::bounded(-2.0, 2.0, 5)],
    )
    .unwrap();
    model.save(path(d, "zero.json")).unwrap();
    ok(d, &["rollout", "--payoff", "zero.json", "--steps", "20", "--out", "r.ndjson"]);
    let ds = TrajectoryDataset::load(path(d, "r.ndjson")).unwrap();
    let first = ds.snapshots[0].x.as_slice().to_vec();
    for s in &ds.snapshots {
        assert_eq!(s.x.as_slice(), first.as_slice());
        assert!(s.v.as_slice().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn reconstruct_round_trips_and_rejects_velocities_outside_the_hull() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--realizations", "2", "--out", "d.ndjson"]);
    ok(d, &["reconstruct", "--dataset", "d.ndjson", "--out", "r.ndjson"]);
    let orig = TrajectoryDataset::load(path(d, "d.ndjson")).unwrap();
    let rec = TrajectoryDataset::load(path(d, "r.ndjson")).unwrap();
    for (a, b) in orig.snapshots.iter().zip(&rec.snapshots) {
        for (sa, sb) in a.sigma.as_ref().unwrap().iter().zip(b.sigma.as_ref().unwrap()) {
            for (p, q) in sa.iter().zip(sb.iter()) {
                assert!((p - q).abs() <= 1e-8);
            }
        }
    }

    assert_eq!(
        code(d, &["reconstruct", "--dataset", "d.ndjson", "--strategies=-0.1,0.1", "--out", "x.ndjson"]),
        5
    );
    assert!(!path(d, "x.ndjson").exists());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--model", "newtonian", "--out", "n.ndjson"]);
    assert_eq!(code(d, &["infer", "--dataset", "n.ndjson", "--functional", "sigma"]), 2);
    assert_eq!(code(d, &["simulate", "--model", "nope"]), 2);
    assert_eq!(code(d, &["simulate", "--dt", "-1"]), 2);
    assert_eq!(code(d, &["infer"]), 2);
    assert_eq!(code(d, &["rollout"]), 2);
    assert_eq!(code(d, &["simulate", "--payoff", "builtin:nope"]), 2);
    assert_eq!(code(d, &["validate", "nope"]), 2);

    std::fs::write(path(d, "bad.json"), r#"{"agents": 4, "typo": 1}"#).unwrap();
    assert_eq!(code(d, &["--config", "bad.json", "simulate"]), 2);
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(path(d, "c.json"), r#"{"agents": 4, "steps": 6, "subsample": 3}"#).unwrap();
    ok(d, &["--config", "c.json", "simulate", "--n", "5", "--out", "d.ndjson"]);
    let ds = TrajectoryDataset::load(path(d, "d.ndjson")).unwrap();
    assert_eq!(ds.meta.agents, 5);
    assert_eq!(ds.meta.steps, 6);
    assert_eq!(ds.snapshots.len(), 2);
    let echoed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path(d, "d.ndjson.config.json")).unwrap()).unwrap();
    assert_eq!(echoed["agents"], 5);
    assert_eq!(echoed["subsample"], 3);
}

#[test]
fn pedestrian_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--model", "pedestrian", "--realizations", "2", "--steps", "100", "--out", "p.ndjson"]);
    let ds = TrajectoryDataset::load(path(d, "p.ndjson")).unwrap();
    assert!(ds.has_headings());
    ok(d, &["infer", "--dataset", "p.ndjson", "--max-iter", "20", "--out", "pay.json"]);
    let model = PayoffModel::load(path(d, "pay.json")).unwrap();
    assert_eq!(model.grids().len(), 2);
}

#[test]
fn validate_writes_a_passing_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["validate", "gradcheck", "pinsker", "--out", "v.csv"]);
    let text = std::fs::read_to_string(path(d, "v.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("task,metric,value,threshold,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 4);
    assert!(rows.iter().all(|r| r.ends_with(",true")));

    ok(d, &["validate", "pinsker", "--format", "json", "--out", "v.json"]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path(d, "v.json")).unwrap()).unwrap();
    assert!(v.as_array().unwrap().iter().all(|r| r["pass"] == true));
}
