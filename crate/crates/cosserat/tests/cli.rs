use std::path::Path;
use std::process::{Command, Output};

use cosserat::generators::Cantilever;
use cosserat::scene_file::{read_scene, write_scene};
use cosserat_core::validation::{shooting_reference, RodProblem};
use serde_json::Value;

fn cosserat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosserat"))
        .args(args)
        .env_remove("COSSERAT_THREADS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unloaded_scene_converges_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("rest.json");
    let out = dir.path().join("out");
    let o = cosserat(&["generate", "cantilever", "--param", "force=0", path(&scene)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cosserat(&["solve", path(&scene), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&out.join("report.json"));
    assert_eq!(report["converged"], Value::Bool(true));
    assert_eq!(report["iterations"], serde_json::json!([1]));
    for file in ["state.json", "residuals.csv", "centerline.csv"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
}

#[test]
fn cantilever_tip_matches_the_shooting_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = dir.path().join("cantilever.json");
    let out = dir.path().join("out");
    let scene = Cantilever {
        force: 3.0,
        ..Cantilever::default()
    }
    .scene();
    write_scene(&scene_path, &scene).unwrap();
    let o = cosserat(&["solve", path(&scene_path), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let oracle = shooting_reference(&RodProblem::from_scene(&scene).unwrap()).unwrap();
    let oracle_tip = oracle.last().unwrap().pose.position;
    let state = json(&out.join("state.json"));
    let tip = state["poses"].as_array().unwrap().last().unwrap()["position"].clone();
    let tip: Vec<f64> = serde_json::from_value(tip).unwrap();
    let gap = ((tip[0] - oracle_tip.x).powi(2) + (tip[1] - oracle_tip.y).powi(2) + (tip[2] - oracle_tip.z).powi(2)).sqrt();
    assert!(gap < 0.01 * oracle_tip.norm(), "tip {tip:?} vs oracle {oracle_tip}");
}

#[test]
fn unconstrained_scene_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = dir.path().join("free.json");
    let mut scene = Cantilever::default().scene();
    scene.constraints.clear();
    write_scene(&scene_path, &scene).unwrap();
    let o = cosserat(&["solve", path(&scene_path), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("can move rigidly"), "{}", stderr(&o));
}

#[test]
fn iteration_cap_exits_2_with_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = dir.path().join("cantilever.json");
    let out = dir.path().join("out");
    write_scene(&scene_path, &Cantilever::default().scene()).unwrap();
    let o = cosserat(&["solve", path(&scene_path), "--out", path(&out), "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report = json(&out.join("report.json"));
    assert_eq!(report["converged"], Value::Bool(false));
    assert!(report["error"].is_string());
    assert!(out.join("state.json").is_file() && out.join("centerline.csv").is_file());
}

#[test]
fn generator_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("x.json");
    let cases: [&[&str]; 4] = [
        &["generate", "nonexistent", path(&target)],
        &["generate", "lattice2d", "--param", "bogus=1", path(&target)],
        &["generate", "gridshell", "--param", "nodes=7", path(&target)],
        &["generate", "cantilever", "--param", "force", path(&target)],
    ];
    for args in cases {
        let o = cosserat(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!target.exists());
    }
}

#[test]
fn generated_scene_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("truss.json");
    let o = cosserat(&["generate", "truss3d", path(&target)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scene = read_scene(&target).unwrap();
    assert_eq!((scene.nodes.len(), scene.elements.len()), (99, 220));
}

#[test]
fn bench_tables_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|run| {
            let out = dir.path().join(run);
            let o = cosserat(&["bench", "path-independence", "--out", path(&out)]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            out
        })
        .collect();
    let mut csvs = 0;
    for entry in std::fs::read_dir(&runs[0]).unwrap() {
        let name = entry.unwrap().file_name();
        if Path::new(&name).extension().is_some_and(|e| e == "csv") {
            let a = std::fs::read(runs[0].join(&name)).unwrap();
            let b = std::fs::read(runs[1].join(&name)).unwrap();
            assert!(a == b, "{name:?} differs between runs");
            csvs += 1;
        }
    }
    assert!(csvs > 0);
}

#[test]
fn unknown_benchmark_and_bad_thread_count_exit_1() {
    let o = cosserat(&["bench", "nonexistent"]);
    assert_eq!(o.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cosserat"))
        .args(["bench", "path-independence", "--out", path(dir.path())])
        .env("COSSERAT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("COSSERAT_THREADS"), "{}", stderr(&o));
}
