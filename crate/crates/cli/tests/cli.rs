use std::path::Path;
use std::process::{Command, Output};

fn srm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srm-explore")).args(args).output().expect("binary runs")
}

/// A 6×6 room inside a one-cell wall.
fn write_room(dir: &Path) -> String {
    let mut rows = vec!["\"########\"".to_string()];
    rows.extend((0..6).map(|_| "\"#......#\"".to_string()));
    rows.push("\"########\"".to_string());
    let text = format!(
        r#"{{"name": "room", "resolution": 0.4, "grid": [{}],
            "regions": [{{"label": "r", "kind": "room", "rect": [1, 1, 6, 6]}}],
            "start": [1.6, 1.6], "sensor": {{"beams": 90, "max_range_m": 3.0}}, "seed": 3}}"#,
        rows.join(",")
    );
    let path = dir.join("room.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_outputs_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_room(dir.path());
    let out_dir = dir.path().join("out");
    let out = srm(&["run", "--scenario", &sc, "--strategy", "srm", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("status=complete"), "{stdout}");
    for f in ["metrics.csv", "decisions.jsonl", "trajectory.csv", "map.pgm", "map.json", "graph.json", "summary.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let plots = dir.path().join("plots");
    let out = srm(&["plot", "--in", out_dir.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(plots.join("entropy.svg").is_file() && plots.join("map.svg").is_file());
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_room(dir.path());
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    for args in [
        vec!["run", "--scenario", &sc, "--strategy", "bogus"],
        vec!["run", "--scenario", "/nonexistent/scenario.json"],
        vec!["run", "--scenario", &sc, "--strategy", "combined", "--gamma1", "-1"],
        vec!["compare", "--scenarios", &sc, "--seeds", "4", "--out", o],
        vec!["compare", "--scenarios", &sc, "--seeds", "5..2", "--out", o],
        vec!["frobnicate"],
    ] {
        assert_eq!(srm(&args).status.code(), Some(1), "{args:?}");
    }
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = srm(&["plot", "--in", empty.to_str().unwrap(), "--out", o]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new(o).exists());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_room(dir.path());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = srm(&["run", "--scenario", &sc, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_room(dir.path());
    let o = dir.path().join("cmp");
    let out = srm(&["compare", "--scenarios", &sc, "--strategies", "srm,combined(1,0.5)", "--seeds", "1,2", "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(o.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.contains("\"combined(1,0.5)\""), "{summary}");
    assert_eq!(std::fs::read_to_string(o.join("runs.csv")).unwrap().lines().count(), 5);
}
