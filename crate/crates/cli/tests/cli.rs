use std::process::{Command, Output};

fn trunclap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trunclap")).args(args).output().unwrap()
}

#[test]
fn oracle_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = trunclap(&["oracle", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rows.as_array().unwrap().len() >= 14);
    assert!(dir.path().join("oracle.json").exists());
}

#[test]
fn empty_h_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let cfg = r#"
name = "bad"
mode = "solve"

[problem]
operator = { kind = "upper_partial_sum", k = 1 }
k = 1
gamma = 1.0
alpha = 0.0
beta = 0.0
c1 = 1.0
c2 = 1.0
domain = { centers = [[0.0, 0.0]], radius = 1.0, dimension = 2 }

[grid]
h = []
"#;
    std::fs::write(&path, cfg).unwrap();
    let out = trunclap(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid.h"), "{err}");
}

#[test]
fn subcommand_must_match_mode() {
    let out = trunclap(&["probe", "--preset", "shooting"]);
    assert_eq!(out.status.code(), Some(1));
    let out = trunclap(&["solve", "--preset", "no_such_preset"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_is_deterministic_and_writes_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path| trunclap(&["solve", "--preset", "two_ball_barriers", "--seed", "3", "--out", dir.to_str().unwrap()]);
    let (x, y) = (run(a.path()), run(b.path()));
    assert_eq!(x.status.code(), Some(0), "{}", String::from_utf8_lossy(&x.stderr));
    assert_eq!(x.stdout, y.stdout);
    let summary: serde_json::Value = serde_json::from_slice(&x.stdout).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(
        std::fs::read(a.path().join("summary.json")).unwrap(),
        std::fs::read(b.path().join("summary.json")).unwrap()
    );
}
