use std::path::Path;
use std::process::{Command, Output};

fn delta(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delta"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DELTA_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn gen(dir: &Path) {
    ok(&delta(
        &["gen", "--seed", "5", "--queries", "400", "--updates", "400", "--out", "w"],
        dir,
    ));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    for out in ["a", "b"] {
        ok(&delta(
            &["run", "--trace", "w/trace.jsonl", "--policy", "vcover", "--seed", "1", "--out", out],
            dir.path(),
        ));
    }
    for file in ["summary.json", "series.csv", "decisions.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty(), "{file} empty");
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn compare_writes_a_row_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    ok(&delta(
        &["compare", "--trace", "w/trace.jsonl", "--seed", "1", "--policies", "nocache,replica", "--out", "c"],
        dir.path(),
    ));
    let table = std::fs::read_to_string(dir.path().join("c/comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(1).unwrap().starts_with("nocache,"));
}

#[test]
fn validate_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let out = delta(&["validate", "--trace", "w/trace.jsonl"], dir.path());
    ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["events"], 800);
    assert_eq!(report["queries"], 400);
}

#[test]
fn validate_names_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("catalog.json"),
        r#"{"schema":"delta-catalog/1","objects":[{"id":0,"size":10}]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("t.jsonl"),
        "{\"schema\":\"delta-trace/1\",\"catalog\":\"catalog.json\"}\n{\"type\":\"update\",\"uid\":1,\"time\":1,\"object\":0}\n",
    )
    .unwrap();
    let out = delta(&["validate", "--trace", "t.jsonl"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    for args in [
        &["run", "--trace", "w/trace.jsonl", "--policy", "nosuch", "--seed", "1"][..],
        &["run", "--trace", "w/trace.jsonl", "--policy", "vcover", "--seed", "1", "--cache-frac", "2"],
        &["run", "--trace", "w/trace.jsonl", "--policy", "vcover"],
        &["run", "--trace", "missing.jsonl", "--policy", "vcover", "--seed", "1"],
        &["gen"],
    ] {
        let out = delta(args, dir.path());
        assert!(!out.status.success(), "{args:?} succeeded");
    }
}
