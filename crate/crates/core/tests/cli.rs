use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn surflab(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_surflab"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("SURFLAB_THREADS", t),
        None => cmd.env_remove("SURFLAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

#[test]
fn check_rep_on_the_builtin_group() {
    let dir = tempfile::tempdir().unwrap();
    let out = surflab(dir.path(), &["check-rep", "--p", "2", "--out", "o"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("o/check_rep.json"));
    assert!(r["relator_residual_v"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["signature_v"], serde_json::json!([2, 1]));
    assert_eq!(r["signature_e"], serde_json::json!([2, 2]));
    assert_eq!(r["words"], 1000);
}

#[test]
fn coboundary_has_vanishing_average() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cob.json",
        r#"{"p": 2, "radius": 9, "cocycle": {"kind": "coboundary", "vector": [0.5, -1.0, 2.0]}}"#,
    );
    let out = surflab(dir.path(), &["margulis", "--config", &cfg, "--out", "o"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("o/margulis.json"));
    for a in r["averages"].as_array().unwrap() {
        assert!(a["bm_average"]["value"].as_f64().unwrap().abs() <= 1e-8);
    }
    let csv = fs::read_to_string(dir.path().join("o/margulis.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn entropy_at_twelve() {
    let dir = tempfile::tempdir().unwrap();
    let out = surflab(dir.path(), &["entropy", "--radius", "12", "--out", "o"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("o/entropy.json"));
    let h = r["last_root"]["estimate"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&h), "{h}");
}

fn diagnostic(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("a diagnostic line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["spectrum", "--p", "1"],
        vec!["spectrum", "--radius", "-3"],
        vec!["no-such-command"],
        vec!["transversality"],
        vec!["margulis"],
        vec!["spectrum", "--config", "missing.json"],
    ];
    for args in cases {
        let out = surflab(dir.path(), &args, None);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(diagnostic(&out)["exit_code"], 1);
    }
    let cfg = write_config(dir.path(), "bad.json", r#"{"p": 2, "cocycle": {"kind": "random"}}"#);
    let out = surflab(dir.path(), &["margulis", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(diagnostic(&out)["message"].as_str().unwrap().contains("seed"));
    let cfg = write_config(dir.path(), "typo.json", r#"{"p": 2, "raduis": 8}"#);
    assert_eq!(surflab(dir.path(), &["spectrum", "--config", &cfg], None).status.code(), Some(1));
    let cfg = write_config(
        dir.path(),
        "explicit.json",
        r#"{"p": 2, "cocycle": {"kind": "explicit", "vectors": [[1,0,0],[0,0,0],[0,0,0],[0,0,0]]}}"#,
    );
    assert_eq!(surflab(dir.path(), &["margulis", "--config", &cfg], None).status.code(), Some(1));
}

#[test]
fn failed_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = surflab(dir.path(), &["check-rep", "--p", "3", "--tolerance", "1e-300", "--out", "o"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostic(&out)["error"], "numerical_failure");
    assert!(dir.path().join("o/check_rep.json").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.json",
        r#"{"p": 2, "radius": 9, "seed": 11, "samples": 50, "cocycle": {"kind": "random"}}"#,
    );
    let commands = ["check-rep", "spectrum", "margulis", "transversality", "deriv-check", "scan", "entropy"];
    for (out_dir, threads) in [("a", None), ("b", Some("1")), ("c", None)] {
        for c in commands {
            let out = surflab(dir.path(), &[c, "--config", &cfg, "--out", out_dir], threads);
            assert_eq!(out.status.code(), Some(0), "{c}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 * commands.len() - 2);
    for n in &names {
        let a = fs::read(dir.path().join("a").join(n)).unwrap();
        for other in ["b", "c"] {
            assert_eq!(a, fs::read(dir.path().join(other).join(n)).unwrap(), "{n:?} in {other}");
        }
    }
}
