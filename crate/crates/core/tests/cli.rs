use std::process::{Command, Output};

use serde_json::Value;

fn amdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amdp")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(amdp(&["occupation", "--format", "yaml", "--zoo", "example2"]).status.code(), Some(2));
    assert_eq!(amdp(&["reproduce", "example3"]).status.code(), Some(2));
    assert_eq!(amdp(&["occupation", "--zoo", "example2", "--strategy", "nope"]).status.code(), Some(2));
    assert_eq!(amdp(&["occupation"]).status.code(), Some(2));
}

#[test]
fn engine_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"name\": 3}").unwrap();
    let out = amdp(&["validate", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn exported_model_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one_step.json");
    let p = path.to_str().unwrap();
    assert!(amdp(&["zoo", "export", "remark2", "--out", p]).status.success());

    let out = amdp(&["validate", "--model", p, "--no-timestamp"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["body"]["kind"], "validation");
    assert_eq!(v["claims"][0]["status"], "PASS");

    let out = amdp(&["occupation", "--model", p, "--strategy", "const:a*", "--x0", "1/8", "--no-timestamp"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["body"]["total_mass"], "1");
    assert_eq!(v["body"]["marginal"][0]["cell"], "1/8");
}

#[test]
fn strategy_files_drive_occupation() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("ladder.json");
    let strategy = dir.path().join("psi.json");
    assert!(amdp(&["zoo", "export", "example2", "--out", model.to_str().unwrap()]).status.success());
    let e = absorbing_mdp::zoo::by_name("example2").unwrap();
    let pi = e.family("Lambda").unwrap().generate(4).unwrap();
    std::fs::write(&strategy, serde_json::to_string(&pi).unwrap()).unwrap();
    let out = amdp(&[
        "occupation",
        "--model",
        model.to_str().unwrap(),
        "--strategy-file",
        strategy.to_str().unwrap(),
        "--x0",
        "b_1",
        "--no-timestamp",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let rows = v["body"]["marginal"].as_array().unwrap();
    let mass = |cell: &str| rows.iter().find(|r| r["cell"] == cell).map(|r| r["mass"].clone());
    assert_eq!(mass("b_4"), Some(Value::from("1/8")));
    assert_eq!(mass("b_5"), Some(Value::from("1/2")));
}

#[test]
fn identical_invocations_give_identical_reports() {
    for args in [
        &["reproduce", "example1", "--no-timestamp"][..],
        &["absorption", "--zoo", "example2", "--no-timestamp", "--format", "md"][..],
        &["convergence", "--zoo", "remark2", "--no-timestamp", "--format", "csv"][..],
    ] {
        let (a, b) = (amdp(args), amdp(args));
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let stamped = json(&amdp(&["zoo", "list"]));
    assert!(stamped["timestamp"].is_string());
}

#[test]
fn reproduce_prints_pass_lines() {
    let out = amdp(&["reproduce", "remark2", "--no-timestamp", "--format", "md"]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.lines().next().unwrap().starts_with("PASS C7:"));
    assert!(stderr.lines().all(|l| l.starts_with("PASS ")));
    assert!(String::from_utf8(out.stdout).unwrap().contains("| C7 | PASS |"));
}

#[test]
fn absorption_reports_the_witness() {
    let out = amdp(&["absorption", "--zoo", "example2", "--n-max", "20", "--epsilon", "0.25", "--no-timestamp"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["body"]["verdict"], "non-uniform-witness-found");
    assert!(!v["body"]["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn convergence_traces_export_as_csv() {
    let out = amdp(&["convergence", "--zoo", "example1", "--battery", "WS-STEP", "--format", "csv", "--no-timestamp"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("function,k,label,integral,gap"));
    assert!(text.lines().any(|l| l.starts_with("I{x>0},") && l.ends_with(",1")));
}
