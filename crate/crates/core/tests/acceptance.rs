//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::process::{Command, ExitCode};

use absorbing_mdp::reproduce::run_claim;

const CLAIMS: [&str; 9] = ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9"];

fn binary_reproduces_all() -> (bool, String) {
    let out = match Command::new(env!("CARGO_BIN_EXE_amdp")).args(["reproduce", "all", "--no-timestamp"]).output() {
        Ok(o) => o,
        Err(e) => return (false, format!("could not run amdp: {e}")),
    };
    let report: serde_json::Value = match serde_json::from_slice(&out.stdout) {
        Ok(v) => v,
        Err(e) => return (false, format!("unparseable report: {e}")),
    };
    let claims = report["claims"].as_array().cloned().unwrap_or_default();
    let status = |id: &str| claims.iter().find(|c| c["id"] == id).map(|c| c["status"] == "PASS");
    let listed = CLAIMS.iter().all(|id| status(id) == Some(true));
    let all_pass = !claims.is_empty() && claims.iter().all(|c| c["status"] == "PASS");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines_pass = stderr.lines().all(|l| l.starts_with("PASS "));
    let code = out.status.code();
    (
        code == Some(0) && listed && all_pass && lines_pass,
        format!("exit {code:?}, {} claims, criteria listed and passing: {listed}", claims.len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    for (i, id) in CLAIMS.iter().enumerate() {
        let c = run_claim(id);
        let ok = c.status.as_str() == "PASS";
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {} (expected {}, computed {})",
            i + 1,
            c.status.as_str(),
            c.label,
            c.expected,
            c.computed
        );
    }
    let (ok, detail) = binary_reproduces_all();
    failed += usize::from(!ok);
    println!("criterion 10: {} reproduce all ({detail})", if ok { "PASS" } else { "FAIL" });
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
