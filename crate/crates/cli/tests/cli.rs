//! The `ctgen` binary: exit codes, configuration and report formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn ctgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctgen"))
        .args(args)
        .current_dir(dir)
        .env_remove("CTGEN_CONFIG")
        .output()
        .unwrap()
}

fn workspace() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    for f in [
        "cnt.lus",
        "sys1.lus",
        "sys2.lus",
        "sys1.proof",
        "sys2.proof",
    ] {
        std::fs::copy(corpus(f), d.path().join(f)).unwrap();
    }
    d
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_lists_nodes() {
    let d = workspace();
    let o = ctgen(d.path(), &["check", "sys1.lus"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("Counter ")), "{}", out);
    assert!(out.lines().any(|l| l.starts_with("Sys1 ")), "{}", out);
}

#[test]
fn input_errors_exit_with_one() {
    let d = workspace();
    std::fs::write(
        d.path().join("bad.lus"),
        "node B (x: int) returns (y: bool)\nlet\n  y = x + 1;\ntel\n",
    )
    .unwrap();
    let o = ctgen(d.path(), &["check", "bad.lus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"), "{}", stderr(&o));
    assert_eq!(
        ctgen(d.path(), &["check", "missing.lus"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ctgen(
            d.path(),
            &["sim", "cnt.lus", "--node", "Nope", "--steps", "2"]
        )
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let d = workspace();
    assert_eq!(ctgen(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(ctgen(d.path(), &["sim", "cnt.lus"]).status.code(), Some(1));
    assert_eq!(ctgen(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn sim_prints_csv() {
    let d = workspace();
    std::fs::write(
        d.path().join("in.csv"),
        "round,En\n0,false\n1,true\n2,false\n3,true\n",
    )
    .unwrap();
    let o = ctgen(
        d.path(),
        &["sim", "cnt.lus", "--node", "Cnt", "--inputs", "in.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "round,En,C\n0,false,0\n1,true,1\n2,false,1\n3,true,2\n"
    );
}

#[test]
fn falsify_exit_codes() {
    let d = workspace();
    let o = ctgen(
        d.path(),
        &[
            "falsify", "cnt.lus", "--node", "Cnt", "--obj", "C >= 3", "--kmax", "5",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("round 2"), "{}", stderr(&o));
    let o = ctgen(
        d.path(),
        &[
            "falsify", "cnt.lus", "--node", "Cnt", "--obj", "C >= 3", "--kmax", "1",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("none"), "{}", stdout(&o));
}

#[test]
fn falsify_writes_a_test_case() {
    let d = workspace();
    let o = ctgen(
        d.path(),
        &[
            "falsify", "cnt.lus", "--node", "Cnt", "--obj", "C = 2", "--out", "tc", "--name", "two",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("tc/two.csv")).unwrap();
    assert!(csv.starts_with("round,En,C\n"), "{}", csv);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("tc/two.json")).unwrap())
            .unwrap();
    assert_eq!(json["round"], 1);
}

#[test]
fn solver_failures_exit_with_three() {
    let d = workspace();
    let o = ctgen(
        d.path(),
        &[
            "--solver",
            "/nonexistent/solver",
            "falsify",
            "cnt.lus",
            "--node",
            "Cnt",
            "--obj",
            "C >= 3",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn configuration_file_is_read_and_flags_win() {
    let d = workspace();
    std::fs::write(
        d.path().join("ctgen.toml"),
        "solver = \"/nonexistent/solver\"\n",
    )
    .unwrap();
    let args = ["falsify", "cnt.lus", "--node", "Cnt", "--obj", "C >= 1"];
    assert_eq!(ctgen(d.path(), &args).status.code(), Some(3));
    let mut with_flag = vec!["--solver", "z3 -in"];
    with_flag.extend(args);
    if std::env::var("CTGEN_SOLVER").is_err() {
        assert_eq!(ctgen(d.path(), &with_flag).status.code(), Some(0));
    }
    std::fs::write(d.path().join("other.toml"), "colour = 1\n").unwrap();
    let o = ctgen(d.path(), &["--config", "other.toml", "check", "cnt.lus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("invalid configuration"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn prove_reports_json() {
    let d = workspace();
    let o = ctgen(d.path(), &["prove", "sys1.proof", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["ok"], true);
    assert_eq!(json["nodes"].as_array().unwrap().len(), 6);
}

#[test]
fn failed_proofs_exit_with_two_and_write_counterexamples() {
    let d = workspace();
    std::fs::write(
        d.path().join("bad.proof"),
        "program \"cnt.lus\";\nproof {\n  goal: Cnt |= obs(C = 5 @ 1);\n  rule: V;\n}\n",
    )
    .unwrap();
    let o = ctgen(
        d.path(),
        &[
            "prove",
            "bad.proof",
            "--json",
            "report.json",
            "--cex-dir",
            "cex",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["ok"], false);
    assert!(d.path().join("cex/node-1.csv").exists());
}
