//! Bounded unrollings against the external solver.

mod support;

use std::collections::BTreeMap;

use ctgen_core::frontend::{load_file, load_program};
use ctgen_core::ir::{BinOp, Expr, Type, Value};
use ctgen_core::semantics::{elaborate_node, simulate, Node};
use ctgen_core::smt::{
    check, check_valid, replay, replayed_models, CheckResult, SmtError, SolverConfig, Unrolling,
    Validity,
};

fn cnt() -> Node {
    elaborate_node(&load_file(&support::corpus("cnt.lus")).unwrap(), "Cnt").unwrap()
}

fn c_is(v: i64) -> Expr {
    Expr::eq(Expr::var("C"), Expr::int(v))
}

#[test]
fn sat_models_replay_through_the_simulator() {
    let cfg = SolverConfig::from_env();
    let before = replayed_models();
    let u = Unrolling::encode(&cnt(), 3, &[]).unwrap();
    let goal = u.term(&c_is(3), 3).unwrap();
    let CheckResult::Sat(d) = check(&cfg, &u, &goal, "cnt3").unwrap() else {
        panic!("C = 3 at round 3 is reachable")
    };
    assert_eq!(d.trace.value(3, "C"), Some(&Value::int(3)));
    assert_eq!(
        d.trace
            .column("En")
            .iter()
            .filter(|v| **v == Value::Bool(true))
            .count(),
        3
    );
    let sim = simulate(&cnt(), &d.trace.inputs).unwrap();
    assert_eq!(sim.outputs, d.trace.outputs);
    assert!(replayed_models() > before);
}

#[test]
fn unreachable_goal_is_unsat() {
    let u = Unrolling::encode(&cnt(), 2, &[]).unwrap();
    let goal = u.term(&c_is(4), 2).unwrap();
    assert_eq!(
        check(&SolverConfig::from_env(), &u, &goal, "cnt_unsat").unwrap(),
        CheckResult::Unsat
    );
}

#[test]
fn tampered_model_is_a_disagreement() {
    let u = Unrolling::encode(&cnt(), 1, &[]).unwrap();
    let goal = u.term(&c_is(1), 1).unwrap();
    let CheckResult::Sat(mut d) = check(&SolverConfig::from_env(), &u, &goal, "cnt1").unwrap()
    else {
        panic!()
    };
    d.trace.outputs[1].insert("C".into(), Value::int(7));
    assert!(matches!(replay(&u, &d), Err(SmtError::Disagreement(_))));
}

#[test]
fn validity_of_formulas() {
    let cfg = SolverConfig::from_env();
    let types: BTreeMap<String, Type> =
        [("x".to_string(), Type::Int), ("b".to_string(), Type::Bool)]
            .into_iter()
            .collect();
    let taut = Expr::bin(BinOp::Or, Expr::var("b"), Expr::not(Expr::var("b")));
    assert_eq!(check_valid(&taut, &types, &cfg).unwrap(), Validity::Valid);
    let claim = Expr::bin(
        BinOp::Gt,
        Expr::bin(BinOp::Mul, Expr::int(2), Expr::var("x")),
        Expr::var("x"),
    );
    match check_valid(&claim, &types, &cfg).unwrap() {
        Validity::Invalid(m) => {
            let x = m["x"].as_int().unwrap().clone();
            assert!(x <= 0.into());
        }
        v => panic!("2x > x is not valid, got {:?}", v),
    }
}

#[test]
fn reals_are_exact() {
    let prog = load_program(
        "node H (x: real) returns (y: real)\nlet\n  y = x / 3.0;\ntel\n",
        None,
    )
    .unwrap();
    let n = elaborate_node(&prog, "H").unwrap();
    let u = Unrolling::encode(&n, 0, &[]).unwrap();
    let goal = u
        .term(&Expr::eq(Expr::var("y"), Expr::Const(Value::real(1, 7))), 0)
        .unwrap();
    let CheckResult::Sat(d) = check(&SolverConfig::from_env(), &u, &goal, "real").unwrap() else {
        panic!()
    };
    assert_eq!(d.trace.inputs[0]["x"], Value::real(3, 7));
}

#[test]
fn nonlinear_terms_are_rejected() {
    let prog = load_program(
        "node M (x, y: int) returns (z: int)\nlet\n  z = x * y;\ntel\n",
        None,
    )
    .unwrap();
    let n = elaborate_node(&prog, "M").unwrap();
    assert!(matches!(
        Unrolling::encode(&n, 0, &[]),
        Err(SmtError::Nonlinear(_))
    ));
}

#[test]
fn missing_solver_is_reported() {
    let cfg = SolverConfig {
        command: "/nonexistent/solver".into(),
        ..SolverConfig::default()
    };
    let u = Unrolling::encode(&cnt(), 0, &[]).unwrap();
    let goal = u.term(&c_is(0), 0).unwrap();
    assert!(matches!(
        check(&cfg, &u, &goal, "missing"),
        Err(SmtError::Spawn(_))
    ));
}

#[test]
fn queries_are_dumped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SolverConfig {
        dump_dir: Some(dir.path().into()),
        ..SolverConfig::from_env()
    };
    let u = Unrolling::encode(&cnt(), 1, &[]).unwrap();
    let goal = u.term(&c_is(1), 1).unwrap();
    check(&cfg, &u, &goal, "dumped").unwrap();
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    let text = std::fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
    assert!(text.contains("(check-sat)"));
}
