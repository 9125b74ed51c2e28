//! SMT-LIB 2 encoding of bounded unrollings and the solver interface.

pub mod encode;
pub mod sexp;
pub mod solver;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::ir::{Expr, Type, Valuation, Value};
use crate::semantics::sim;

pub use encode::{decode_model, Decoded, Unrolling};
pub use solver::{SatResult, Session, SolverConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("cannot encode: {0}")]
    Encoding(String),
    #[error("nonlinear term `{0}` is outside the supported fragment")]
    Nonlinear(String),
    #[error("cannot start solver {0}")]
    Spawn(String),
    #[error("solver I/O: {0}")]
    Io(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("malformed solver output: {0}")]
    Malformed(String),
    #[error("solver timed out")]
    Timeout,
    #[error("solver exited unexpectedly")]
    Crashed,
    #[error("model has no value for `{0}`")]
    MissingSymbol(String),
    #[error("model and simulator disagree: {0}")]
    Disagreement(String),
}

static REPLAYED: AtomicU64 = AtomicU64::new(0);

/// Number of satisfying models cross-checked against the simulator in this
/// process. A model that disagrees is an error, never a result.
pub fn replayed_models() -> u64 {
    REPLAYED.load(Ordering::Relaxed)
}

/// Outcome of a bounded query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckResult {
    Unsat,
    Sat(Decoded),
    Unknown(String),
}

/// Checks `goal` (already rendered against `u`) in a fresh session.
pub fn check(
    cfg: &SolverConfig,
    u: &Unrolling,
    goal: &str,
    name: &str,
) -> Result<CheckResult, SmtError> {
    let mut s = Session::start(cfg)?;
    s.set_dump_name(name);
    s.send_all(u.header())?;
    for (n, t) in &u.decls {
        s.send(&format!("(declare-fun {} () {})", n, sort_name(*t)))?;
    }
    for a in &u.asserts {
        s.send(&format!("(assert {})", a))?;
    }
    s.send(&format!("(assert {})", goal))?;
    match s.check_sat()? {
        SatResult::Unsat => Ok(CheckResult::Unsat),
        SatResult::Unknown(r) => Ok(CheckResult::Unknown(r)),
        SatResult::Sat => {
            let vals = s.model(u)?;
            let d = u.decode(&vals)?;
            replay(u, &d)?;
            Ok(CheckResult::Sat(d))
        }
    }
}

pub(crate) fn sort_name(t: Type) -> &'static str {
    match t {
        Type::Bool => "Bool",
        Type::Int => "Int",
        Type::Real => "Real",
    }
}

/// Replays a decoded model through the simulator and fails on any mismatch
/// in outputs, locals or states.
pub fn replay(u: &Unrolling, d: &Decoded) -> Result<(), SmtError> {
    REPLAYED.fetch_add(1, Ordering::Relaxed);
    let node = u.node.bind_params(&d.params);
    let states = d
        .trace
        .states
        .as_ref()
        .expect("decoded traces record states");
    let t = sim::simulate_from(&node, &states[0], &d.trace.inputs)
        .map_err(|e| SmtError::Disagreement(format!("replay failed: {}", e)))?;
    let wires = sim::run_wires(&node, &states[0], &d.trace.inputs)
        .map_err(|e| SmtError::Disagreement(format!("replay failed: {}", e)))?;
    #[allow(clippy::needless_range_loop)]
    for r in 0..d.trace.len() {
        if t.outputs[r] != d.trace.outputs[r] {
            return Err(SmtError::Disagreement(format!(
                "round {}: solver outputs {:?}, simulator {:?}",
                r, d.trace.outputs[r], t.outputs[r]
            )));
        }
        for (k, v) in &d.wires[r] {
            if wires[r].get(k) != Some(v) {
                return Err(SmtError::Disagreement(format!(
                    "round {}: wire `{}` is {} in the model",
                    r, k, v
                )));
            }
        }
    }
    if t.states.as_ref() != Some(states) {
        return Err(SmtError::Disagreement("state sequences differ".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Valuation),
    Unknown(String),
}

/// Validity of a quantifier-free formula over the typed free variables.
pub fn check_valid(
    formula: &Expr,
    types: &BTreeMap<String, Type>,
    cfg: &SolverConfig,
) -> Result<Validity, SmtError> {
    let node = crate::semantics::Node {
        name: "validity".into(),
        inputs: types
            .iter()
            .map(|(n, t)| crate::ir::Var::new(n.clone(), *t))
            .collect(),
        outputs: vec![],
        states: vec![],
        locals: vec![],
        params: vec![],
        init: Expr::bool(true),
        defs: vec![],
        next: vec![],
    };
    let u = Unrolling::encode(&node, 0, &[])?;
    let goal = u.term(&Expr::not(formula.clone()), 0)?;
    let mut s = Session::start(cfg)?;
    s.set_dump_name("validity");
    s.send_all(u.header())?;
    for (n, t) in &u.decls {
        s.send(&format!("(declare-fun {} () {})", n, sort_name(*t)))?;
    }
    s.send(&format!("(assert {})", goal))?;
    Ok(match s.check_sat()? {
        SatResult::Unsat => Validity::Valid,
        SatResult::Unknown(r) => Validity::Unknown(r),
        SatResult::Sat => {
            let vals = s.model(&u)?;
            let d = u.decode(&vals)?;
            let m: Valuation = d.trace.inputs[0]
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            REPLAYED.fetch_add(1, Ordering::Relaxed);
            if formula.eval_in(&m).ok() != Some(Value::Bool(false)) {
                return Err(SmtError::Disagreement(format!(
                    "countermodel does not falsify `{}`",
                    formula
                )));
            }
            Validity::Invalid(m)
        }
    })
}
