//! Deterministic simulation of elaborated nodes.

use thiserror::Error;

use crate::ir::{EvalError, Valuation};

use super::node::Node;
use super::trace::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("initial predicate of `{0}` does not determine a unique state")]
    NoInitPoint(String),
    #[error("unbound parameters: {}", .0.join(", "))]
    UnboundParams(Vec<String>),
    #[error("round {round}: missing input `{var}`")]
    MissingInput { round: usize, var: String },
    #[error("round {round}: evaluating `{var}`: {source}")]
    Eval {
        round: usize,
        var: String,
        source: EvalError,
    },
    #[error("round {round} is out of range for {len} inputs")]
    RoundOutOfRange { round: usize, len: usize },
}

fn check_closed(node: &Node) -> Result<(), SimError> {
    if node.params.is_empty() {
        Ok(())
    } else {
        Err(SimError::UnboundParams(
            node.params.iter().map(|p| p.name.clone()).collect(),
        ))
    }
}

/// One reaction at `round`, returning every wire (inputs, states, locals,
/// outputs) and the next state.
pub fn step_wires(
    node: &Node,
    state: &Valuation,
    input: &Valuation,
    round: usize,
) -> Result<(Valuation, Valuation), SimError> {
    let mut env = Valuation::new();
    for v in &node.inputs {
        let x = input.get(&v.name).ok_or_else(|| SimError::MissingInput {
            round,
            var: v.name.clone(),
        })?;
        env.insert(v.name.clone(), x.coerce(v.ty));
    }
    for s in &node.states {
        let x = state.get(&s.name).ok_or_else(|| SimError::MissingInput {
            round,
            var: s.name.clone(),
        })?;
        env.insert(s.name.clone(), x.coerce(s.ty));
    }
    for d in &node.defs {
        let x = d.expr.eval_in(&env).map_err(|source| SimError::Eval {
            round,
            var: d.var.clone(),
            source,
        })?;
        env.insert(d.var.clone(), x);
    }
    let mut next = Valuation::new();
    for d in &node.next {
        let x = d.expr.eval_in(&env).map_err(|source| SimError::Eval {
            round,
            var: d.var.clone(),
            source,
        })?;
        next.insert(d.var.clone(), x);
    }
    Ok((env, next))
}

/// One reaction: outputs and next state.
pub fn step(
    node: &Node,
    state: &Valuation,
    input: &Valuation,
) -> Result<(Valuation, Valuation), SimError> {
    check_closed(node)?;
    let (env, next) = step_wires(node, state, input, 0)?;
    Ok((project(&env, node), next))
}

fn project(env: &Valuation, node: &Node) -> Valuation {
    node.outputs
        .iter()
        .map(|o| (o.name.clone(), env[&o.name].clone()))
        .collect()
}

pub fn initial_state(node: &Node) -> Result<Valuation, SimError> {
    node.init_point()
        .ok_or_else(|| SimError::NoInitPoint(node.name.clone()))
}

pub fn simulate(node: &Node, inputs: &[Valuation]) -> Result<Trace, SimError> {
    let s0 = initial_state(node)?;
    simulate_from(node, &s0, inputs)
}

/// Simulates from an explicit `s_{-1}`, recording states.
pub fn simulate_from(node: &Node, s0: &Valuation, inputs: &[Valuation]) -> Result<Trace, SimError> {
    check_closed(node)?;
    let mut t = Trace::empty(node.inputs.clone(), node.outputs.clone());
    let mut states = vec![s0.clone()];
    let mut s = s0.clone();
    for (round, i) in inputs.iter().enumerate() {
        let (env, next) = step_wires(node, &s, i, round)?;
        t.inputs.push(
            node.inputs
                .iter()
                .map(|v| (v.name.clone(), env[&v.name].clone()))
                .collect(),
        );
        t.outputs.push(project(&env, node));
        states.push(next.clone());
        s = next;
    }
    t.states = Some(states);
    Ok(t)
}

/// Every wire value per round.
pub fn run_wires(
    node: &Node,
    s0: &Valuation,
    inputs: &[Valuation],
) -> Result<Vec<Valuation>, SimError> {
    check_closed(node)?;
    let mut s = s0.clone();
    let mut out = Vec::with_capacity(inputs.len());
    for (round, i) in inputs.iter().enumerate() {
        let (env, next) = step_wires(node, &s, i, round)?;
        out.push(env);
        s = next;
    }
    Ok(out)
}

/// The state after the reaction at `round`.
pub fn record_state_at(
    node: &Node,
    inputs: &[Valuation],
    round: usize,
) -> Result<Valuation, SimError> {
    if round >= inputs.len() {
        return Err(SimError::RoundOutOfRange {
            round,
            len: inputs.len(),
        });
    }
    let t = simulate(node, &inputs[..=round])?;
    Ok(t.states.expect("recorded").pop().expect("nonempty"))
}
