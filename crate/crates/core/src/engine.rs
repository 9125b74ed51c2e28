//! Bounded model checking: safety proofs, objective falsification,
//! template synthesis and implementation-relation checks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;
use tracing::{debug, info};

use crate::algebra::{check_signature, compose, AlgebraError, Library, NodeExpr};
use crate::frontend::FrontendError;
use crate::ir::{Expr, Type, Valuation, Value, Var};
use crate::properties::{observer, PropertyError, SafetyProperty};
use crate::semantics::elaborate::instance_name;
use crate::semantics::{record_state_at, simulate_from, Node, SimError, Trace};
use crate::smt::{self, Decoded, SatResult, Session, SmtError, SolverConfig, Unrolling};
use crate::templates::{self, TemplateInst};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("{0}")]
    Invalid(String),
    #[error("generated test case does not re-validate: {0}")]
    Revalidation(String),
}

/// Outcome of a bounded query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BmcOutcome {
    Unsat,
    Sat { round: usize, model: Decoded },
    Unknown(String),
}

/// Per-round constraints `(expr, round)` for a target round.
pub type Target<'a> = dyn Fn(usize) -> Option<Vec<(Expr, usize)>> + 'a;

/// Incremental BMC over rounds `0..=k`. `invariant` holds at every encoded
/// round; at round `r`, `target(r)` (if any) is checked for satisfiability.
/// Sat models are replayed through the simulator before being returned.
pub fn bmc(
    cfg: &SolverConfig,
    node: &Node,
    invariant: &[Expr],
    target: &Target<'_>,
    k: usize,
    name: &str,
) -> Result<BmcOutcome, SmtError> {
    let mut u = Unrolling::new(node)?;
    let mut s = Session::start(cfg)?;
    s.set_dump_name(name);
    s.send_all(u.header())?;
    for (n, t) in &u.decls {
        s.send(&format!("(declare-fun {} () {})", n, smt::sort_name(*t)))?;
    }
    for a in &u.asserts {
        s.send(&format!("(assert {})", a))?;
    }
    for r in 0..=k {
        let cmds = u.add_round()?;
        s.send_all(cmds)?;
        for inv in invariant {
            let t = u.term(inv, r)?;
            s.send(&format!("(assert {})", t))?;
        }
        let Some(goal) = target(r) else { continue };
        s.push()?;
        for (e, at) in &goal {
            let t = u.term(e, *at)?;
            s.send(&format!("(assert {})", t))?;
        }
        let started = Instant::now();
        let res = s.check_sat()?;
        debug!(round = r, elapsed = ?started.elapsed(), ?res, "{}", name);
        match res {
            SatResult::Unsat => s.pop()?,
            SatResult::Unknown(reason) => return Ok(BmcOutcome::Unknown(reason)),
            SatResult::Sat => {
                let vals = s.model(&u)?;
                let d = u.decode(&vals)?;
                smt::replay(&u, &d)?;
                return Ok(BmcOutcome::Sat { round: r, model: d });
            }
        }
    }
    Ok(BmcOutcome::Unsat)
}

/// Verdict of a proof obligation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Unsat up to bound `k`; `bounded` when this does not imply the
    /// unbounded claim.
    Holds {
        k: usize,
        bounded: bool,
    },
    Counterexample {
        round: usize,
        trace: Trace,
    },
    Unknown {
        reason: String,
    },
    Unsupported {
        reason: String,
    },
    /// The judgment fails its syntactic conditions.
    Mismatch {
        reason: String,
    },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Holds { k, bounded: false } => format!("proved (k = {})", k),
            Verdict::Holds { k, bounded: true } => format!("proved (bounded {})", k),
            Verdict::Counterexample { round, .. } => format!("counterexample at round {}", round),
            Verdict::Unknown { reason } => format!("unknown ({})", reason),
            Verdict::Unsupported { reason } => format!("unsupported ({})", reason),
            Verdict::Mismatch { reason } => format!("not an implementation: {}", reason),
        }
    }
}

/// `n ⊨ obs(phi)` up to `k` rounds.
pub fn prove_safety(
    cfg: &SolverConfig,
    n: &Node,
    phi: &SafetyProperty,
    k: usize,
) -> Result<Verdict, EngineError> {
    if let Some(m) = phi.max_round() {
        if m as usize > k {
            return Err(EngineError::Invalid(format!(
                "property mentions round {} beyond the bound {}",
                m, k
            )));
        }
    }
    let types = n.type_map();
    let mon = observer(phi, &|v| types.get(v).copied(), "prop#ok", "prop#")?;
    let sys = compose(n, &mon)?;
    let bad = Expr::not(Expr::var("prop#ok"));
    let out = bmc(
        cfg,
        &sys,
        &[],
        &|r| Some(vec![(bad.clone(), r)]),
        k,
        &format!("prove-{}", n.name),
    )?;
    Ok(match out {
        BmcOutcome::Unsat => Verdict::Holds {
            k,
            bounded: phi.has_always(),
        },
        BmcOutcome::Sat { round, model } => Verdict::Counterexample {
            round,
            trace: model.trace,
        },
        BmcOutcome::Unknown(reason) => Verdict::Unknown { reason },
    })
}

/// A test objective: a predicate reached at some round, or a conjunction
/// of `e@s` atoms all satisfied on one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Objective {
    Reach(Expr),
    Property(SafetyProperty),
}

impl Objective {
    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Objective::Reach(e) => e.free_vars(),
            Objective::Property(p) => p.free_vars(),
        }
    }

    /// Constraints making the objective witnessed at round `r`, if `r` can
    /// be a witness round.
    fn at(&self, r: usize) -> Option<Vec<(Expr, usize)>> {
        match self {
            Objective::Reach(e) => Some(vec![(e.clone(), r)]),
            Objective::Property(p) => {
                if p.max_round().map_or(0, |m| m as usize) > r {
                    return None;
                }
                let mut out = Vec::new();
                for a in p.atoms() {
                    match a {
                        SafetyProperty::At(e, s) => out.push((e, s as usize)),
                        SafetyProperty::Always(e) => out.extend((0..=r).map(|t| (e.clone(), t))),
                        SafetyProperty::And(..) => unreachable!("atoms are flat"),
                    }
                }
                Some(out)
            }
        }
    }

    /// Whether the objective holds on `rows` with witness round `r`.
    pub fn holds_on(&self, rows: &[Valuation], r: usize) -> bool {
        self.at(r).is_some_and(|cs| {
            cs.iter().all(|(e, t)| {
                rows.get(*t)
                    .is_some_and(|row| e.eval_in(row).ok() == Some(Value::Bool(true)))
            })
        })
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Reach(e) => write!(f, "{}", e),
            Objective::Property(p) => write!(f, "{}", p),
        }
    }
}

/// A generated test: input streams for the target and the witnessed round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TestCase {
    /// Closed generator expression, when the inputs come from templates.
    pub generator: Option<String>,
    pub objective: String,
    pub round: usize,
    pub bound: usize,
    pub params: BTreeMap<String, String>,
    pub trace: Trace,
}

impl TestCase {
    pub fn to_csv(&self) -> String {
        self.trace.to_csv()
    }

    /// Metadata sidecar.
    pub fn metadata_json(&self) -> String {
        let meta = serde_json::json!({
            "generator": self.generator,
            "objective": self.objective,
            "round": self.round,
            "bound": self.bound,
            "length": self.trace.len(),
            "params": self.params,
        });
        serde_json::to_string_pretty(&meta).expect("serializable")
    }

    /// Writes `{stem}.csv` and `{stem}.json` into `dir`.
    pub fn write(
        &self,
        dir: &std::path::Path,
        stem: &str,
    ) -> std::io::Result<(std::path::PathBuf, std::path::PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", stem));
        let json = dir.join(format!("{}.json", stem));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.metadata_json())?;
        Ok((csv, json))
    }
}

fn check_objective_vars(n: &Node, obj: &Objective) -> Result<(), EngineError> {
    match obj
        .free_vars()
        .into_iter()
        .find(|v| n.var_type(v).is_none())
    {
        Some(v) => Err(EngineError::Invalid(format!(
            "objective mentions unknown variable `{}`",
            v
        ))),
        None => Ok(()),
    }
}

/// Re-simulates `n` (parameters bound) on the trace inputs and checks the
/// objective at `round`.
fn revalidate(
    n: &Node,
    params: &Valuation,
    trace: &Trace,
    obj: &Objective,
    round: usize,
) -> Result<Trace, EngineError> {
    let n = n.bind_params(params);
    let s0 = match trace.states.as_ref().and_then(|s| s.first()) {
        Some(s) => s.clone(),
        None => n
            .init_point()
            .ok_or_else(|| EngineError::Revalidation("no initial state".into()))?,
    };
    let t = simulate_from(&n, &s0, &trace.inputs)?;
    let wires = crate::semantics::sim::run_wires(&n, &s0, &trace.inputs)?;
    if !obj.holds_on(&wires, round) {
        return Err(EngineError::Revalidation(format!(
            "objective `{}` is false at round {}",
            obj, round
        )));
    }
    Ok(t)
}

/// Searches for the shortest run of `n` reaching `obj`, trying bounds
/// `0..=k_max` in order.
pub fn falsify(
    cfg: &SolverConfig,
    n: &Node,
    obj: &Objective,
    k_max: usize,
) -> Result<Option<TestCase>, EngineError> {
    check_objective_vars(n, obj)?;
    let out = bmc(
        cfg,
        n,
        &[],
        &|r| obj.at(r),
        k_max,
        &format!("falsify-{}", n.name),
    )?;
    match out {
        BmcOutcome::Unsat => Ok(None),
        BmcOutcome::Unknown(r) => Err(EngineError::Smt(SmtError::Solver(format!(
            "solver returned unknown: {}",
            r
        )))),
        BmcOutcome::Sat { round, model } => {
            let t = revalidate(n, &model.params, &model.trace, obj, round)?;
            info!(round, "objective reached");
            Ok(Some(TestCase {
                generator: None,
                objective: obj.to_string(),
                round,
                bound: round,
                params: model
                    .params
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect(),
                trace: Trace { states: None, ..t },
            }))
        }
    }
}

/// One template slot: the input it drives and the template instance,
/// possibly with `_` parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub input: String,
    pub template: TemplateInst,
}

/// Prefixes assigned to the slots' instances by the evaluator.
fn slot_prefixes(slots: &[Slot]) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    slots
        .iter()
        .map(|s| {
            let c = counts.entry(s.template.name.clone()).or_insert(0);
            *c += 1;
            format!("{}#{}", s.template.name, c)
        })
        .collect()
}

fn generator_expr(slots: &[Slot]) -> Option<NodeExpr> {
    NodeExpr::par_all(
        slots
            .iter()
            .map(|s| NodeExpr::Template(s.template.clone()).rename("Out", &s.input)),
    )
}

/// Synthesizes template parameters so that `generator || target` reaches
/// `obj` within `k` rounds. The bound generator is re-elaborated and
/// re-simulated before the test case is returned.
pub fn synthesize(
    cfg: &SolverConfig,
    lib: &Library,
    target: &NodeExpr,
    slots: &[Slot],
    obj: &Objective,
    k: usize,
) -> Result<Option<TestCase>, EngineError> {
    let tn = lib.eval(target)?;
    let mut seen = BTreeSet::new();
    for s in slots {
        if !tn.is_input(&s.input) {
            return Err(EngineError::Invalid(format!(
                "`{}` is not an input of the target",
                s.input
            )));
        }
        if !seen.insert(s.input.clone()) {
            return Err(EngineError::Invalid(format!(
                "input `{}` has two templates",
                s.input
            )));
        }
    }
    let Some(gen) = generator_expr(slots) else {
        return falsify(cfg, &tn, obj, k);
    };
    // Templates first so their instance prefixes match `slot_prefixes`.
    let whole = NodeExpr::par(gen, target.clone());
    let types = lib.types_of(target)?;
    let sys = lib.eval_typed(&whole, &types)?;
    check_objective_vars(&sys, obj)?;
    let out = bmc(cfg, &sys, &[], &|r| obj.at(r), k, "synthesize")?;
    let (round, model) = match out {
        BmcOutcome::Unsat => return Ok(None),
        BmcOutcome::Unknown(r) => {
            return Err(EngineError::Smt(SmtError::Solver(format!(
                "solver returned unknown: {}",
                r
            ))))
        }
        BmcOutcome::Sat { round, model } => (round, model),
    };
    let bound: Vec<Slot> = slots
        .iter()
        .zip(slot_prefixes(slots))
        .map(|(s, p)| Slot {
            input: s.input.clone(),
            template: templates::bind_instance(&s.template, &p, &model.params),
        })
        .collect();
    let closed = generator_expr(&bound).expect("nonempty");
    let whole = NodeExpr::par(closed.clone(), target.clone());
    let sys = lib.eval_typed(&whole, &types)?;
    if !sys.params.is_empty() {
        return Err(EngineError::Revalidation(format!(
            "generator `{}` still has free parameters",
            closed
        )));
    }
    let inputs: Vec<Valuation> = model
        .trace
        .inputs
        .iter()
        .map(|row| {
            row.iter()
                .filter(|(k, _)| sys.is_input(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        })
        .collect();
    let s0 = sys
        .init_point()
        .ok_or_else(|| EngineError::Revalidation("generator has no initial state".into()))?;
    let t = simulate_from(&sys, &s0, &inputs)?;
    let wires = crate::semantics::sim::run_wires(&sys, &s0, &inputs)?;
    if !obj.holds_on(&wires, round) {
        return Err(EngineError::Revalidation(format!(
            "`{}` does not reach `{}` at round {}",
            closed, obj, round
        )));
    }
    // Report the target's own inputs as the test streams.
    let target_inputs: Vec<Var> = tn.inputs.clone();
    let mut trace = Trace::empty(
        target_inputs.clone(),
        sys.outputs
            .iter()
            .filter(|o| !tn.is_input(&o.name))
            .cloned()
            .collect(),
    );
    for w in &wires {
        trace.inputs.push(
            target_inputs
                .iter()
                .map(|v| (v.name.clone(), w[&v.name].clone()))
                .collect(),
        );
        trace.outputs.push(
            trace
                .out_vars
                .iter()
                .map(|v| (v.name.clone(), w[&v.name].clone()))
                .collect(),
        );
    }
    debug_assert_eq!(t.len(), trace.len());
    let params = model
        .params
        .iter()
        .map(|(k, v)| (k.clone(), v.to_string()))
        .collect();
    Ok(Some(TestCase {
        generator: Some(closed.to_string()),
        objective: obj.to_string(),
        round,
        bound: k,
        params,
        trace,
    }))
}

/// Builds a monitor node from equations such as
/// `FOut_d10 = Delay<<10>>(false, FOut);` over outputs of `target`.
pub fn monitor_node(target: &Node, equations: &str) -> Result<Node, EngineError> {
    let mut lhs = Vec::new();
    for eq in equations
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let (l, _) = eq
            .split_once('=')
            .ok_or_else(|| EngineError::Invalid(format!("`{}` is not an equation", eq)))?;
        lhs.push(l.trim().to_string());
    }
    let defined: BTreeSet<&str> = lhs.iter().map(String::as_str).collect();
    let mut used = BTreeSet::new();
    for eq in equations
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let (_, r) = eq.split_once('=').expect("checked above");
        let e = crate::frontend::parse_expr(r.trim())?;
        collect_names(&e, &mut used);
    }
    let mut inputs = Vec::new();
    for u in used.iter().filter(|u| !defined.contains(u.as_str())) {
        let ty = target
            .var_type(u)
            .filter(|_| target.is_output(u) || target.is_input(u))
            .ok_or_else(|| {
                EngineError::Invalid(format!(
                    "monitor reads `{}`, which is not a wire of the target",
                    u
                ))
            })?;
        inputs.push(format!("{}: {}", u, ty));
    }
    // Output types are found by trying each assignment; monitors are small.
    const TYS: [Type; 3] = [Type::Bool, Type::Int, Type::Real];
    let n = lhs.len();
    let mut last = None;
    for mut code in 0..TYS.len().pow(n as u32) {
        let mut outs = Vec::new();
        for l in &lhs {
            outs.push(format!("{}: {}", l, TYS[code % 3]));
            code /= 3;
        }
        let src = format!(
            "include \"stdlib.lus\";\nnode monitor({}) returns ({})\nlet\n{}\ntel\n",
            inputs.join("; "),
            outs.join("; "),
            equations
        );
        match crate::frontend::load_program(&src, None) {
            Ok(p) => {
                let m =
                    crate::semantics::elaborate_node(&p, "monitor").map_err(AlgebraError::from)?;
                let internal: BTreeSet<String> = m
                    .states
                    .iter()
                    .chain(&m.locals)
                    .map(|v| v.name.clone())
                    .collect();
                return Ok(m.rename_all(&|v| {
                    if internal.contains(v) {
                        instance_name("monitor", v)
                    } else {
                        v.to_string()
                    }
                }));
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last
        .map(EngineError::from)
        .unwrap_or_else(|| EngineError::Invalid("empty monitor".into())))
}

fn collect_names(e: &crate::frontend::ast::Expr, out: &mut BTreeSet<String>) {
    use crate::frontend::ast::ExprKind::*;
    match &e.kind {
        Lit(_) => {}
        Var(v) => {
            out.insert(v.clone());
        }
        Unary(_, a) | Pre(a) => collect_names(a, out),
        Binary(_, a, b) | Arrow(a, b) => {
            collect_names(a, out);
            collect_names(b, out);
        }
        Ite(c, a, b) => {
            collect_names(c, out);
            collect_names(a, out);
            collect_names(b, out);
        }
        Call { args, .. } => args.iter().for_each(|a| collect_names(a, out)),
    }
}

/// Adds monitor equations to `target` and searches for `obj`, with
/// templates on the given inputs.
pub fn falsify_with_monitor(
    cfg: &SolverConfig,
    lib: &Library,
    target: &NodeExpr,
    monitor: &str,
    slots: &[Slot],
    obj: &Objective,
    k: usize,
) -> Result<Option<TestCase>, EngineError> {
    let tn = lib.eval(target)?;
    let mon = monitor_node(&tn, monitor)?;
    let mut lib2 = lib.clone();
    lib2.nodes.insert("monitored".into(), compose(&tn, &mon)?);
    synthesize(
        cfg,
        &lib2,
        &NodeExpr::Named("monitored".into()),
        slots,
        obj,
        k,
    )
}

/// Point predicate fixing every state of `n` to its value after the
/// reaction at `round` on `inputs`.
pub fn temp_split_assist(
    n: &Node,
    inputs: &[Valuation],
    round: usize,
) -> Result<Expr, EngineError> {
    let s = record_state_at(n, inputs, round)?;
    Ok(point_predicate(n, &s))
}

pub fn point_predicate(n: &Node, s: &Valuation) -> Expr {
    Expr::and_all(
        n.states
            .iter()
            .map(|v| Expr::eq(Expr::var(v.name.clone()), Expr::Const(s[&v.name].clone()))),
    )
}

/// Suffix for duplicated right-hand-side wires.
const DUP: &str = "#rhs";

/// Checks `lhs ⊨ rhs` up to `k` rounds. Observers on the left are
/// assumptions over their variables; observers on the right are
/// guarantees checked at every round under the assumptions up to that
/// round; deterministic nodes on the right are duplicated and their
/// outputs compared with the left.
pub fn check_judgment(
    lib: &Library,
    lhs: &NodeExpr,
    rhs: &NodeExpr,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Verdict, EngineError> {
    let lhs = lib.resolve(lhs)?;
    let rhs = lib.resolve(rhs)?;
    let (assume, impls): (Vec<&NodeExpr>, Vec<&NodeExpr>) =
        lhs.operands().into_iter().partition(|e| e.is_observer());
    let (guar, specs): (Vec<&NodeExpr>, Vec<&NodeExpr>) =
        rhs.operands().into_iter().partition(|e| e.is_observer());
    let mut types = BTreeMap::new();
    let whole = NodeExpr::par_all(impls.iter().chain(&specs).map(|e| (*e).clone()));
    for e in whole.iter().chain(lhs.operands()).chain(rhs.operands()) {
        for (v, t) in lib.types_of(e)? {
            types.entry(v).or_insert(t);
        }
    }
    let m = match NodeExpr::par_all(impls.iter().map(|e| (*e).clone())) {
        Some(e) => lib.eval_typed(&e, &types)?,
        None => empty_node(),
    };
    let mut sys = m.clone();
    let mut lhs_obs_vars = BTreeSet::new();
    let mut assumptions = Vec::new();
    let mut obs_count = 0;
    let mut add_monitor = |sys: &mut Node, phi: &SafetyProperty| -> Result<String, EngineError> {
        obs_count += 1;
        let id = format!("j#{}", obs_count);
        let tys = property_types(phi, &types)?;
        let mon = observer(
            phi,
            &|v| tys.get(v).copied(),
            &format!("{}.ok", id),
            &format!("{}.", id),
        )?;
        *sys = compose(sys, &mon)?;
        Ok(format!("{}.ok", id))
    };
    for a in &assume {
        let NodeExpr::Observer(phi) = a else {
            unreachable!()
        };
        for v in phi.free_vars() {
            if m.is_output(&v) {
                return Ok(Verdict::Mismatch {
                    reason: format!(
                        "assumption `{}` observes `{}`, an output of the left-hand side",
                        a, v
                    ),
                });
            }
            lhs_obs_vars.insert(v);
        }
        assumptions.push(Expr::var(add_monitor(&mut sys, phi)?));
    }
    let produced = |v: &str| m.is_output(v) || lhs_obs_vars.contains(v);
    let mut guarantees = Vec::new();
    let mut bounded = false;
    let mut max_round = 0usize;
    for g in &guar {
        let NodeExpr::Observer(phi) = g else {
            unreachable!()
        };
        if let Some(v) = phi.free_vars().into_iter().find(|v| !produced(v)) {
            return Ok(Verdict::Mismatch {
                reason: format!("`{}` is not an output of the left-hand side", v),
            });
        }
        bounded |= phi.has_always();
        max_round = max_round.max(phi.max_round().unwrap_or(0) as usize);
        guarantees.push(Expr::var(add_monitor(&mut sys, phi)?));
    }
    for s in &specs {
        let d = lib.eval_typed(s, &types)?;
        let lhs_sig = with_observer_outputs(&m, &lhs_obs_vars, &types);
        if let Err(reason) = check_signature(&lhs_sig, &d) {
            return Ok(Verdict::Mismatch { reason });
        }
        if d.init_point().is_none() || !d.params.is_empty() {
            return Ok(Verdict::Unsupported {
                reason: format!("`{}` is not deterministic", s),
            });
        }
        let keep: BTreeSet<String> = d.input_names();
        let dup = d.rename_all(&|v| {
            if keep.contains(v) {
                v.to_string()
            } else {
                format!("{}{}", v, DUP)
            }
        });
        for o in &d.outputs {
            guarantees.push(Expr::eq(
                Expr::var(o.name.clone()),
                Expr::var(format!("{}{}", o.name, DUP)),
            ));
        }
        sys = compose(&sys, &dup)?;
        bounded = true;
    }
    if k < max_round {
        bounded = true;
    }
    if guarantees.is_empty() {
        return Ok(Verdict::Holds { k, bounded: false });
    }
    let bad = Expr::not(Expr::and_all(guarantees));
    let out = bmc(
        cfg,
        &sys,
        &assumptions,
        &|r| Some(vec![(bad.clone(), r)]),
        k,
        "judgment",
    )?;
    Ok(match out {
        BmcOutcome::Unsat => Verdict::Holds { k, bounded },
        BmcOutcome::Sat { round, model } => Verdict::Counterexample {
            round,
            trace: model.trace,
        },
        BmcOutcome::Unknown(reason) => Verdict::Unknown { reason },
    })
}

/// The left-hand side seen as a node whose outputs include the variables
/// generated by its observers.
fn with_observer_outputs(
    m: &Node,
    vars: &BTreeSet<String>,
    types: &BTreeMap<String, Type>,
) -> Node {
    let mut n = m.clone();
    for v in vars {
        if !n.is_output(v) {
            n.inputs.retain(|i| &i.name != v);
            n.outputs.push(Var::new(
                v.clone(),
                types.get(v).copied().unwrap_or(Type::Bool),
            ));
        }
    }
    n
}

fn property_types(
    phi: &SafetyProperty,
    types: &BTreeMap<String, Type>,
) -> Result<BTreeMap<String, Type>, EngineError> {
    let mut tys: BTreeMap<String, Type> = phi
        .free_vars()
        .into_iter()
        .filter_map(|v| types.get(&v).map(|t| (v, *t)))
        .collect();
    for a in phi.atoms() {
        if let SafetyProperty::At(e, _) | SafetyProperty::Always(e) = &a {
            crate::properties::infer_var_types(e, Type::Bool, &mut tys);
        }
    }
    if let Some(v) = phi.free_vars().into_iter().find(|v| !tys.contains_key(v)) {
        return Err(AlgebraError::Untyped(v).into());
    }
    Ok(tys)
}

pub(crate) fn empty_node() -> Node {
    Node {
        name: "empty".into(),
        inputs: vec![],
        outputs: vec![],
        states: vec![],
        locals: vec![],
        params: vec![],
        init: Expr::bool(true),
        defs: vec![],
        next: vec![],
    }
}

/// Whether `n` holds its state whenever `en` is false: the precondition of
/// the rate-transition rule for gated nodes.
pub fn holds_state_when_disabled(
    cfg: &SolverConfig,
    n: &Node,
    en: &str,
) -> Result<bool, EngineError> {
    if n.states.is_empty() {
        return Ok(true);
    }
    let (p1, _) = crate::algebra::combinational(n, &Expr::bool(true))?;
    let changed = Expr::and_all([
        Expr::not(Expr::var(en)),
        Expr::not(Expr::and_all(n.states.iter().map(|s| {
            Expr::eq(
                Expr::var(crate::algebra::primed(&s.name)),
                Expr::var(s.name.clone()),
            )
        }))),
    ]);
    let out = bmc(
        cfg,
        &p1,
        &[],
        &|r| Some(vec![(changed.clone(), r)]),
        0,
        "gated",
    )?;
    match out {
        BmcOutcome::Unsat => Ok(true),
        BmcOutcome::Sat { .. } => Ok(false),
        BmcOutcome::Unknown(r) => Err(EngineError::Smt(SmtError::Solver(format!(
            "solver returned unknown: {}",
            r
        )))),
    }
}

/// Wall-clock helper for reports.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}
