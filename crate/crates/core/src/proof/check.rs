//! Structural rule checks, leaf discharge and whole-tree validation.
//!
//! Leaves of a judgment side are compared as multisets of canonical
//! strings, so `||` is treated as associative and commutative and an
//! observer of a conjunction equals the composition of its conjuncts.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use super::tree::{Judgment, ProofNode, Rule, StatePred};
use crate::algebra::{Library, NodeExpr};
use crate::engine::{self, EngineError, Verdict};
use crate::ir::{Expr, Type, Valuation, Value};
use crate::properties::{implies, infer_var_types, prime, Implication, SafetyProperty};
use crate::semantics::Node;
use crate::smt::{check_valid, SolverConfig, Validity};
use crate::templates::{TemplateArg, TemplateInst};

/// Name of the rate-transition template.
pub const RATE_TRANSITION: &str = "RateTransition";

type Leaves = Vec<(String, NodeExpr)>;

/// Rule checking against one library and solver configuration.
pub struct Checker<'a> {
    pub lib: &'a Library,
    pub cfg: &'a SolverConfig,
}

impl<'a> Checker<'a> {
    pub fn new(lib: &'a Library, cfg: &'a SolverConfig) -> Self {
        Checker { lib, cfg }
    }

    fn side(&self, e: &NodeExpr) -> Result<Leaves, String> {
        let e = self.lib.resolve(e).map_err(|e| e.to_string())?;
        let mut v: Leaves = e.leaves().into_iter().map(|l| (l.canon(), l)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(v)
    }

    fn eval(&self, e: &NodeExpr) -> Result<Node, String> {
        self.lib
            .eval(e)
            .map_err(|err| format!("`{}` does not evaluate: {}", e, err))
    }

    /// Goals of the premises: the given ones, or for Temp the derived ones.
    pub fn premise_goals(
        &self,
        node: &ProofNode,
        goal: &Judgment,
    ) -> Result<Vec<Judgment>, String> {
        if node.rules == [Rule::Temp] && node.premises.len() == 2 {
            let derived = self.temp_premises(node, goal)?;
            return Ok(node
                .premises
                .iter()
                .zip(derived)
                .map(|(p, d)| p.goal.clone().unwrap_or(d))
                .collect());
        }
        node.premises
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.goal
                    .clone()
                    .ok_or_else(|| format!("premise {} has no goal", i + 1))
            })
            .collect()
    }

    /// Checks one inference. `premises` are the premise goals in order.
    pub fn check_rule(
        &self,
        node: &ProofNode,
        goal: &Judgment,
        premises: &[Judgment],
    ) -> Result<(), String> {
        let arity = |lo: usize, hi: usize| {
            if premises.len() < lo || premises.len() > hi {
                let want = if lo == hi {
                    lo.to_string()
                } else {
                    format!("{} to {}", lo, hi)
                };
                Err(format!(
                    "rule {} takes {} premises, found {}",
                    node.rule_label(),
                    want,
                    premises.len()
                ))
            } else {
                Ok(())
            }
        };
        match node.rules.as_slice() {
            [Rule::V] => arity(0, 0),
            [Rule::IP] => {
                arity(0, 0)?;
                self.check_ip(&goal.lhs, &goal.rhs)
            }
            [Rule::AG] => {
                arity(2, 2)?;
                self.check_ag(goal, &premises[0], &premises[1], false)
            }
            [Rule::AG, Rule::Cons] => {
                arity(2, 2)?;
                self.check_ag(goal, &premises[0], &premises[1], true)
            }
            [Rule::Cons] => {
                arity(2, 3)?;
                self.check_cons(goal, premises)
            }
            [Rule::Cons, Rule::IP] => {
                arity(1, 1)?;
                self.check_cons_ip(goal, &premises[0])
            }
            [Rule::RT] => {
                arity(1, 1)?;
                let lifted = self.rt_lift(&premises[0], node.r, node.s)?;
                self.same(&goal.lhs, &lifted.lhs, "left-hand side")?;
                self.same(&goal.rhs, &lifted.rhs, "right-hand side")
            }
            [Rule::RT, Rule::AG] => {
                arity(2, 2)?;
                let mut errs = Vec::new();
                for i in 0..2 {
                    let attempt = self
                        .rt_lift(&premises[i], node.r, node.s)
                        .and_then(|lifted| self.check_ag(goal, &lifted, &premises[1 - i], false));
                    match attempt {
                        Ok(()) => return Ok(()),
                        Err(e) => errs.push(format!("lifting premise {}: {}", i + 1, e)),
                    }
                }
                Err(errs.join("; "))
            }
            [Rule::Temp] => {
                arity(2, 2)?;
                let [d1, d2] = self.temp_premises(node, goal)?;
                for (i, (p, d)) in premises.iter().zip([d1, d2]).enumerate() {
                    self.same(&p.lhs, &d.lhs, &format!("premise {} left-hand side", i + 1))?;
                    self.same(
                        &p.rhs,
                        &d.rhs,
                        &format!("premise {} right-hand side", i + 1),
                    )?;
                }
                Ok(())
            }
            _ => Err(format!(
                "unsupported rule annotation `{}`",
                node.rule_label()
            )),
        }
    }

    fn same(&self, found: &NodeExpr, expected: &NodeExpr, what: &str) -> Result<(), String> {
        let f = self.side(found)?;
        let e = self.side(expected)?;
        if keys(&f) == keys(&e) {
            Ok(())
        } else {
            Err(format!(
                "{}: expected `{}`, found `{}`",
                what,
                show(&e),
                show(&f)
            ))
        }
    }
}

fn keys(v: &Leaves) -> Vec<&str> {
    v.iter().map(|(k, _)| k.as_str()).collect()
}

fn show(v: &Leaves) -> String {
    if v.is_empty() {
        "(empty)".into()
    } else {
        v.iter()
            .map(|(k, _)| k.as_str())
            .collect::<Vec<_>>()
            .join(" || ")
    }
}

/// `a` minus `b` as multisets; the error names a leaf of `b` missing from `a`.
fn minus(a: &Leaves, b: &Leaves) -> Result<Leaves, String> {
    let mut rest = a.clone();
    for (k, _) in b {
        match rest.iter().position(|(x, _)| x == k) {
            Some(i) => {
                rest.remove(i);
            }
            None => return Err(k.clone()),
        }
    }
    Ok(rest)
}

fn union(a: &Leaves, b: &Leaves) -> Leaves {
    let mut v: Leaves = a.iter().chain(b).cloned().collect();
    v.sort_by(|x, y| x.0.cmp(&y.0));
    v
}

fn rebuild(v: &Leaves) -> Option<NodeExpr> {
    NodeExpr::par_all(v.iter().map(|(_, e)| e.clone()))
}

fn observers(v: &Leaves) -> Vec<SafetyProperty> {
    v.iter()
        .filter_map(|(_, e)| match e {
            NodeExpr::Observer(p) => Some(p.clone()),
            _ => None,
        })
        .collect()
}

fn rt_inst(e: &NodeExpr) -> Option<&TemplateInst> {
    match e {
        NodeExpr::Template(t) if t.name == RATE_TRANSITION => Some(t),
        NodeExpr::Rename(a, ..) => rt_inst(a),
        _ => None,
    }
}

fn rt_period(t: &TemplateInst) -> Option<u64> {
    match t.args.get(1) {
        Some(TemplateArg::Value(Value::Int(i))) => i.to_u64().filter(|p| *p > 0),
        _ => None,
    }
}

fn with_period(e: &NodeExpr, period: u64) -> NodeExpr {
    match e {
        NodeExpr::Template(t) => {
            let mut t = t.clone();
            t.args[1] = TemplateArg::Value(Value::int(period as i64));
            NodeExpr::Template(t)
        }
        NodeExpr::Rename(a, x, y) => {
            NodeExpr::Rename(Box::new(with_period(a, period)), x.clone(), y.clone())
        }
        e => e.clone(),
    }
}

impl<'a> Checker<'a> {
    fn check_ag(
        &self,
        goal: &Judgment,
        p1: &Judgment,
        p2: &Judgment,
        relaxed: bool,
    ) -> Result<(), String> {
        let na = self.side(&p1.rhs)?;
        let nb = self.side(&p2.rhs)?;
        let n1 = minus(&self.side(&p1.lhs)?, &nb).map_err(|k| {
            format!(
                "premise 1 must assume `{}` from the right-hand side of premise 2",
                k
            )
        })?;
        let n2 = minus(&self.side(&p2.lhs)?, &na).map_err(|k| {
            format!(
                "premise 2 must assume `{}` from the right-hand side of premise 1",
                k
            )
        })?;
        let gl = self.side(&goal.lhs)?;
        let gr = self.side(&goal.rhs)?;
        let want_l = union(&n1, &n2);
        let want_r = union(&na, &nb);
        if relaxed {
            let extra = minus(&gl, &want_l).map_err(|k| {
                format!(
                    "left-hand side lacks `{}`: expected at least `{}`, found `{}`",
                    k,
                    show(&want_l),
                    show(&gl)
                )
            })?;
            if let Some((k, _)) = extra.iter().find(|(_, e)| !e.is_observer()) {
                return Err(format!(
                    "left-hand side: the extra leaf `{}` is not an observer",
                    k
                ));
            }
            minus(&want_r, &gr).map_err(|k| {
                format!(
                    "right-hand side: `{}` is not guaranteed by the premises, which give `{}`",
                    k,
                    show(&want_r)
                )
            })?;
        } else {
            if keys(&gl) != keys(&want_l) {
                return Err(format!(
                    "left-hand side: expected `{}`, found `{}`",
                    show(&want_l),
                    show(&gl)
                ));
            }
            if keys(&gr) != keys(&want_r) {
                return Err(format!(
                    "right-hand side: expected `{}`, found `{}`",
                    show(&want_r),
                    show(&gr)
                ));
            }
        }
        let oa = self.scope(&na)?;
        let ob = self.scope(&nb)?;
        if let Some(v) = oa.intersection(&ob).next() {
            return Err(format!("`{}` is in the scope of both guarantees", v));
        }
        for (what, v) in [
            ("N1 || N2", union(&n1, &n2)),
            ("N1 || Nb", union(&n1, &nb)),
            ("N2 || Na", union(&n2, &na)),
        ] {
            if let Some(e) = rebuild(&v) {
                self.eval(&e)
                    .map_err(|err| format!("{} is not compatible: {}", what, err))?;
            }
        }
        if !self.independent(&n1, &na, &nb)? && !self.independent(&n2, &nb, &na)? {
            return Err("circular assumptions: each premise reads the other's guarantee, or the guarantee it \
                        assumes is unsatisfiable"
                .into());
        }
        Ok(())
    }

    /// Variables a side talks about: outputs of nodes, observed variables
    /// of observers.
    fn scope(&self, v: &Leaves) -> Result<BTreeSet<String>, String> {
        let mut out = BTreeSet::new();
        for (_, e) in v {
            match e {
                NodeExpr::Observer(p) => out.extend(p.free_vars()),
                e => out.extend(self.eval(e)?.output_names()),
            }
        }
        Ok(out)
    }

    fn wires(&self, v: &Leaves) -> Result<BTreeSet<String>, String> {
        let mut out = BTreeSet::new();
        for (_, e) in v {
            match e {
                NodeExpr::Observer(p) => out.extend(p.free_vars()),
                e => {
                    let n = self.eval(e)?;
                    out.extend(n.input_names());
                    out.extend(n.output_names());
                }
            }
        }
        Ok(out)
    }

    /// Whether the premise `n || assumed |= own` holds without its
    /// assumption: `assumed` shares no wire with `n` or `own` and can be
    /// met on every prefix.
    fn independent(&self, n: &Leaves, own: &Leaves, assumed: &Leaves) -> Result<bool, String> {
        let av = self.wires(assumed)?;
        let mut nv = self.wires(n)?;
        nv.extend(self.wires(own)?);
        if av.intersection(&nv).next().is_some() {
            return Ok(false);
        }
        let props = observers(assumed);
        let mut node_wires = BTreeSet::new();
        for (_, e) in assumed.iter().filter(|(_, e)| !e.is_observer()) {
            let node = self.eval(e)?;
            if node.init_point().is_none() || !node.params.is_empty() {
                return Ok(false);
            }
            node_wires.extend(node.input_names());
            node_wires.extend(node.output_names());
        }
        if props
            .iter()
            .flat_map(|p| p.free_vars())
            .any(|v| node_wires.contains(&v))
        {
            return Ok(false);
        }
        let exprs: Vec<NodeExpr> = assumed.iter().map(|(_, e)| e.clone()).collect();
        let types = self.types(&exprs, &props)?;
        self.satisfiable(&props, &types)
    }

    /// Every round's conjunction of atoms has a model.
    fn satisfiable(
        &self,
        props: &[SafetyProperty],
        types: &BTreeMap<String, Type>,
    ) -> Result<bool, String> {
        let mut always = Vec::new();
        let mut at: BTreeMap<u64, Vec<Expr>> = BTreeMap::new();
        for a in props.iter().flat_map(|p| p.atoms()) {
            match a {
                SafetyProperty::Always(e) => always.push(e),
                SafetyProperty::At(e, t) => at.entry(t).or_default().push(e),
                SafetyProperty::And(..) => unreachable!("atoms are never conjunctions"),
            }
        }
        let mut cases = vec![always.clone()];
        cases.extend(at.into_values().map(|mut v| {
            v.extend(always.iter().cloned());
            v
        }));
        for c in cases.into_iter().filter(|c| !c.is_empty()) {
            match check_valid(&Expr::not(Expr::and_all(c)), types, self.cfg)
                .map_err(|e| e.to_string())?
            {
                Validity::Valid => return Ok(false),
                Validity::Invalid(_) => {}
                Validity::Unknown(r) => return Err(format!("solver returned unknown: {}", r)),
            }
        }
        Ok(true)
    }

    /// Types of the wires of `exprs`, with observed variables typed from
    /// their use where the nodes do not fix them.
    fn types(
        &self,
        exprs: &[NodeExpr],
        props: &[SafetyProperty],
    ) -> Result<BTreeMap<String, Type>, String> {
        let mut types = BTreeMap::new();
        for e in exprs {
            for (v, t) in self.lib.types_of(e).map_err(|e| e.to_string())? {
                types.entry(v).or_insert(t);
            }
        }
        for a in props.iter().flat_map(|p| p.atoms()) {
            if let SafetyProperty::Always(e) | SafetyProperty::At(e, _) = &a {
                infer_var_types(e, Type::Bool, &mut types);
            }
        }
        for p in props {
            if let Some(v) = p.free_vars().into_iter().find(|v| !types.contains_key(v)) {
                return Err(format!("cannot infer the type of `{}`", v));
            }
        }
        Ok(types)
    }

    fn check_cons(&self, goal: &Judgment, ps: &[Judgment]) -> Result<(), String> {
        self.same(&ps[0].lhs, &goal.lhs, "premise 1 left-hand side")?;
        for i in 1..ps.len() {
            self.same(
                &ps[i].lhs,
                &ps[i - 1].rhs,
                &format!("premise {} left-hand side", i + 1),
            )?;
        }
        self.same(
            &ps[ps.len() - 1].rhs,
            &goal.rhs,
            "right-hand side of the last premise",
        )
    }

    fn check_cons_ip(&self, goal: &Judgment, p: &Judgment) -> Result<(), String> {
        let gl = self.side(&goal.lhs)?;
        let extra = minus(&gl, &self.side(&p.lhs)?)
            .map_err(|k| format!("left-hand side must contain the premise's `{}`", k))?;
        if let Some((k, _)) = extra.iter().find(|(_, e)| !e.is_observer()) {
            return Err(format!(
                "left-hand side: the extra leaf `{}` is not an observer",
                k
            ));
        }
        self.check_implication(&p.rhs, &goal.rhs, std::slice::from_ref(&goal.lhs))
    }

    fn check_ip(&self, lhs: &NodeExpr, rhs: &NodeExpr) -> Result<(), String> {
        self.check_implication(lhs, rhs, &[])
    }

    /// `from` and `to` are observer compositions and `from` implies `to`
    /// round by round.
    fn check_implication(
        &self,
        from: &NodeExpr,
        to: &NodeExpr,
        ctx: &[NodeExpr],
    ) -> Result<(), String> {
        let f = self.side(from)?;
        let t = self.side(to)?;
        for (k, e) in f.iter().chain(&t) {
            if !e.is_observer() {
                return Err(format!(
                    "implication between contracts needs observers only, found `{}`",
                    k
                ));
            }
        }
        if minus(&f, &t).is_ok() {
            return Ok(());
        }
        let phi1 = SafetyProperty::and_all(observers(&f))
            .unwrap_or(SafetyProperty::Always(Expr::bool(true)));
        let phi2 = SafetyProperty::and_all(observers(&t))
            .unwrap_or(SafetyProperty::Always(Expr::bool(true)));
        let types = self.types(ctx, &[phi1.clone(), phi2.clone()])?;
        match implies(&phi1, &phi2, &|v| types.get(v).copied(), self.cfg)
            .map_err(|e| e.to_string())?
        {
            Implication::Valid => Ok(()),
            Implication::Countermodel { round, values } => {
                let vals: Vec<String> = values
                    .iter()
                    .map(|(k, v)| format!("{} = {}", k, v))
                    .collect();
                let at = round
                    .map(|r| format!(" at round {}", r))
                    .unwrap_or_default();
                Err(format!(
                    "`{}` does not imply `{}`{}: {}",
                    phi1,
                    phi2,
                    at,
                    vals.join(", ")
                ))
            }
            Implication::Unknown(r) => {
                Err(format!("solver returned unknown on the implication: {}", r))
            }
        }
    }

    /// The conclusion of the rate-transition rule applied to `p`.
    pub fn rt_lift(
        &self,
        p: &Judgment,
        r: Option<u64>,
        s: Option<u64>,
    ) -> Result<Judgment, String> {
        let r = r.ok_or("RT needs the factor `r`")?;
        if r < 2 {
            return Err(format!("the factor r must be at least 2, found {}", r));
        }
        let lhs = self.side(&p.lhs)?;
        let rts: Vec<&NodeExpr> = lhs
            .iter()
            .map(|(_, e)| e)
            .filter(|e| rt_inst(e).is_some())
            .collect();
        if rts.len() != 1 {
            return Err(format!(
                "the premise must contain exactly one {} leaf, found {}",
                RATE_TRANSITION,
                rts.len()
            ));
        }
        let period = rt_period(rt_inst(rts[0]).expect("filtered above"))
            .ok_or("the rate-transition period must be a positive integer constant")?;
        if let Some(s) = s {
            if s != period {
                return Err(format!(
                    "s = {} but the rate transition has period {}",
                    s, period
                ));
            }
        }
        let en_names = self.eval(rts[0])?.output_names();
        let en = en_names
            .iter()
            .next()
            .cloned()
            .ok_or("the rate transition has no output")?;
        let mut out = Vec::new();
        for (k, e) in &lhs {
            match e {
                e if rt_inst(e).is_some() => out.push(with_period(e, r * period)),
                NodeExpr::Observer(phi) => out.push(NodeExpr::Observer(phi.rescale(r))),
                e => {
                    let n = self.eval(e)?;
                    if n.inputs.is_empty() {
                        return Err(format!(
                            "`{}` is not gated by the rate transition: it has no inputs",
                            k
                        ));
                    }
                    if let Some(i) = n.inputs.iter().find(|i| !en_names.contains(&i.name)) {
                        return Err(format!(
                            "`{}` reads `{}`, which the rate transition does not drive",
                            k, i.name
                        ));
                    }
                    let holds = engine::holds_state_when_disabled(self.cfg, &n, &en)
                        .map_err(|e| e.to_string())?;
                    if !holds {
                        return Err(format!("`{}` changes its state while `{}` is false", k, en));
                    }
                    out.push(e.clone());
                }
            }
        }
        let mut rhs = Vec::new();
        for (k, e) in self.side(&p.rhs)? {
            match e {
                NodeExpr::Observer(phi) if !phi.has_always() => {
                    rhs.push(NodeExpr::Observer(phi.rescale(r)))
                }
                NodeExpr::Observer(_) => {
                    return Err(format!(
                        "`{}` holds at every round and cannot be rescaled",
                        k
                    ))
                }
                _ => {
                    return Err(format!(
                        "the right-hand side must consist of observers, found `{}`",
                        k
                    ))
                }
            }
        }
        Ok(Judgment {
            lhs: NodeExpr::par_all(out).ok_or("empty left-hand side")?,
            rhs: NodeExpr::par_all(rhs).ok_or("empty right-hand side")?,
        })
    }

    /// The two premises Temp expects for `goal`.
    pub fn temp_premises(
        &self,
        node: &ProofNode,
        goal: &Judgment,
    ) -> Result<[Judgment; 2], String> {
        let j = node.j.ok_or("Temp needs `j`")?;
        let k = node.k.ok_or("Temp needs `k`")?;
        if let Some((key, _)) = self.side(&goal.lhs)?.iter().find(|(_, e)| e.is_observer()) {
            return Err(format!(
                "Temp needs a left-hand side without observers, found `{}`",
                key
            ));
        }
        let mut round = None;
        let mut es = Vec::new();
        for (key, e) in self.side(&goal.rhs)? {
            match e {
                NodeExpr::Observer(SafetyProperty::At(x, t)) if round.is_none_or(|r| r == t) => {
                    round = Some(t);
                    es.push(x);
                }
                _ => {
                    return Err(format!(
                        "Temp needs a goal of the form obs(e@n), found `{}`",
                        key
                    ))
                }
            }
        }
        let n = round.ok_or("Temp needs a goal of the form obs(e@n)")?;
        if j + k + 1 != n {
            return Err(format!(
                "j + k + 1 = {} + {} + 1 = {}, but the goal observes round {}",
                j,
                k,
                j + k + 1,
                n
            ));
        }
        let sys = self.eval(&goal.lhs)?;
        let e_s = match &node.state_pred {
            Some(StatePred::Given(e)) => e.clone(),
            Some(StatePred::Simulate) => {
                if !sys.inputs.is_empty() {
                    return Err(format!(
                        "state_pred: simulate needs a closed left-hand side, `{}` has inputs",
                        goal.lhs
                    ));
                }
                let inputs = vec![Valuation::new(); j as usize + 1];
                engine::temp_split_assist(&sys, &inputs, j as usize).map_err(|e| e.to_string())?
            }
            None => match node
                .premises
                .get(1)
                .and_then(|p| p.goal.as_ref())
                .map(|g| self.lib.resolve(&g.lhs))
            {
                Some(Ok(NodeExpr::Combi(_, Some(e)))) => e,
                _ => {
                    return Err(
                        "Temp needs `state_pred` or a second premise of the form C(N, e)".into(),
                    )
                }
            },
        };
        let primed =
            prime(&e_s, &sys.state_names()).map_err(|e| format!("state predicate: {}", e))?;
        let lhs = Box::new(goal.lhs.clone());
        Ok([
            Judgment {
                lhs: NodeExpr::Combi(lhs.clone(), None),
                rhs: NodeExpr::Observer(SafetyProperty::At(primed, j)),
            },
            Judgment {
                lhs: NodeExpr::Combi(lhs, Some(e_s)),
                rhs: NodeExpr::Observer(SafetyProperty::At(Expr::and_all(es), k)),
            },
        ])
    }
}

/// Checks the inference at `node` against its own and its premises'
/// written goals; Temp premises without a goal are derived.
pub fn check_rule(lib: &Library, cfg: &SolverConfig, node: &ProofNode) -> Result<(), String> {
    let c = Checker::new(lib, cfg);
    let goal = node.goal.as_ref().ok_or("the node has no goal")?;
    let premises = c.premise_goals(node, goal)?;
    c.check_rule(node, goal, &premises)
}

/// Discharges a V leaf by bounded checking up to `bound` rounds.
pub fn discharge_leaf(
    lib: &Library,
    cfg: &SolverConfig,
    goal: &Judgment,
    bound: usize,
) -> Result<Verdict, EngineError> {
    engine::check_judgment(lib, &goal.lhs, &goal.rhs, bound, cfg)
}

/// Largest round observed on the right-hand side, the default V bound.
pub fn default_bound(lib: &Library, goal: &Judgment) -> usize {
    lib.resolve(&goal.rhs)
        .map(|rhs| {
            rhs.operands()
                .iter()
                .filter_map(|e| match e {
                    NodeExpr::Observer(p) => p.max_round(),
                    _ => None,
                })
                .max()
                .unwrap_or(0) as usize
        })
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    ShapeOk,
    ShapeError {
        reason: String,
    },
    Leaf {
        verdict: Verdict,
    },
    /// The node could not be checked at all; `solver` when the external
    /// solver failed.
    Error {
        reason: String,
        solver: bool,
    },
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        match self {
            Outcome::ShapeOk => true,
            Outcome::Leaf { verdict } => verdict.holds(),
            _ => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Outcome::ShapeOk => "shape ok".into(),
            Outcome::ShapeError { reason } => format!("shape error: {}", reason),
            Outcome::Leaf { verdict } => verdict.label(),
            Outcome::Error { reason, .. } => format!("error: {}", reason),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeReport {
    /// Position in the tree: `2.1` is the first premise of the second proof.
    pub id: String,
    pub line: u32,
    pub rule: String,
    pub goal: String,
    pub bound: Option<usize>,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub ok: bool,
    pub nodes: Vec<NodeReport>,
    /// Time spent in rule checks and leaf discharges, summed over nodes.
    pub solver_seconds: f64,
    pub wall_seconds: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn failed(&self) -> impl Iterator<Item = &NodeReport> {
        self.nodes.iter().filter(|n| !n.outcome.is_ok())
    }

    /// Whether some obligation failed because the solver did not answer.
    pub fn solver_failed(&self) -> bool {
        self.nodes.iter().any(|n| {
            matches!(
                &n.outcome,
                Outcome::Error { solver: true, .. }
                    | Outcome::Leaf {
                        verdict: Verdict::Unknown { .. }
                    }
            )
        })
    }

    /// Human-readable form; counterexample traces follow their node as CSV.
    pub fn human(&self) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            let mark = if n.outcome.is_ok() { "ok  " } else { "FAIL" };
            let indent = "  ".repeat(n.id.matches('.').count());
            s.push_str(&format!(
                "[{}] {}{} ({}) {}\n",
                mark, indent, n.id, n.rule, n.goal
            ));
            s.push_str(&format!(
                "       {}{} ({:.3} s, line {})\n",
                indent,
                n.outcome.label(),
                n.seconds,
                n.line
            ));
            if let Outcome::Leaf {
                verdict: Verdict::Counterexample { trace, .. },
            } = &n.outcome
            {
                for line in trace.to_csv().lines() {
                    s.push_str(&format!("         | {}\n", line));
                }
            }
        }
        let failed = self.failed().count();
        s.push_str(&format!(
            "{} nodes, {} failed; solver time {:.3} s, wall time {:.3} s\n",
            self.nodes.len(),
            failed,
            self.solver_seconds,
            self.wall_seconds
        ));
        s
    }
}

/// Validates every proof: rule checks depth first, then all V leaves in
/// parallel on at most `jobs` threads.
pub fn validate_proofs(
    lib: &Library,
    cfg: &SolverConfig,
    proofs: &[ProofNode],
    jobs: usize,
) -> Report {
    let start = Instant::now();
    let checker = Checker::new(lib, cfg);
    let mut nodes = Vec::new();
    let mut leaves = Vec::new();
    for (i, p) in proofs.iter().enumerate() {
        walk(
            &checker,
            p,
            p.goal.clone(),
            (i + 1).to_string(),
            &mut nodes,
            &mut leaves,
        );
    }
    let run = || {
        leaves
            .par_iter()
            .map(|(idx, goal, bound)| {
                let t = Instant::now();
                let v = discharge_leaf(lib, cfg, goal, *bound);
                (*idx, v, t.elapsed().as_secs_f64())
            })
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    for (idx, v, secs) in results {
        let n: &mut NodeReport = &mut nodes[idx];
        n.seconds = secs;
        n.outcome = match v {
            Ok(verdict) => Outcome::Leaf { verdict },
            Err(e) => Outcome::Error {
                reason: e.to_string(),
                solver: matches!(e, EngineError::Smt(_)),
            },
        };
    }
    Report {
        ok: nodes.iter().all(|n| n.outcome.is_ok()),
        solver_seconds: nodes.iter().map(|n| n.seconds).sum(),
        wall_seconds: start.elapsed().as_secs_f64(),
        nodes,
    }
}

pub fn validate_tree(lib: &Library, cfg: &SolverConfig, tree: &ProofNode, jobs: usize) -> Report {
    validate_proofs(lib, cfg, std::slice::from_ref(tree), jobs)
}

fn walk(
    c: &Checker<'_>,
    node: &ProofNode,
    goal: Option<Judgment>,
    id: String,
    nodes: &mut Vec<NodeReport>,
    leaves: &mut Vec<(usize, Judgment, usize)>,
) {
    let idx = nodes.len();
    nodes.push(NodeReport {
        id: id.clone(),
        line: node.pos.line,
        rule: node.rule_label(),
        goal: goal
            .as_ref()
            .map_or_else(|| "(missing)".into(), |g| g.to_string()),
        bound: None,
        outcome: Outcome::ShapeOk,
        seconds: 0.0,
    });
    let t = Instant::now();
    let premise_goals = match &goal {
        None => {
            nodes[idx].outcome = Outcome::Error {
                reason: "the node has no goal".into(),
                solver: false,
            };
            None
        }
        Some(goal) if node.rules == [Rule::V] => {
            if node.premises.is_empty() {
                let b = node.bound.unwrap_or_else(|| default_bound(c.lib, goal));
                nodes[idx].bound = Some(b);
                leaves.push((idx, goal.clone(), b));
            } else {
                nodes[idx].outcome = Outcome::ShapeError {
                    reason: format!("rule V takes no premises, found {}", node.premises.len()),
                };
            }
            None
        }
        Some(goal) => match c.premise_goals(node, goal) {
            Ok(ps) => {
                if let Err(reason) = c.check_rule(node, goal, &ps) {
                    nodes[idx].outcome = Outcome::ShapeError { reason };
                }
                Some(ps)
            }
            Err(reason) => {
                nodes[idx].outcome = Outcome::ShapeError { reason };
                None
            }
        },
    };
    nodes[idx].seconds = t.elapsed().as_secs_f64();
    for (i, p) in node.premises.iter().enumerate() {
        let g = premise_goals
            .as_ref()
            .and_then(|ps| ps.get(i).cloned())
            .or_else(|| p.goal.clone());
        walk(c, p, g, format!("{}.{}", id, i + 1), nodes, leaves);
    }
}
