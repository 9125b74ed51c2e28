//! Node expressions: composition, renaming, Init replacement, the
//! combinational translation, observers and template instances.

pub mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::frontend::TypedProgram;
use crate::ir::{display_var, Expr, Type};
use crate::properties::{infer_var_types, observer, PropertyError, SafetyProperty};
use crate::semantics::elaborate::{instance_name, Elaborator};
use crate::semantics::{ElabError, Node};
use crate::templates::{self, TemplateError, TemplateInst};

pub use ops::{
    combinational, combinational_node, compose, double_primed, primed, rename, with_init,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("output `{0}` is defined by both operands")]
    OutputClash(String),
    #[error("wire `{var}` has type {a} on one side and {b} on the other")]
    WireType { var: String, a: Type, b: Type },
    #[error("causality cycle through {}", .0.join(" -> "))]
    Causality(Vec<String>),
    #[error("unknown variable `{0}`")]
    UnknownVar(String),
    #[error("name `{0}` is already used")]
    NameCollision(String),
    #[error("`{0}` is not a state variable")]
    NotState(String),
    #[error("state `{0}` has no next-value definition")]
    MissingNext(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("`{0}` is defined in terms of itself")]
    RecursiveLet(String),
    #[error("cannot infer the type of `{0}`")]
    Untyped(String),
    #[error(transparent)]
    Elab(#[from] ElabError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("{0}")]
    Other(String),
}

/// A term of the node algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeExpr {
    Named(String),
    Par(Box<NodeExpr>, Box<NodeExpr>),
    Rename(Box<NodeExpr>, String, String),
    WithInit(Box<NodeExpr>, Expr),
    /// `C(n, e)`; `None` keeps the node's own Init.
    Combi(Box<NodeExpr>, Option<Expr>),
    Observer(SafetyProperty),
    Template(TemplateInst),
}

impl NodeExpr {
    pub fn par(a: NodeExpr, b: NodeExpr) -> NodeExpr {
        NodeExpr::Par(Box::new(a), Box::new(b))
    }

    /// Right-nested composition of the given operands.
    pub fn par_all(items: impl IntoIterator<Item = NodeExpr>) -> Option<NodeExpr> {
        let v: Vec<NodeExpr> = items.into_iter().collect();
        v.into_iter().rev().reduce(|acc, x| NodeExpr::par(x, acc))
    }

    pub fn rename(self, x: &str, y: &str) -> NodeExpr {
        NodeExpr::Rename(Box::new(self), x.into(), y.into())
    }

    pub fn is_observer(&self) -> bool {
        matches!(self, NodeExpr::Observer(_))
    }

    /// Operands of nested `||`, left to right.
    pub fn operands(&self) -> Vec<&NodeExpr> {
        match self {
            NodeExpr::Par(a, b) => {
                let mut v = a.operands();
                v.extend(b.operands());
                v
            }
            e => vec![e],
        }
    }

    /// Operands with observers split into their atomic conjuncts.
    pub fn leaves(&self) -> Vec<NodeExpr> {
        self.operands()
            .into_iter()
            .flat_map(|e| match e {
                NodeExpr::Observer(p) => p.atoms().into_iter().map(NodeExpr::Observer).collect(),
                e => vec![e.clone()],
            })
            .collect()
    }

    /// Canonical multiset of leaves, used for structural matching.
    pub fn leaf_keys(&self) -> Vec<String> {
        let mut v: Vec<String> = self.leaves().iter().map(NodeExpr::canon).collect();
        v.sort();
        v
    }

    /// Printed form that ignores the order and nesting of `||` and the
    /// order of observer conjuncts.
    pub fn canon(&self) -> String {
        match self {
            NodeExpr::Par(..) => {
                let mut v: Vec<String> = self.operands().iter().map(|o| o.canon()).collect();
                v.sort();
                format!("({})", v.join(" || "))
            }
            NodeExpr::Rename(a, x, y) => {
                format!("{}[{} := {}]", a.canon(), display_var(x), display_var(y))
            }
            NodeExpr::WithInit(a, e) => format!("{}[init := {}]", a.canon(), e),
            NodeExpr::Combi(a, Some(e)) => format!("C({}, {})", a.canon(), e),
            NodeExpr::Combi(a, None) => format!("C({}, init)", a.canon()),
            NodeExpr::Observer(p) => {
                let mut v: Vec<String> = p.atoms().iter().map(|a| a.to_string()).collect();
                v.sort();
                format!("obs({})", v.join(" /\\ "))
            }
            e => e.to_string(),
        }
    }

    /// Names referenced by `Named` leaves.
    pub fn named(&self, out: &mut BTreeSet<String>) {
        match self {
            NodeExpr::Named(n) => {
                out.insert(n.clone());
            }
            NodeExpr::Par(a, b) => {
                a.named(out);
                b.named(out);
            }
            NodeExpr::Rename(a, ..) | NodeExpr::WithInit(a, _) | NodeExpr::Combi(a, _) => {
                a.named(out)
            }
            NodeExpr::Observer(_) | NodeExpr::Template(_) => {}
        }
    }

    fn fmt_atom(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeExpr::Par(..) => write!(f, "({})", self),
            e => write!(f, "{}", e),
        }
    }
}

impl fmt::Display for NodeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeExpr::Named(n) => f.write_str(&display_var(n)),
            NodeExpr::Par(a, b) => {
                write!(f, "{} || ", a)?;
                b.fmt_atom(f)
            }
            NodeExpr::Rename(a, x, y) => {
                a.fmt_atom(f)?;
                write!(f, "[{} := {}]", display_var(x), display_var(y))
            }
            NodeExpr::WithInit(a, e) => {
                a.fmt_atom(f)?;
                write!(f, "[init := {}]", e)
            }
            NodeExpr::Combi(a, e) => match e {
                Some(e) => write!(f, "C({}, {})", a, e),
                None => write!(f, "C({}, init)", a),
            },
            NodeExpr::Observer(p) => write!(f, "obs({})", p),
            NodeExpr::Template(t) => write!(f, "{}", t),
        }
    }
}

/// A program together with `let`-bound node expressions.
#[derive(Clone, Debug)]
pub struct Library {
    pub program: TypedProgram,
    pub lets: BTreeMap<String, NodeExpr>,
    /// Already elaborated nodes, named like program nodes.
    pub nodes: BTreeMap<String, Node>,
}

impl Library {
    pub fn new(program: TypedProgram) -> Library {
        Library {
            program,
            lets: BTreeMap::new(),
            nodes: BTreeMap::new(),
        }
    }

    pub fn define(&mut self, name: &str, e: NodeExpr) {
        self.lets.insert(name.to_string(), e);
    }

    /// Expands `let` names.
    pub fn resolve(&self, e: &NodeExpr) -> Result<NodeExpr, AlgebraError> {
        self.resolve_in(e, &mut Vec::new())
    }

    fn resolve_in(&self, e: &NodeExpr, stack: &mut Vec<String>) -> Result<NodeExpr, AlgebraError> {
        Ok(match e {
            NodeExpr::Named(n) => match self.lets.get(n) {
                Some(d) => {
                    if stack.contains(n) {
                        return Err(AlgebraError::RecursiveLet(n.clone()));
                    }
                    stack.push(n.clone());
                    let r = self.resolve_in(d, stack)?;
                    stack.pop();
                    r
                }
                None => e.clone(),
            },
            NodeExpr::Par(a, b) => {
                NodeExpr::par(self.resolve_in(a, stack)?, self.resolve_in(b, stack)?)
            }
            NodeExpr::Rename(a, x, y) => {
                NodeExpr::Rename(Box::new(self.resolve_in(a, stack)?), x.clone(), y.clone())
            }
            NodeExpr::WithInit(a, p) => {
                NodeExpr::WithInit(Box::new(self.resolve_in(a, stack)?), p.clone())
            }
            NodeExpr::Combi(a, p) => {
                NodeExpr::Combi(Box::new(self.resolve_in(a, stack)?), p.clone())
            }
            e => e.clone(),
        })
    }

    /// Evaluates to a node. Observer variables are typed from the other
    /// operands where possible.
    pub fn eval(&self, e: &NodeExpr) -> Result<Node, AlgebraError> {
        let e = self.resolve(e)?;
        let types = self.types_of(&e)?;
        self.eval_typed(&e, &types)
    }

    /// Variable types of everything in `e` except observers.
    pub fn types_of(&self, e: &NodeExpr) -> Result<BTreeMap<String, Type>, AlgebraError> {
        let e = self.resolve(e)?;
        // Nodes first, so that generic templates take their wire types.
        let mut ev = Evaluator::new(self, BTreeMap::new(), true);
        ev.skip_templates = true;
        let mut types = BTreeMap::new();
        ev.collect_types(&e, &mut types)?;
        let mut ev = Evaluator::new(self, types.clone(), true);
        ev.collect_types(&e, &mut types)?;
        Ok(types)
    }

    /// Evaluates `e` with the given wire types for observers and templates.
    pub fn eval_typed(
        &self,
        e: &NodeExpr,
        types: &BTreeMap<String, Type>,
    ) -> Result<Node, AlgebraError> {
        let e = self.resolve(e)?;
        Evaluator::new(self, types.clone(), false).eval(&e, None)
    }
}

struct Evaluator<'l> {
    lib: &'l Library,
    elab: Elaborator<'l>,
    types: BTreeMap<String, Type>,
    skip_observers: bool,
    skip_templates: bool,
    counters: BTreeMap<String, usize>,
}

impl<'l> Evaluator<'l> {
    fn new(lib: &'l Library, types: BTreeMap<String, Type>, skip_observers: bool) -> Self {
        Evaluator {
            lib,
            elab: Elaborator::new(&lib.program),
            types,
            skip_observers,
            skip_templates: false,
            counters: BTreeMap::new(),
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        let c = self.counters.entry(base.to_string()).or_insert(0);
        *c += 1;
        format!("{}#{}", base, c)
    }

    fn collect_types(
        &mut self,
        e: &NodeExpr,
        out: &mut BTreeMap<String, Type>,
    ) -> Result<(), AlgebraError> {
        let n = self.eval(e, None)?;
        for v in n.vars() {
            out.entry(v.name.clone()).or_insert(v.ty);
        }
        Ok(())
    }

    fn empty() -> Node {
        Node {
            name: "true".into(),
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

    fn eval(&mut self, e: &NodeExpr, hint: Option<Type>) -> Result<Node, AlgebraError> {
        match e {
            NodeExpr::Named(name) => {
                if self.lib.lets.contains_key(name) {
                    let d = self.lib.resolve(e)?;
                    return self.eval(&d, hint);
                }
                let n = match self.lib.nodes.get(name) {
                    Some(n) => n.clone(),
                    None if self.lib.program.node(name).is_some() => self.elab.node(name, None)?,
                    None => return Err(AlgebraError::UnknownNode(name.clone())),
                };
                let internal: BTreeSet<String> = n
                    .states
                    .iter()
                    .chain(&n.locals)
                    .map(|v| v.name.clone())
                    .collect();
                let mut q = n.rename_all(&|v| {
                    if internal.contains(v) {
                        instance_name(name, v)
                    } else {
                        v.to_string()
                    }
                });
                q.name = name.clone();
                Ok(q)
            }
            NodeExpr::Par(a, b) => {
                let na = self.eval(a, None)?;
                let nb = self.eval(b, None)?;
                if self.skip_observers {
                    // Only types are needed; tolerate clashes reported later.
                    if let Ok(n) = compose(&na, &nb) {
                        return Ok(n);
                    }
                    let mut n = na;
                    n.locals.extend(nb.vars().cloned());
                    return Ok(n);
                }
                compose(&na, &nb)
            }
            NodeExpr::Rename(a, x, y) => {
                let h = if x == "Out" {
                    self.types.get(y).copied().or(hint)
                } else {
                    hint
                };
                let n = self.eval(a, h)?;
                if self.skip_templates && n.var_type(x).is_none() {
                    return Ok(n);
                }
                rename(&n, x, y)
            }
            NodeExpr::WithInit(a, p) => {
                let n = self.eval(a, hint)?;
                let mut r = with_init(&n, p)?;
                r.name = format!("{}[init := {}]", n.name, p);
                Ok(r)
            }
            NodeExpr::Combi(a, p) => {
                let n = self.eval(a, hint)?;
                let p = p.clone().unwrap_or_else(|| n.init.clone());
                match combinational_node(&n, &p) {
                    // Only types are needed; skipped templates hide some states.
                    Err(AlgebraError::NotState(_) | AlgebraError::UnknownVar(_))
                        if self.skip_templates =>
                    {
                        combinational_node(&n, &n.init)
                    }
                    r => r,
                }
            }
            NodeExpr::Observer(phi) => {
                if self.skip_observers {
                    return Ok(Self::empty());
                }
                let mut tys = BTreeMap::new();
                for v in phi.free_vars() {
                    if let Some(t) = self.types.get(&v) {
                        tys.insert(v, *t);
                    }
                }
                let mut atoms = Vec::new();
                collect_preds(phi, &mut atoms);
                for a in atoms {
                    infer_var_types(a, Type::Bool, &mut tys);
                }
                if let Some(v) = phi.free_vars().into_iter().find(|v| !tys.contains_key(v)) {
                    return Err(AlgebraError::Untyped(v));
                }
                let id = self.fresh("obs");
                let ok = format!("{}.ok", id);
                let prefix = format!("{}.", id);
                Ok(observer(phi, &|v| tys.get(v).copied(), &ok, &prefix)?)
            }
            NodeExpr::Template(_) if self.skip_templates => Ok(Self::empty()),
            NodeExpr::Template(inst) => {
                let types = &self.types;
                let ty = templates::resolve_type(inst, &|w| types.get(w).copied(), hint)
                    .unwrap_or(Type::Int);
                let prefix = self.fresh(&inst.name);
                let mut n = templates::instantiate(inst, ty, &prefix)?;
                n.name = inst.to_string();
                Ok(n)
            }
        }
    }
}

fn collect_preds<'a>(phi: &'a SafetyProperty, out: &mut Vec<&'a Expr>) {
    match phi {
        SafetyProperty::Always(e) | SafetyProperty::At(e, _) => out.push(e),
        SafetyProperty::And(a, b) => {
            collect_preds(a, out);
            collect_preds(b, out);
        }
    }
}

/// Same-round dependencies: every wire each variable reads, transitively
/// through the reaction (states cut the chain).
pub fn wire_dependencies(n: &Node) -> BTreeMap<String, BTreeSet<String>> {
    let mut memo: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for d in &n.defs {
        let mut s = BTreeSet::new();
        for v in d.expr.free_vars() {
            if let Some(m) = memo.get(&v) {
                s.extend(m.iter().cloned());
            }
            s.insert(v);
        }
        memo.insert(d.var.clone(), s);
    }
    memo
}

/// Input-to-output dependencies of a node.
pub fn dependencies(n: &Node) -> BTreeMap<String, BTreeSet<String>> {
    let all = wire_dependencies(n);
    let inputs = n.input_names();
    n.outputs
        .iter()
        .map(|o| {
            let ds = all
                .get(&o.name)
                .map(|d| d.intersection(&inputs).cloned().collect())
                .unwrap_or_default();
            (o.name.clone(), ds)
        })
        .collect()
}

/// Syntactic part of the implementation relation `m ⊨ n`: outputs and
/// inputs of `n` are wires of `m`, and every input-to-output dependency of
/// `n` is among the transitive dependencies of `m`.
pub fn check_signature(m: &Node, n: &Node) -> Result<(), String> {
    for o in &n.outputs {
        if !m.is_output(&o.name) {
            return Err(format!(
                "output `{}` is not produced by the implementation",
                o.name
            ));
        }
    }
    for i in &n.inputs {
        if !m.is_input(&i.name) && !m.is_output(&i.name) {
            return Err(format!(
                "input `{}` is not a wire of the implementation",
                i.name
            ));
        }
    }
    let dm = wire_dependencies(m);
    for (o, ins) in dependencies(n) {
        for i in ins {
            if !dm.get(&o).is_some_and(|d| d.contains(&i)) {
                return Err(format!("dependency of `{}` on `{}` is not preserved", o, i));
            }
        }
    }
    Ok(())
}

/// Bounded check of `m ⊨ n` up to `k` rounds; see the engine for the
/// supported right-hand sides.
pub fn check_impl_bounded(
    lib: &Library,
    m: &NodeExpr,
    n: &NodeExpr,
    k: usize,
    cfg: &crate::smt::SolverConfig,
) -> Result<crate::engine::Verdict, crate::engine::EngineError> {
    crate::engine::check_judgment(lib, m, n, k, cfg)
}
