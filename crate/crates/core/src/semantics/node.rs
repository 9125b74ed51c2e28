//! Elaborated nodes: inputs, outputs and states with an initial predicate
//! and a reaction given as ordered assignments.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::ir::{BinOp, Expr, Type, Valuation, Value, Var};

/// One assignment `var = expr`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Def {
    pub var: String,
    #[serde(serialize_with = "ser_expr")]
    pub expr: Expr,
}

fn ser_expr<S: serde::Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

impl Def {
    pub fn new(var: impl Into<String>, expr: Expr) -> Def {
        Def {
            var: var.into(),
            expr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Node {
    pub name: String,
    pub inputs: Vec<Var>,
    pub outputs: Vec<Var>,
    pub states: Vec<Var>,
    /// Intermediate wires: defined each round but not observable.
    pub locals: Vec<Var>,
    /// Symbolic constants (unbound template parameters). Empty for runnable nodes.
    pub params: Vec<Var>,
    /// Predicate over states (and params).
    #[serde(serialize_with = "ser_expr")]
    pub init: Expr,
    /// Current-round assignments of outputs and locals, in dependency order.
    pub defs: Vec<Def>,
    /// Next value of each state, over inputs, states and defined wires.
    pub next: Vec<Def>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NodeError {
    #[error("variable `{0}` is declared more than once")]
    Duplicate(String),
    #[error("`{0}` is neither an output nor a local but has a definition")]
    StrayDef(String),
    #[error("`{0}` has no definition")]
    Undefined(String),
    #[error("state `{0}` must have exactly one next-value definition")]
    NextCount(String),
    #[error("definition of `{0}` uses `{1}` before it is defined")]
    Order(String, String),
    #[error("`{0}` is not declared")]
    Undeclared(String),
}

impl Node {
    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .chain(&self.states)
            .chain(&self.locals)
            .chain(&self.params)
    }

    pub fn var_type(&self, name: &str) -> Option<Type> {
        self.vars().find(|v| v.name == name).map(|v| v.ty)
    }

    pub fn type_map(&self) -> BTreeMap<String, Type> {
        self.vars().map(|v| (v.name.clone(), v.ty)).collect()
    }

    pub fn input_names(&self) -> BTreeSet<String> {
        self.inputs.iter().map(|v| v.name.clone()).collect()
    }

    pub fn output_names(&self) -> BTreeSet<String> {
        self.outputs.iter().map(|v| v.name.clone()).collect()
    }

    pub fn state_names(&self) -> BTreeSet<String> {
        self.states.iter().map(|v| v.name.clone()).collect()
    }

    pub fn is_output(&self, name: &str) -> bool {
        self.outputs.iter().any(|v| v.name == name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|v| v.name == name)
    }

    pub fn def_of(&self, name: &str) -> Option<&Expr> {
        self.defs.iter().find(|d| d.var == name).map(|d| &d.expr)
    }

    pub fn next_of(&self, state: &str) -> Option<&Expr> {
        self.next.iter().find(|d| d.var == state).map(|d| &d.expr)
    }

    /// The unique initial state when `init` is a conjunction of
    /// `state = constant` equalities covering every state.
    pub fn init_point(&self) -> Option<Valuation> {
        let mut point = Valuation::new();
        for c in self.init.conjuncts() {
            match c {
                c if c.free_vars().is_empty() => {
                    if c.eval(&|_| None).ok() != Some(Value::Bool(true)) {
                        return None;
                    }
                }
                Expr::Binary(BinOp::Eq, a, b) => match (&**a, &**b) {
                    (Expr::Var(v), Expr::Const(k)) | (Expr::Const(k), Expr::Var(v)) => {
                        let ty = self.states.iter().find(|s| &s.name == v)?.ty;
                        if point.insert(v.clone(), k.coerce(ty)).is_some() {
                            return None;
                        }
                    }
                    _ => return None,
                },
                _ => return None,
            }
        }
        if point.len() == self.states.len() {
            Some(point)
        } else {
            None
        }
    }

    /// Checks the structural invariants: disjoint declarations, each defined
    /// wire assigned once in dependency order, each state with one next value.
    pub fn validate(&self) -> Result<(), NodeError> {
        let mut seen = BTreeSet::new();
        for v in self.vars() {
            if !seen.insert(v.name.as_str()) {
                return Err(NodeError::Duplicate(v.name.clone()));
            }
        }
        let wires: BTreeSet<&str> = self
            .outputs
            .iter()
            .chain(&self.locals)
            .map(|v| v.name.as_str())
            .collect();
        let mut available: BTreeSet<&str> = self
            .inputs
            .iter()
            .chain(&self.states)
            .chain(&self.params)
            .map(|v| v.name.as_str())
            .collect();
        for d in &self.defs {
            if !wires.contains(d.var.as_str()) {
                return Err(NodeError::StrayDef(d.var.clone()));
            }
            for u in d.expr.free_vars() {
                if !available.contains(u.as_str()) {
                    return Err(if seen.contains(u.as_str()) {
                        NodeError::Order(d.var.clone(), u)
                    } else {
                        NodeError::Undeclared(u)
                    });
                }
            }
            if !available.insert(d.var.as_str()) {
                return Err(NodeError::Duplicate(d.var.clone()));
            }
        }
        for w in wires {
            if !available.contains(w) {
                return Err(NodeError::Undefined(w.to_string()));
            }
        }
        for s in &self.states {
            if self.next.iter().filter(|d| d.var == s.name).count() != 1 {
                return Err(NodeError::NextCount(s.name.clone()));
            }
        }
        for d in &self.next {
            if !self.states.iter().any(|s| s.name == d.var) {
                return Err(NodeError::StrayDef(d.var.clone()));
            }
            for u in d.expr.free_vars() {
                if !available.contains(u.as_str()) {
                    return Err(NodeError::Undeclared(u));
                }
            }
        }
        for u in self.init.free_vars() {
            if !self.states.iter().chain(&self.params).any(|s| s.name == u) {
                return Err(NodeError::Undeclared(u));
            }
        }
        Ok(())
    }

    /// Replaces parameters by values, dropping them from `params`.
    pub fn bind_params(&self, values: &Valuation) -> Node {
        let f = |v: &str| values.get(v).map(|k| Expr::Const(k.clone()));
        let mut n = self.clone();
        n.params.retain(|p| !values.contains_key(&p.name));
        n.init = n.init.substitute(&f);
        for d in n.defs.iter_mut().chain(n.next.iter_mut()) {
            d.expr = d.expr.substitute(&f);
        }
        n
    }

    /// Renames every variable through `f`. Applied uniformly to declarations and expressions.
    pub fn rename_all(&self, f: &dyn Fn(&str) -> String) -> Node {
        let map: BTreeMap<String, String> =
            self.vars().map(|v| (v.name.clone(), f(&v.name))).collect();
        let rv = |v: &Var| Var::new(map[&v.name].clone(), v.ty);
        Node {
            name: self.name.clone(),
            inputs: self.inputs.iter().map(rv).collect(),
            outputs: self.outputs.iter().map(rv).collect(),
            states: self.states.iter().map(rv).collect(),
            locals: self.locals.iter().map(rv).collect(),
            params: self.params.iter().map(rv).collect(),
            init: self.init.rename(&map),
            defs: self
                .defs
                .iter()
                .map(|d| Def::new(map[&d.var].clone(), d.expr.rename(&map)))
                .collect(),
            next: self
                .next
                .iter()
                .map(|d| Def::new(map[&d.var].clone(), d.expr.rename(&map)))
                .collect(),
        }
    }

    /// Human-readable listing.
    pub fn listing(&self) -> String {
        let vs = |vs: &[Var]| {
            vs.iter()
                .map(|v| format!("{}: {}", crate::ir::display_var(&v.name), v.ty))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = format!(
            "node {}\n  I = {{{}}}\n  O = {{{}}}\n  S = {{{}}}\n",
            self.name,
            vs(&self.inputs),
            vs(&self.outputs),
            vs(&self.states)
        );
        if !self.params.is_empty() {
            s += &format!("  params = {{{}}}\n", vs(&self.params));
        }
        s += &format!("  Init = {}\n", self.init);
        for d in &self.defs {
            s += &format!("  {} = {}\n", crate::ir::display_var(&d.var), d.expr);
        }
        for d in &self.next {
            s += &format!("  next({}) = {}\n", crate::ir::display_var(&d.var), d.expr);
        }
        s
    }
}
