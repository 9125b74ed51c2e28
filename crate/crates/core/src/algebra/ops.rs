//! Operations on elaborated nodes.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{Expr, Var};
use crate::semantics::elaborate::topo_sort;
use crate::semantics::{Def, ElabError, Node};

use super::AlgebraError;

/// Fresh variant of `name` not in `taken`: `name~1`, `name~2`, ...
fn fresh(name: &str, taken: &BTreeSet<String>) -> String {
    (1..)
        .map(|i| format!("{}~{}", name, i))
        .find(|n| !taken.contains(n))
        .unwrap()
}

fn all_names(n: &Node) -> BTreeSet<String> {
    n.vars().map(|v| v.name.clone()).collect()
}

/// Renames the internal variables (states and locals) of `n` that clash
/// with `other`.
fn rename_internals_apart(n: &Node, other: &BTreeSet<String>) -> Node {
    let mut taken: BTreeSet<String> = other.union(&all_names(n)).cloned().collect();
    let mut map = BTreeMap::new();
    for v in n.states.iter().chain(&n.locals) {
        if other.contains(&v.name) {
            let f = fresh(&v.name, &taken);
            taken.insert(f.clone());
            map.insert(v.name.clone(), f);
        }
    }
    if map.is_empty() {
        return n.clone();
    }
    n.rename_all(&|v| map.get(v).cloned().unwrap_or_else(|| v.to_string()))
}

/// Parallel composition: outputs must be disjoint, shared wires must agree
/// on type, and the joint reaction must be acyclic. Clashing states and
/// locals are renamed apart.
pub fn compose(a: &Node, b: &Node) -> Result<Node, AlgebraError> {
    for o in &a.outputs {
        if b.is_output(&o.name) {
            return Err(AlgebraError::OutputClash(o.name.clone()));
        }
    }
    let a = rename_internals_apart(a, &all_names(b));
    let b = rename_internals_apart(b, &all_names(&a));
    let mut types = BTreeMap::new();
    for v in a.vars().chain(b.vars()) {
        if let Some(t) = types.insert(v.name.clone(), v.ty) {
            if t != v.ty {
                return Err(AlgebraError::WireType {
                    var: v.name.clone(),
                    a: t,
                    b: v.ty,
                });
            }
        }
    }
    let outputs: Vec<Var> = a.outputs.iter().chain(&b.outputs).cloned().collect();
    let out_names: BTreeSet<&str> = outputs.iter().map(|v| v.name.as_str()).collect();
    let mut inputs: Vec<Var> = Vec::new();
    for v in a.inputs.iter().chain(&b.inputs) {
        if !out_names.contains(v.name.as_str()) && !inputs.iter().any(|x| x.name == v.name) {
            inputs.push(v.clone());
        }
    }
    let mut params: Vec<Var> = a.params.clone();
    for p in &b.params {
        if !params.iter().any(|x| x.name == p.name) {
            params.push(p.clone());
        }
    }
    let name = format!("{} || {}", a.name, b.name);
    let defs: Vec<Def> = a.defs.iter().chain(&b.defs).cloned().collect();
    let defs = topo_sort(&name, defs).map_err(|e| match e {
        ElabError::Causality { path, .. } => AlgebraError::Causality(path),
        e => AlgebraError::Other(e.to_string()),
    })?;
    let init = Expr::and_all(
        a.init
            .conjuncts()
            .into_iter()
            .chain(b.init.conjuncts())
            .filter(|c| **c != Expr::bool(true))
            .cloned(),
    );
    let n = Node {
        name,
        inputs,
        outputs,
        states: a.states.iter().chain(&b.states).cloned().collect(),
        locals: a.locals.iter().chain(&b.locals).cloned().collect(),
        params,
        init,
        defs,
        next: a.next.iter().chain(&b.next).cloned().collect(),
    };
    n.validate()
        .map_err(|e| AlgebraError::Other(e.to_string()))?;
    Ok(n)
}

/// `n[x := y]`: `x` must be declared and `y` fresh.
pub fn rename(n: &Node, x: &str, y: &str) -> Result<Node, AlgebraError> {
    if n.var_type(x).is_none() {
        return Err(AlgebraError::UnknownVar(x.to_string()));
    }
    if x == y {
        return Ok(n.clone());
    }
    if n.var_type(y).is_some() {
        return Err(AlgebraError::NameCollision(y.to_string()));
    }
    let mut r = n.rename_all(&|v| if v == x { y.to_string() } else { v.to_string() });
    r.name = format!("{}[{} := {}]", n.name, x, y);
    Ok(r)
}

/// `n[Init := e]` where `e` ranges over states and parameters.
pub fn with_init(n: &Node, e: &Expr) -> Result<Node, AlgebraError> {
    for v in e.free_vars() {
        if !n.states.iter().chain(&n.params).any(|s| s.name == v) {
            return Err(AlgebraError::NotState(v));
        }
    }
    let mut r = n.clone();
    r.init = e.clone();
    Ok(r)
}

pub fn primed(x: &str) -> String {
    format!("{}'", x)
}

pub fn double_primed(x: &str) -> String {
    format!("{}''", x)
}

/// The two halves of the combinational translation `C(n, e)`:
/// `part1` reads states as inputs and emits `x' = next(x)`;
/// `part2` holds `x''` registers with `x = x''` and Init `e''`.
pub fn combinational(n: &Node, e: &Expr) -> Result<(Node, Node), AlgebraError> {
    for s in &n.states {
        if n.next_of(&s.name).is_none() {
            return Err(AlgebraError::MissingNext(s.name.clone()));
        }
        for name in [primed(&s.name), double_primed(&s.name)] {
            if n.var_type(&name).is_some() {
                return Err(AlgebraError::NameCollision(name));
            }
        }
    }
    for v in e.free_vars() {
        if !n.states.iter().chain(&n.params).any(|s| s.name == v) {
            return Err(AlgebraError::NotState(v));
        }
    }
    let pr = |v: &Var| Var::new(primed(&v.name), v.ty);
    let dpr = |v: &Var| Var::new(double_primed(&v.name), v.ty);
    let mut p1_defs = n.defs.clone();
    p1_defs.extend(
        n.states
            .iter()
            .map(|s| Def::new(primed(&s.name), n.next_of(&s.name).unwrap().clone())),
    );
    let part1 = Node {
        name: format!("{}_c1", n.name),
        inputs: n.inputs.iter().chain(&n.states).cloned().collect(),
        outputs: n
            .outputs
            .iter()
            .cloned()
            .chain(n.states.iter().map(pr))
            .collect(),
        states: vec![],
        locals: n.locals.clone(),
        params: n.params.clone(),
        init: Expr::bool(true),
        defs: p1_defs,
        next: vec![],
    };
    let dmap: BTreeMap<String, String> = n
        .states
        .iter()
        .map(|s| (s.name.clone(), double_primed(&s.name)))
        .collect();
    let part2 = Node {
        name: format!("{}_c2", n.name),
        inputs: n.states.iter().map(pr).collect(),
        outputs: n.states.clone(),
        states: n.states.iter().map(dpr).collect(),
        locals: vec![],
        params: n
            .params
            .iter()
            .filter(|p| e.free_vars().contains(&p.name))
            .cloned()
            .collect(),
        init: e.rename(&dmap),
        defs: n
            .states
            .iter()
            .map(|s| Def::new(s.name.clone(), Expr::var(double_primed(&s.name))))
            .collect(),
        next: n
            .states
            .iter()
            .map(|s| Def::new(double_primed(&s.name), Expr::var(primed(&s.name))))
            .collect(),
    };
    Ok((part1, part2))
}

/// `C(n, e)` as a single node.
pub fn combinational_node(n: &Node, e: &Expr) -> Result<Node, AlgebraError> {
    let (p1, p2) = combinational(n, e)?;
    let mut c = compose(&p1, &p2)?;
    c.name = format!("C({}, {})", n.name, e);
    Ok(c)
}
