//! Elaboration of typed, normalized declarations into [`Node`]s.
//!
//! `pre x` becomes the state `pre(x)` with next value `x`. `c -> pre x` with a
//! literal `c` folds into Init when every use of `pre x` agrees on the initial
//! value; any other arrow reads the boolean state `#first`. Node applications
//! are inlined, instance `k` of `F` prefixing its variables with `F#k.`.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::frontend::ast::{self, ExprKind, NodeDecl, TypeExpr};
use crate::frontend::typecheck::{TypedProgram, DELAY};
use crate::ir::{Expr, Type, Value, Var};

use super::node::{Def, Node};

pub const FIRST: &str = "#first";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("causality cycle in node `{node}`: {}", path.join(" -> "))]
    Causality { node: String, path: Vec<String> },
    #[error("node `{node}`: no equation defines `{var}`")]
    MissingEquation { node: String, var: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is applied recursively")]
    Recursive(String),
    #[error("node `{0}` is polymorphic and needs a type instantiation")]
    Polymorphic(String),
    #[error("node `{node}`: {msg}")]
    Invalid { node: String, msg: String },
}

/// Name of the state holding the previous value of `x`.
pub fn pre_name(x: &str) -> String {
    format!("pre({})", x)
}

/// Prefixes a variable name for an inlined instance, keeping `pre(..)` outermost.
pub fn instance_name(prefix: &str, name: &str) -> String {
    match name.strip_prefix("pre(").and_then(|r| r.strip_suffix(')')) {
        Some(inner) => pre_name(&instance_name(prefix, inner)),
        None => format!("{}.{}", prefix, name),
    }
}

/// Elaborates nodes of a program on demand, caching per instantiation.
pub struct Elaborator<'p> {
    prog: &'p TypedProgram,
    cache: HashMap<(String, Option<Type>), Node>,
    stack: Vec<String>,
}

impl<'p> Elaborator<'p> {
    pub fn new(prog: &'p TypedProgram) -> Self {
        Elaborator {
            prog,
            cache: HashMap::new(),
            stack: Vec::new(),
        }
    }

    pub fn node(&mut self, name: &str, inst: Option<Type>) -> Result<Node, ElabError> {
        let key = (name.to_string(), inst);
        if let Some(n) = self.cache.get(&key) {
            return Ok(n.clone());
        }
        if name == DELAY && self.prog.node(DELAY).is_none() {
            return Err(ElabError::Invalid {
                node: DELAY.into(),
                msg: "Delay needs its static argument; use templates::delay_node".into(),
            });
        }
        let decl = self
            .prog
            .node(name)
            .ok_or_else(|| ElabError::UnknownNode(name.to_string()))?;
        if self.stack.iter().any(|s| s == name) {
            return Err(ElabError::Recursive(name.to_string()));
        }
        self.stack.push(name.to_string());
        let res = elaborate(
            decl,
            inst,
            &mut |callee: &str, statics: &[i64], ty: Option<Type>| {
                if callee == DELAY && self.prog.node(DELAY).is_none() {
                    let t = ty.unwrap_or(Type::Int);
                    return Ok((
                        crate::templates::delay_node(statics[0] as usize, t),
                        vec![false, false],
                    ));
                }
                let consts = self
                    .prog
                    .node(callee)
                    .map(|d| d.inputs.iter().map(|p| p.is_const).collect());
                Ok((self.node(callee, ty)?, consts.unwrap_or_default()))
            },
        );
        self.stack.pop();
        let n = res?;
        self.cache.insert(key, n.clone());
        Ok(n)
    }
}

/// Elaborates a program's node by name.
pub fn elaborate_node(prog: &TypedProgram, name: &str) -> Result<Node, ElabError> {
    Elaborator::new(prog).node(name, None)
}

struct Ctx<'a> {
    decl: &'a NodeDecl,
    types: BTreeMap<String, Type>,
    folds: BTreeMap<String, Value>,
    states: BTreeMap<String, (Type, Option<Value>)>,
    need_first: bool,
    extra_locals: Vec<Var>,
    extra_states: Vec<Var>,
    extra_params: Vec<Var>,
    extra_init: Vec<Expr>,
    extra_defs: Vec<Def>,
    extra_next: Vec<Def>,
    instances: BTreeMap<String, usize>,
}

/// Callee lookup: the elaborated node and, per declared input, whether it is const.
type Env<'e> = dyn FnMut(&str, &[i64], Option<Type>) -> Result<(Node, Vec<bool>), ElabError> + 'e;

/// Elaborates one declaration. `env` supplies elaborated callees by name,
/// static arguments and `'a` instantiation.
pub fn elaborate(
    decl: &NodeDecl,
    inst: Option<Type>,
    env: &mut Env<'_>,
) -> Result<Node, ElabError> {
    if decl.is_polymorphic() && inst.is_none() {
        return Err(ElabError::Polymorphic(decl.name.clone()));
    }
    let resolve = |t: &TypeExpr| t.resolve(inst).expect("instantiation given");
    let mut types = BTreeMap::new();
    for p in decl.inputs.iter().chain(&decl.outputs).chain(&decl.locals) {
        types.insert(p.name.clone(), resolve(&p.ty));
    }
    let mut ctx = Ctx {
        decl,
        types,
        folds: BTreeMap::new(),
        states: BTreeMap::new(),
        need_first: false,
        extra_locals: vec![],
        extra_states: vec![],
        extra_params: vec![],
        extra_init: vec![],
        extra_defs: vec![],
        extra_next: vec![],
        instances: BTreeMap::new(),
    };
    ctx.folds = fold_candidates(decl, &ctx.types);

    let mut own_defs = Vec::new();
    for eq in &decl.equations {
        let e = ctx.translate(&eq.rhs, env)?;
        own_defs.push(Def::new(eq.lhs.clone(), e));
    }
    for p in decl.outputs.iter().chain(&decl.locals) {
        if !decl.equations.iter().any(|e| e.lhs == p.name) {
            return Err(ElabError::MissingEquation {
                node: decl.name.clone(),
                var: p.name.clone(),
            });
        }
    }

    let v = |p: &ast::Param| Var::new(p.name.clone(), resolve(&p.ty));
    let inputs: Vec<Var> = decl.inputs.iter().filter(|p| !p.is_const).map(v).collect();
    let mut params: Vec<Var> = decl.inputs.iter().filter(|p| p.is_const).map(v).collect();
    let outputs: Vec<Var> = decl.outputs.iter().map(v).collect();
    let mut locals: Vec<Var> = decl.locals.iter().map(v).collect();
    locals.extend(ctx.extra_locals.iter().cloned());
    params.extend(ctx.extra_params.iter().cloned());

    let mut states = Vec::new();
    let mut init = Vec::new();
    let mut next = Vec::new();
    if ctx.need_first {
        states.push(Var::new(FIRST, Type::Bool));
        init.push(Expr::eq(Expr::var(FIRST), Expr::bool(true)));
        next.push(Def::new(FIRST, Expr::bool(false)));
    }
    for (x, (ty, _)) in &ctx.states {
        let s = pre_name(x);
        let v0 = ctx
            .folds
            .get(x)
            .cloned()
            .unwrap_or_else(|| ty.default_value());
        states.push(Var::new(s.clone(), *ty));
        init.push(Expr::eq(Expr::var(s.clone()), Expr::Const(v0)));
        next.push(Def::new(s, Expr::var(x.clone())));
    }
    states.extend(ctx.extra_states.iter().cloned());
    init.extend(ctx.extra_init.iter().cloned());
    next.extend(ctx.extra_next.iter().cloned());

    let mut all_defs = ctx.extra_defs.clone();
    all_defs.extend(own_defs);
    let defs = topo_sort(&decl.name, all_defs)?;

    let node = Node {
        name: decl.name.clone(),
        inputs,
        outputs,
        states,
        locals,
        params,
        init: Expr::and_all(init),
        defs,
        next,
    };
    node.validate().map_err(|e| ElabError::Invalid {
        node: decl.name.clone(),
        msg: e.to_string(),
    })?;
    Ok(node)
}

/// Literal initial values of `pre x`, kept only when all uses agree.
fn fold_candidates(decl: &NodeDecl, types: &BTreeMap<String, Type>) -> BTreeMap<String, Value> {
    let mut cands: BTreeMap<String, Vec<Option<Value>>> = BTreeMap::new();
    fn walk(
        e: &ast::Expr,
        types: &BTreeMap<String, Type>,
        cands: &mut BTreeMap<String, Vec<Option<Value>>>,
    ) {
        match &e.kind {
            ExprKind::Arrow(a, b) => {
                if let ExprKind::Pre(inner) = &b.kind {
                    if let ExprKind::Var(x) = &inner.kind {
                        let lit = literal_value(a).map(|v| v.coerce(types[x]));
                        cands.entry(x.clone()).or_default().push(lit);
                        walk(a, types, cands);
                        return;
                    }
                }
                walk(a, types, cands);
                walk(b, types, cands);
            }
            ExprKind::Pre(inner) => {
                if let ExprKind::Var(x) = &inner.kind {
                    cands
                        .entry(x.clone())
                        .or_default()
                        .push(Some(types[x].default_value()));
                } else {
                    walk(inner, types, cands);
                }
            }
            ExprKind::Lit(_) | ExprKind::Var(_) => {}
            ExprKind::Unary(_, a) => walk(a, types, cands),
            ExprKind::Binary(_, a, b) => {
                walk(a, types, cands);
                walk(b, types, cands);
            }
            ExprKind::Ite(c, t, f) => {
                walk(c, types, cands);
                walk(t, types, cands);
                walk(f, types, cands);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| walk(a, types, cands)),
        }
    }
    for eq in &decl.equations {
        walk(&eq.rhs, types, &mut cands);
    }
    cands
        .into_iter()
        .filter_map(|(x, vs)| {
            let first = vs[0].clone()?;
            vs.iter()
                .all(|v| v.as_ref() == Some(&first))
                .then_some((x, first))
        })
        .collect()
}

/// Value of a variable-free expression built from literals.
fn literal_value(e: &ast::Expr) -> Option<Value> {
    let ir = literal_ir(e)?;
    ir.eval(&|_| None).ok()
}

fn literal_ir(e: &ast::Expr) -> Option<Expr> {
    Some(match &e.kind {
        ExprKind::Lit(v) => Expr::Const(v.clone()),
        ExprKind::Unary(op, a) => Expr::Unary(*op, Box::new(literal_ir(a)?)),
        ExprKind::Binary(op, a, b) => Expr::bin(*op, literal_ir(a)?, literal_ir(b)?),
        ExprKind::Ite(c, t, f) => Expr::ite(literal_ir(c)?, literal_ir(t)?, literal_ir(f)?),
        _ => return None,
    })
}

impl<'a> Ctx<'a> {
    fn translate(&mut self, e: &ast::Expr, env: &mut Env<'_>) -> Result<Expr, ElabError> {
        Ok(match &e.kind {
            ExprKind::Lit(v) => Expr::Const(v.clone()),
            ExprKind::Var(x) => Expr::var(x.clone()),
            ExprKind::Unary(op, a) => Expr::Unary(*op, Box::new(self.translate(a, env)?)),
            ExprKind::Binary(op, a, b) => {
                Expr::bin(*op, self.translate(a, env)?, self.translate(b, env)?)
            }
            ExprKind::Ite(c, t, f) => Expr::ite(
                self.translate(c, env)?,
                self.translate(t, env)?,
                self.translate(f, env)?,
            ),
            ExprKind::Pre(inner) => match &inner.kind {
                ExprKind::Var(x) => {
                    let ty = self.types[x];
                    self.states.entry(x.clone()).or_insert((ty, None));
                    Expr::var(pre_name(x))
                }
                _ => {
                    return Err(ElabError::Invalid {
                        node: self.decl.name.clone(),
                        msg: "`pre` of a compound expression; normalize first".into(),
                    })
                }
            },
            ExprKind::Arrow(a, b) => {
                if let ExprKind::Pre(inner) = &b.kind {
                    if let ExprKind::Var(x) = &inner.kind {
                        if self.folds.contains_key(x) && literal_value(a).is_some() {
                            return self.translate(b, env);
                        }
                    }
                }
                self.need_first = true;
                let ta = self.translate(a, env)?;
                let tb = self.translate(b, env)?;
                Expr::ite(Expr::var(FIRST), ta, tb)
            }
            ExprKind::Call {
                name,
                statics,
                args,
                inst,
            } => {
                let (callee, decl_inputs) = env(name, statics, *inst)?;
                let k = self.instances.entry(name.clone()).or_insert(0);
                *k += 1;
                let prefix = format!("{}#{}", name, k);
                let callee = callee.rename_all(&|v| instance_name(&prefix, v));
                let mut const_args = BTreeMap::new();
                let mut arg_exprs = Vec::new();
                for a in args {
                    arg_exprs.push(self.translate(a, env)?);
                }
                // Positional: const params and stream inputs interleave as declared.
                let (mut pi, mut ii) = (0, 0);
                for (is_const, arg) in decl_inputs.iter().zip(arg_exprs) {
                    if *is_const {
                        const_args.insert(callee.params[pi].name.clone(), arg);
                        pi += 1;
                    } else {
                        let v = &callee.inputs[ii];
                        self.extra_locals.push(v.clone());
                        self.extra_defs.push(Def::new(v.name.clone(), arg));
                        ii += 1;
                    }
                }
                let sub = |v: &str| const_args.get(v).cloned();
                let subst = |e: &Expr| e.substitute(&sub);
                self.extra_params.extend(
                    callee
                        .params
                        .iter()
                        .filter(|p| !const_args.contains_key(&p.name))
                        .cloned(),
                );
                self.extra_locals.extend(callee.outputs.iter().cloned());
                self.extra_locals.extend(callee.locals.iter().cloned());
                self.extra_states.extend(callee.states.iter().cloned());
                self.extra_init.push(subst(&callee.init));
                self.extra_defs.extend(
                    callee
                        .defs
                        .iter()
                        .map(|d| Def::new(d.var.clone(), subst(&d.expr))),
                );
                self.extra_next.extend(
                    callee
                        .next
                        .iter()
                        .map(|d| Def::new(d.var.clone(), subst(&d.expr))),
                );
                Expr::var(callee.outputs[0].name.clone())
            }
        })
    }
}

/// Dependency-ordered definitions; a cycle is reported with its path.
pub fn topo_sort(node: &str, defs: Vec<Def>) -> Result<Vec<Def>, ElabError> {
    let index: BTreeMap<String, usize> = defs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.var.clone(), i))
        .collect();
    let deps: Vec<Vec<usize>> = defs
        .iter()
        .map(|d| {
            d.expr
                .free_vars()
                .iter()
                .filter_map(|v| index.get(v).copied())
                .collect()
        })
        .collect();
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; defs.len()];
    let mut order = Vec::with_capacity(defs.len());
    let mut path: Vec<usize> = Vec::new();
    fn visit(
        i: usize,
        deps: &[Vec<usize>],
        mark: &mut [Mark],
        order: &mut Vec<usize>,
        path: &mut Vec<usize>,
    ) -> Result<(), Vec<usize>> {
        match mark[i] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = path.iter().position(|&p| p == i).unwrap();
                let mut cyc = path[start..].to_vec();
                cyc.push(i);
                return Err(cyc);
            }
            Mark::New => {}
        }
        mark[i] = Mark::Active;
        path.push(i);
        for &d in &deps[i] {
            visit(d, deps, mark, order, path)?;
        }
        path.pop();
        mark[i] = Mark::Done;
        order.push(i);
        Ok(())
    }
    for i in 0..defs.len() {
        if let Err(cyc) = visit(i, &deps, &mut mark, &mut order, &mut path) {
            return Err(ElabError::Causality {
                node: node.to_string(),
                path: cyc.into_iter().map(|j| defs[j].var.clone()).collect(),
            });
        }
    }
    let mut slots: Vec<Option<Def>> = defs.into_iter().map(Some).collect();
    Ok(order
        .into_iter()
        .map(|i| slots[i].take().unwrap())
        .collect())
}
