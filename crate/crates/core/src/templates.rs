//! Test-input templates: parameterized generator nodes with parameter
//! domains, usable with concrete arguments or as symbolic synthesis targets.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::frontend::typecheck::DELAY;
use crate::frontend::{load_source, typecheck, TypedProgram};
use crate::ir::{BinOp, Expr, Type, Valuation, Value, Var};
use crate::semantics::elaborate::Elaborator;
use crate::semantics::{Def, Node};

pub const STDLIB_SOURCE: &str = include_str!("stdlib.lus");

pub const TEMPLATE_NAMES: &[&str] = &["Constant", "Step", "Square", "RateTransition", "Delay"];

pub fn is_template(name: &str) -> bool {
    TEMPLATE_NAMES.contains(&name)
}

fn stdlib() -> &'static TypedProgram {
    static LIB: OnceLock<TypedProgram> = OnceLock::new();
    LIB.get_or_init(|| {
        let src = load_source("include \"stdlib.lus\";", None).expect("stdlib parses");
        typecheck(src).expect("stdlib type checks")
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    Unknown(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("`{name}`: parameter {param} = {value} violates the domain {domain}")]
    Domain {
        name: String,
        param: String,
        value: String,
        domain: String,
    },
    #[error("`{name}`: parameter `{param}` must be a constant or `_`")]
    NotConst { name: String, param: String },
    #[error("`{name}`: type mismatch: {msg}")]
    Type { name: String, msg: String },
}

/// One template argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateArg {
    Value(Value),
    /// `_`: a symbolic constant solved for by synthesis.
    Symbolic,
    /// Another stream, by name.
    Wire(String),
    Nested(Box<TemplateInst>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateInst {
    pub name: String,
    pub statics: Vec<i64>,
    pub args: Vec<TemplateArg>,
}

impl fmt::Display for TemplateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateArg::Value(v) => write!(f, "{}", v),
            TemplateArg::Symbolic => write!(f, "_"),
            TemplateArg::Wire(w) => f.write_str(&crate::ir::display_var(w)),
            TemplateArg::Nested(t) => write!(f, "{}", t),
        }
    }
}

impl fmt::Display for TemplateInst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.statics.is_empty() {
            let s: Vec<String> = self.statics.iter().map(|x| x.to_string()).collect();
            write!(f, "<<{}>>", s.join(", "))?;
        }
        let a: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", a.join(", "))
    }
}

/// Declared parameter: name, whether it is const, and its type (`None` for `'a`).
pub fn signature(name: &str) -> Option<Vec<(String, bool, Option<Type>)>> {
    if name == DELAY {
        return Some(vec![
            ("init".into(), false, None),
            ("x".into(), false, None),
        ]);
    }
    if !is_template(name) {
        return None;
    }
    let d = stdlib().node(name)?;
    Some(
        d.inputs
            .iter()
            .map(|p| (p.name.clone(), p.is_const, p.ty.base()))
            .collect(),
    )
}

/// Domain constraint over the template's const parameters, with parameter
/// names mapped through `sym`.
pub fn domain(name: &str, sym: &dyn Fn(&str) -> Expr) -> Expr {
    let int = |v: i64| Expr::Const(Value::int(v));
    match name {
        "Step" => Expr::bin(BinOp::Gt, sym("s"), int(0)),
        "Square" => Expr::and_all([
            Expr::bin(BinOp::Ge, sym("t"), int(2)),
            Expr::bin(BinOp::Le, int(0), sym("p")),
            Expr::bin(BinOp::Lt, sym("p"), Expr::bin(BinOp::Mul, int(4), sym("t"))),
        ]),
        "RateTransition" => Expr::bin(BinOp::Ge, sym("s"), int(1)),
        _ => Expr::bool(true),
    }
}

/// Fresh symbols for every parameter (const and value) of a template, with
/// the domain constraint over them. `ty` resolves `'a`.
pub fn symbolic_params(
    name: &str,
    ty: Type,
    prefix: &str,
) -> Result<(Vec<Var>, Expr), TemplateError> {
    let sig = signature(name).ok_or_else(|| TemplateError::Unknown(name.into()))?;
    let vars: Vec<Var> = sig
        .iter()
        .map(|(p, _, t)| Var::new(format!("{}.{}", prefix, p), t.unwrap_or(ty)))
        .collect();
    let dom = domain(name, &|p| Expr::var(format!("{}.{}", prefix, p)));
    Ok((vars, dom))
}

/// Delay<<d>>(init, x): `init` for the first d rounds, then x delayed by d.
pub fn delay_node(d: usize, ty: Type) -> Node {
    let d = d.max(1);
    let reg = |i: usize| format!("r{}", i);
    let mut states = vec![Var::new("c", Type::Int)];
    let mut init = vec![Expr::eq(Expr::var("c"), Expr::int(0))];
    let mut next = vec![Def::new(
        "c",
        Expr::ite(
            Expr::bin(BinOp::Lt, Expr::var("c"), Expr::int(d as i64)),
            Expr::bin(BinOp::Add, Expr::var("c"), Expr::int(1)),
            Expr::var("c"),
        ),
    )];
    for i in 1..=d {
        states.push(Var::new(reg(i), ty));
        init.push(Expr::eq(Expr::var(reg(i)), Expr::Const(ty.default_value())));
        next.push(Def::new(
            reg(i),
            Expr::var(if i == 1 { "x".to_string() } else { reg(i - 1) }),
        ));
    }
    Node {
        name: DELAY.into(),
        inputs: vec![Var::new("init", ty), Var::new("x", ty)],
        outputs: vec![Var::new("Out", ty)],
        states,
        locals: vec![],
        params: vec![],
        init: Expr::and_all(init),
        defs: vec![Def::new(
            "Out",
            Expr::ite(
                Expr::bin(BinOp::Lt, Expr::var("c"), Expr::int(d as i64)),
                Expr::var("init"),
                Expr::var(reg(d)),
            ),
        )],
        next,
    }
}

/// Resolves `'a` for an instance: nested generators and wires first, then
/// real literals, then `hint`, else int.
pub fn resolve_type(
    inst: &TemplateInst,
    wire_ty: &dyn Fn(&str) -> Option<Type>,
    hint: Option<Type>,
) -> Option<Type> {
    let sig = signature(&inst.name)?;
    let mut lit_real = false;
    for (arg, (_, _, t)) in inst.args.iter().zip(&sig) {
        if t.is_some() {
            continue;
        }
        match arg {
            TemplateArg::Nested(n) => {
                if let Some(t) =
                    resolve_type(n, wire_ty, None).filter(|_| !nested_is_literal_only(n))
                {
                    return Some(t);
                }
            }
            TemplateArg::Wire(w) => {
                if let Some(t) = wire_ty(w) {
                    return Some(t);
                }
            }
            TemplateArg::Value(Value::Real(_)) => lit_real = true,
            TemplateArg::Value(Value::Bool(_)) => return Some(Type::Bool),
            _ => {}
        }
    }
    if lit_real {
        return Some(Type::Real);
    }
    for arg in &inst.args {
        if let TemplateArg::Nested(n) = arg {
            if let Some(Type::Real) = resolve_type(n, wire_ty, None) {
                return Some(Type::Real);
            }
        }
    }
    Some(hint.unwrap_or(Type::Int))
}

fn nested_is_literal_only(n: &TemplateInst) -> bool {
    n.args.iter().all(|a| match a {
        TemplateArg::Value(Value::Int(_)) | TemplateArg::Symbolic => true,
        TemplateArg::Nested(m) => nested_is_literal_only(m),
        _ => false,
    })
}

/// Builds the generator node for an instance. Internal variables are
/// prefixed with `prefix`, symbolic parameters become `prefix.param`, the
/// output is `Out` and wired arguments become inputs of the given names.
/// The domain constraint of symbolic parameters is conjoined to Init.
pub fn instantiate(inst: &TemplateInst, ty: Type, prefix: &str) -> Result<Node, TemplateError> {
    let name = inst.name.as_str();
    let sig = signature(name).ok_or_else(|| TemplateError::Unknown(name.into()))?;
    if inst.args.len() != sig.len() {
        return Err(TemplateError::Arity {
            name: name.into(),
            expected: sig.len(),
            got: inst.args.len(),
        });
    }
    let base = if name == DELAY {
        let d = *inst.statics.first().unwrap_or(&0);
        if inst.statics.len() != 1 || d < 1 {
            return Err(TemplateError::Domain {
                name: name.into(),
                param: "d".into(),
                value: d.to_string(),
                domain: "d >= 1".into(),
            });
        }
        delay_node(d as usize, ty)
    } else {
        Elaborator::new(stdlib())
            .node(name, Some(ty))
            .expect("stdlib templates elaborate")
    };
    let local = |v: &str| crate::semantics::elaborate::instance_name(prefix, v);
    let sym = |p: &str| format!("{}.{}", prefix, p);

    // Const arguments: bind values, keep symbols.
    let mut const_vals = Valuation::new();
    for (arg, (p, is_const, pty)) in inst.args.iter().zip(&sig) {
        if !is_const {
            continue;
        }
        let pty = pty.unwrap_or(ty);
        match arg {
            TemplateArg::Value(v) => {
                if v.ty() != pty && !(v.ty() == Type::Int && pty == Type::Real) {
                    return Err(TemplateError::Type {
                        name: name.into(),
                        msg: format!("{} given for {}: {}", v, p, pty),
                    });
                }
                const_vals.insert(p.clone(), v.coerce(pty));
            }
            TemplateArg::Symbolic => {}
            _ => {
                return Err(TemplateError::NotConst {
                    name: name.into(),
                    param: p.clone(),
                })
            }
        }
    }
    // Concrete domain check.
    let dom = domain(name, &|p| match const_vals.get(p) {
        Some(v) => Expr::Const(v.clone()),
        None => Expr::var(sym(p)),
    });
    for c in dom.conjuncts() {
        if c.free_vars().is_empty() && c.eval(&|_| None).ok() != Some(Value::Bool(true)) {
            return Err(TemplateError::Domain {
                name: name.into(),
                param: c.to_string(),
                value: "false".into(),
                domain: domain(name, &|p| Expr::var(p)).to_string(),
            });
        }
    }

    let mut node = base.bind_params(&const_vals);
    // Rename internals; outputs keep their names, params become `prefix.p`.
    node = node.rename_all(&|v| {
        if base.is_output(v) {
            v.to_string()
        } else if node_param(&base, v) {
            sym(v)
        } else {
            local(v)
        }
    });
    // Value arguments: feed each (renamed) input.
    let mut extra_defs = Vec::new();
    let mut extra_locals = Vec::new();
    let mut new_inputs = Vec::new();
    let mut extra_states = Vec::new();
    let mut extra_init = Vec::new();
    let mut extra_next = Vec::new();
    let mut extra_params = Vec::new();
    for (arg, (p, is_const, pty)) in inst.args.iter().zip(&sig) {
        if *is_const {
            continue;
        }
        let pty = pty.unwrap_or(ty);
        let inp = local(p);
        match arg {
            TemplateArg::Value(v) => {
                if v.ty() != pty && !(v.ty() == Type::Int && pty == Type::Real) {
                    return Err(TemplateError::Type {
                        name: name.into(),
                        msg: format!("{} given for {}: {}", v, p, pty),
                    });
                }
                extra_locals.push(Var::new(inp.clone(), pty));
                extra_defs.push(Def::new(inp, Expr::Const(v.coerce(pty))));
            }
            TemplateArg::Symbolic => {
                let s = sym(p);
                extra_params.push(Var::new(s.clone(), pty));
                extra_locals.push(Var::new(inp.clone(), pty));
                extra_defs.push(Def::new(inp, Expr::var(s)));
            }
            TemplateArg::Wire(w) => {
                if !new_inputs.iter().any(|v: &Var| &v.name == w) {
                    new_inputs.push(Var::new(w.clone(), pty));
                }
                extra_locals.push(Var::new(inp.clone(), pty));
                extra_defs.push(Def::new(inp, Expr::var(w.clone())));
            }
            TemplateArg::Nested(n) => {
                let inner_prefix = format!("{}.{}", prefix, p);
                let inner = instantiate(n, pty, &inner_prefix)?;
                let out = format!("{}.Out", inner_prefix);
                let inner = inner.rename_all(&|v| {
                    if v == "Out" {
                        out.clone()
                    } else {
                        v.to_string()
                    }
                });
                for v in &inner.inputs {
                    if !new_inputs.iter().any(|x: &Var| x.name == v.name) {
                        new_inputs.push(v.clone());
                    }
                }
                extra_locals.extend(inner.outputs.iter().cloned());
                extra_locals.extend(inner.locals.iter().cloned());
                extra_states.extend(inner.states.iter().cloned());
                extra_params.extend(inner.params.iter().cloned());
                extra_init.push(inner.init.clone());
                extra_defs.extend(inner.defs.iter().cloned());
                extra_next.extend(inner.next.iter().cloned());
                extra_locals.push(Var::new(inp.clone(), pty));
                extra_defs.push(Def::new(inp, Expr::var(out)));
            }
        }
    }
    let sym_dom = domain(name, &|p| match const_vals.get(p) {
        Some(v) => Expr::Const(v.clone()),
        None => Expr::var(sym(p)),
    });
    let sym_dom = Expr::and_all(
        sym_dom
            .conjuncts()
            .into_iter()
            .filter(|c| !c.free_vars().is_empty())
            .cloned(),
    );
    let mut init = extra_init;
    init.push(node.init.clone());
    init.push(sym_dom);
    extra_defs.extend(node.defs.iter().cloned());
    extra_next.extend(node.next.iter().cloned());
    extra_locals.extend(node.locals.iter().cloned());
    extra_states.extend(node.states.iter().cloned());
    let mut params: Vec<Var> = node.params.clone();
    params.extend(extra_params);
    let out = Node {
        name: inst.to_string(),
        inputs: new_inputs,
        outputs: node.outputs.clone(),
        states: extra_states,
        locals: extra_locals,
        params,
        init: Expr::and_all(
            init.iter()
                .flat_map(|e| e.conjuncts())
                .filter(|c| **c != Expr::bool(true))
                .cloned(),
        ),
        defs: extra_defs,
        next: extra_next,
    };
    debug_assert!(out.validate().is_ok(), "{:?}", out.validate());
    Ok(out)
}

fn node_param(base: &Node, v: &str) -> bool {
    base.params.iter().any(|p| p.name == v)
}

/// Replaces symbolic parameters by solved values and re-renders the instance.
pub fn bind_instance(inst: &TemplateInst, prefix: &str, values: &Valuation) -> TemplateInst {
    let sig = signature(&inst.name).unwrap_or_default();
    let args = inst
        .args
        .iter()
        .zip(
            sig.iter()
                .map(|s| s.0.clone())
                .chain(std::iter::repeat(String::new())),
        )
        .map(|(a, p)| match a {
            TemplateArg::Symbolic => match values.get(&format!("{}.{}", prefix, p)) {
                Some(v) => TemplateArg::Value(v.clone()),
                None => TemplateArg::Symbolic,
            },
            TemplateArg::Nested(n) => TemplateArg::Nested(Box::new(bind_instance(
                n,
                &format!("{}.{}", prefix, p),
                values,
            ))),
            a => a.clone(),
        })
        .collect();
    TemplateInst {
        name: inst.name.clone(),
        statics: inst.statics.clone(),
        args,
    }
}

/// Reference output of a template at round `c` for concrete int arguments;
/// used by tests as a closed-form oracle.
pub fn reference_value(name: &str, args: &[i64], c: i64) -> Option<i64> {
    Some(match (name, args) {
        ("Constant", [v]) => *v,
        ("Step", [s, v1, v2]) => {
            if c < *s {
                *v1
            } else {
                *v2
            }
        }
        ("Square", [t, p, v1, v2]) => {
            if (c + p).rem_euclid(2 * t) < *t {
                *v1
            } else {
                *v2
            }
        }
        _ => return None,
    })
}
