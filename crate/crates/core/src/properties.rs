//! Safety properties `e | e@s | φ ∧ φ` and their monitor nodes.
//!
//! A property is turned into a monitor that reads the observed variables and
//! emits one boolean `ok` wire. A trace satisfies the property iff `ok` holds
//! at every round of the monitor run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ir::{BinOp, Expr, Type, Valuation, Value, Var};
use crate::semantics::{Def, Node};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SafetyProperty {
    Always(Expr),
    At(Expr, u64),
    And(Box<SafetyProperty>, Box<SafetyProperty>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("property refers to `{0}`, which is not an observable variable")]
    UnknownVar(String),
    #[error("property predicate `{0}` is not boolean: {1}")]
    NotBoolean(String, String),
    #[error("`{0}` is already primed")]
    AlreadyPrimed(String),
    #[error("`{0}` is not a state variable")]
    NotState(String),
}

impl SafetyProperty {
    pub fn at(e: Expr, s: u64) -> Self {
        SafetyProperty::At(e, s)
    }

    pub fn and(a: SafetyProperty, b: SafetyProperty) -> Self {
        SafetyProperty::And(Box::new(a), Box::new(b))
    }

    pub fn and_all(parts: impl IntoIterator<Item = SafetyProperty>) -> Option<Self> {
        parts.into_iter().reduce(SafetyProperty::and)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e, _| e.collect_vars(&mut out));
        out
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr, Option<u64>)) {
        match self {
            SafetyProperty::Always(e) => f(e, None),
            SafetyProperty::At(e, s) => f(e, Some(*s)),
            SafetyProperty::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Largest round index mentioned, if any.
    pub fn max_round(&self) -> Option<u64> {
        let mut m = None;
        self.visit(&mut |_, s| {
            if let Some(s) = s {
                m = Some(m.map_or(s, |x: u64| x.max(s)));
            }
        });
        m
    }

    pub fn is_always(&self) -> bool {
        matches!(self, SafetyProperty::Always(_))
    }

    pub fn has_always(&self) -> bool {
        let mut any = false;
        self.visit(&mut |_, s| any |= s.is_none());
        any
    }

    /// Atomic parts with `And` flattened and `(a ∧ b)@s` split into `a@s ∧ b@s`.
    pub fn atoms(&self) -> Vec<SafetyProperty> {
        let mut out = Vec::new();
        self.visit(&mut |e, s| {
            for c in e.conjuncts() {
                let a = match s {
                    Some(s) => SafetyProperty::At(c.clone(), s),
                    None => SafetyProperty::Always(c.clone()),
                };
                if !out.contains(&a) {
                    out.push(a);
                }
            }
        });
        out
    }

    /// Every `e@s` becomes `e@(r·s)`.
    pub fn rescale(&self, r: u64) -> SafetyProperty {
        match self {
            SafetyProperty::Always(e) => SafetyProperty::Always(e.clone()),
            SafetyProperty::At(e, s) => SafetyProperty::At(e.clone(), s * r),
            SafetyProperty::And(a, b) => SafetyProperty::and(a.rescale(r), b.rescale(r)),
        }
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> SafetyProperty {
        match self {
            SafetyProperty::Always(e) => SafetyProperty::Always(e.rename(map)),
            SafetyProperty::At(e, s) => SafetyProperty::At(e.rename(map), *s),
            SafetyProperty::And(a, b) => SafetyProperty::and(a.rename(map), b.rename(map)),
        }
    }

    /// Whether the property holds at round `t` given that round's values.
    pub fn holds_at(&self, t: u64, val: &Valuation) -> Option<bool> {
        match self {
            SafetyProperty::Always(e) => e.eval_in(val).ok()?.as_bool(),
            SafetyProperty::At(e, s) => {
                if t != *s {
                    Some(true)
                } else {
                    e.eval_in(val).ok()?.as_bool()
                }
            }
            SafetyProperty::And(a, b) => Some(a.holds_at(t, val)? && b.holds_at(t, val)?),
        }
    }

    /// Reference semantics on a finite trace: `e@s` is vacuous beyond its end.
    pub fn holds_on(&self, rows: &[Valuation]) -> Option<bool> {
        for (t, r) in rows.iter().enumerate() {
            if !self.holds_at(t as u64, r)? {
                return Some(false);
            }
        }
        Some(true)
    }

    /// Predicate that is true at symbolic round `t` (an int-valued expression).
    pub fn holds_at_symbolic(&self, t: &Expr) -> Expr {
        match self {
            SafetyProperty::Always(e) => e.clone(),
            SafetyProperty::At(e, s) => Expr::bin(
                BinOp::Implies,
                Expr::eq(t.clone(), Expr::Const(Value::int(*s as i64))),
                e.clone(),
            ),
            SafetyProperty::And(a, b) => {
                Expr::bin(BinOp::And, a.holds_at_symbolic(t), b.holds_at_symbolic(t))
            }
        }
    }

    /// Checks that every predicate is boolean over the given variables.
    pub fn typecheck(&self, types: &dyn Fn(&str) -> Option<Type>) -> Result<(), PropertyError> {
        for v in self.free_vars() {
            if types(&v).is_none() {
                return Err(PropertyError::UnknownVar(v));
            }
        }
        let mut res = Ok(());
        self.visit(&mut |e, _| {
            if res.is_err() {
                return;
            }
            match e.type_of(types) {
                Ok(Type::Bool) => {}
                Ok(t) => {
                    res = Err(PropertyError::NotBoolean(
                        e.to_string(),
                        format!("has type {}", t),
                    ))
                }
                Err(m) => res = Err(PropertyError::NotBoolean(e.to_string(), m)),
            }
        });
        res
    }
}

impl fmt::Display for SafetyProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyProperty::Always(e) => write!(f, "always {}", e),
            SafetyProperty::At(e, s) => {
                if matches!(e, Expr::Var(_) | Expr::Const(_)) {
                    write!(f, "{} @ {}", e, s)
                } else {
                    write!(f, "({}) @ {}", e, s)
                }
            }
            SafetyProperty::And(a, b) => write!(f, "{} /\\ {}", a, b),
        }
    }
}

/// Guesses variable types from how a predicate uses them, for observers
/// evaluated without a typing context: boolean positions give bool,
/// comparisons with literals give the literal's type, otherwise int.
pub fn infer_var_types(e: &Expr, expected: Type, out: &mut BTreeMap<String, Type>) {
    fn lit_type(e: &Expr) -> Option<Type> {
        match e {
            Expr::Const(v) => Some(v.ty()),
            Expr::Unary(_, a) => lit_type(a),
            Expr::Binary(_, a, b) => lit_type(a).or_else(|| lit_type(b)),
            _ => None,
        }
    }
    match e {
        Expr::Const(_) => {}
        Expr::Var(v) => {
            out.entry(v.clone()).or_insert(expected);
        }
        Expr::Unary(crate::ir::UnOp::Not, a) => infer_var_types(a, Type::Bool, out),
        Expr::Unary(_, a) => infer_var_types(a, expected, out),
        Expr::Ite(c, t, f) => {
            infer_var_types(c, Type::Bool, out);
            infer_var_types(t, expected, out);
            infer_var_types(f, expected, out);
        }
        Expr::Binary(op, a, b) => {
            use BinOp::*;
            match op {
                And | Or | Xor | Implies => {
                    infer_var_types(a, Type::Bool, out);
                    infer_var_types(b, Type::Bool, out);
                }
                Eq | Ne | Lt | Le | Gt | Ge => {
                    let default = if matches!(op, Eq | Ne) {
                        Type::Bool
                    } else {
                        Type::Int
                    };
                    let t = lit_type(a).or_else(|| lit_type(b)).unwrap_or(default);
                    infer_var_types(a, t, out);
                    infer_var_types(b, t, out);
                }
                Div => {
                    infer_var_types(a, Type::Real, out);
                    infer_var_types(b, Type::Real, out);
                }
                _ => {
                    infer_var_types(a, expected, out);
                    infer_var_types(b, expected, out);
                }
            }
        }
    }
}

/// Monitor node for `phi`: inputs are the observed variables, the single
/// output is `ok`, and each `e@s` gets a counter `{prefix}c{i}` saturating at
/// `s + 1`.
pub fn observer(
    phi: &SafetyProperty,
    types: &dyn Fn(&str) -> Option<Type>,
    ok: &str,
    prefix: &str,
) -> Result<Node, PropertyError> {
    phi.typecheck(types)?;
    let inputs: Vec<Var> = phi
        .free_vars()
        .into_iter()
        .map(|v| Var::new(v.clone(), types(&v).unwrap()))
        .collect();
    let mut states = Vec::new();
    let mut init = Vec::new();
    let mut next = Vec::new();
    let mut oks = Vec::new();
    let mut counter = 0usize;
    fn build(
        phi: &SafetyProperty,
        prefix: &str,
        counter: &mut usize,
        states: &mut Vec<Var>,
        init: &mut Vec<Expr>,
        next: &mut Vec<Def>,
        oks: &mut Vec<Expr>,
    ) {
        match phi {
            SafetyProperty::Always(e) => oks.push(e.clone()),
            SafetyProperty::At(e, s) => {
                *counter += 1;
                let c = format!("{}c{}", prefix, counter);
                let s = *s as i64;
                states.push(Var::new(c.clone(), Type::Int));
                init.push(Expr::eq(Expr::var(c.clone()), Expr::int(0)));
                next.push(Def::new(
                    c.clone(),
                    Expr::ite(
                        Expr::bin(BinOp::Le, Expr::var(c.clone()), Expr::int(s)),
                        Expr::bin(BinOp::Add, Expr::var(c.clone()), Expr::int(1)),
                        Expr::var(c.clone()),
                    ),
                ));
                oks.push(Expr::bin(
                    BinOp::Or,
                    Expr::bin(BinOp::Ne, Expr::var(c), Expr::int(s)),
                    e.clone(),
                ));
            }
            SafetyProperty::And(a, b) => {
                build(a, prefix, counter, states, init, next, oks);
                build(b, prefix, counter, states, init, next, oks);
            }
        }
    }
    build(
        phi,
        prefix,
        &mut counter,
        &mut states,
        &mut init,
        &mut next,
        &mut oks,
    );
    Ok(Node {
        name: format!("obs({})", phi),
        inputs,
        outputs: vec![Var::new(ok, Type::Bool)],
        states,
        locals: vec![],
        params: vec![],
        init: Expr::and_all(init),
        defs: vec![Def::new(ok, Expr::and_all(oks))],
        next,
    })
}

/// Replaces each state variable `x` by `x'`.
pub fn prime(e: &Expr, states: &BTreeSet<String>) -> Result<Expr, PropertyError> {
    for v in e.free_vars() {
        if v.ends_with('\'') {
            return Err(PropertyError::AlreadyPrimed(v));
        }
        if !states.contains(&v) {
            return Err(PropertyError::NotState(v));
        }
    }
    let map = e
        .free_vars()
        .into_iter()
        .map(|v| (v.clone(), format!("{}'", v)))
        .collect();
    Ok(e.rename(&map))
}

/// Result of checking `phi1 ⇒ phi2` round by round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Implication {
    Valid,
    /// A round and valuation where `phi1` holds and `phi2` does not.
    Countermodel {
        round: Option<i64>,
        values: Valuation,
    },
    Unknown(String),
}

/// Round-wise validity of `phi1 ⇒ phi2` over a symbolic round `t ≥ 0` and
/// symbolic values for the observed variables. Sound, not complete: a valid
/// result implies trace-level implication.
pub fn implies(
    phi1: &SafetyProperty,
    phi2: &SafetyProperty,
    types: &dyn Fn(&str) -> Option<Type>,
    solver: &crate::smt::SolverConfig,
) -> Result<Implication, crate::smt::SmtError> {
    const ROUND: &str = "#t";
    let t = Expr::var(ROUND);
    let mut tys: BTreeMap<String, Type> = BTreeMap::new();
    for v in phi1.free_vars().into_iter().chain(phi2.free_vars()) {
        let ty = types(&v)
            .ok_or_else(|| crate::smt::SmtError::Encoding(format!("untyped variable `{}`", v)))?;
        tys.insert(v, ty);
    }
    tys.insert(ROUND.into(), Type::Int);
    let claim = Expr::bin(
        BinOp::Implies,
        Expr::bin(BinOp::Ge, t.clone(), Expr::int(0)),
        Expr::bin(
            BinOp::Implies,
            phi1.holds_at_symbolic(&t),
            phi2.holds_at_symbolic(&t),
        ),
    );
    Ok(match crate::smt::check_valid(&claim, &tys, solver)? {
        crate::smt::Validity::Valid => Implication::Valid,
        crate::smt::Validity::Invalid(mut m) => {
            let round = m
                .remove(ROUND)
                .and_then(|v| v.as_int().and_then(|i| i64::try_from(i.clone()).ok()));
            Implication::Countermodel { round, values: m }
        }
        crate::smt::Validity::Unknown(r) => Implication::Unknown(r),
    })
}
