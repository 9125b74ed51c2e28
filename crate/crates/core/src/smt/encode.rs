//! Bounded unrolling of a node into SMT-LIB 2 declarations and assertions.
//!
//! Round `r` instances are named `|x@r|`. The state read at round `r` is the
//! instance `s@(r-1)`, so `s@-1` is the initial state and `s@r = next(s)` at
//! round `r`. Template parameters are round-free symbols `|p|`.

use std::collections::BTreeMap;

use num::Signed;

use crate::ir::{rational_to_decimal, BinOp, Expr, Type, UnOp, Valuation, Value};
use crate::semantics::{Node, Trace};

use super::sexp::Sexp;
use super::SmtError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymRef {
    Var { name: String, round: i64 },
    Param(String),
}

#[derive(Clone, Debug)]
pub struct Unrolling {
    pub node: Node,
    pub logic: String,
    /// Declarations in emission order.
    pub decls: Vec<(String, Type)>,
    pub table: BTreeMap<String, SymRef>,
    /// Assertions in emission order, already rendered.
    pub asserts: Vec<String>,
    /// Number of encoded rounds (`k + 1` for bound `k`).
    pub rounds: usize,
    types: BTreeMap<String, Type>,
}

/// SMT symbol of variable `name` at `round`.
pub fn sym(name: &str, round: i64) -> String {
    format!("|{}@{}|", name, round)
}

pub fn param_sym(name: &str) -> String {
    format!("|{}|", name)
}

fn sort(t: Type) -> &'static str {
    match t {
        Type::Bool => "Bool",
        Type::Int => "Int",
        Type::Real => "Real",
    }
}

pub fn literal(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) if i.is_negative() => format!("(- {})", -i),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => {
            let a = r.abs();
            let body = if a.is_integer() {
                format!("{}.0", a.numer())
            } else {
                match rational_to_decimal(&a) {
                    Some(d) if !d.contains('e') => d,
                    _ => format!("(/ {}.0 {}.0)", a.numer(), a.denom()),
                }
            };
            if r.is_negative() {
                format!("(- {})", body)
            } else {
                body
            }
        }
    }
}

fn has_var_divisor(e: &Expr) -> bool {
    match e {
        Expr::Const(_) | Expr::Var(_) => false,
        Expr::Unary(_, a) => has_var_divisor(a),
        Expr::Binary(op, a, b) => {
            (matches!(op, BinOp::Div | BinOp::IntDiv | BinOp::Mod) && !b.free_vars().is_empty())
                || has_var_divisor(a)
                || has_var_divisor(b)
        }
        Expr::Ite(c, t, f) => has_var_divisor(c) || has_var_divisor(t) || has_var_divisor(f),
    }
}

impl Unrolling {
    /// Declares parameters and the initial state and asserts Init.
    pub fn new(node: &Node) -> Result<Unrolling, SmtError> {
        let needs_all = node
            .defs
            .iter()
            .chain(&node.next)
            .any(|d| has_var_divisor(&d.expr));
        let mut u = Unrolling {
            node: node.clone(),
            logic: if needs_all {
                "ALL".into()
            } else {
                "QF_LIRA".into()
            },
            decls: vec![],
            table: BTreeMap::new(),
            asserts: vec![],
            rounds: 0,
            types: node.type_map(),
        };
        for p in &node.params {
            let s = param_sym(&p.name);
            u.declare(s, p.ty, SymRef::Param(p.name.clone()));
        }
        for s in &node.states {
            u.declare(
                sym(&s.name, -1),
                s.ty,
                SymRef::Var {
                    name: s.name.clone(),
                    round: -1,
                },
            );
        }
        let init = u.term_at(&node.init, 0)?;
        u.asserts.push(init);
        Ok(u)
    }

    /// Unrolling of rounds `0..=k` with extra `(constraint, round)` assertions.
    pub fn encode(node: &Node, k: usize, extra: &[(Expr, usize)]) -> Result<Unrolling, SmtError> {
        let mut u = Unrolling::new(node)?;
        for _ in 0..=k {
            u.add_round()?;
        }
        for (e, r) in extra {
            let t = u.term(e, *r)?;
            u.asserts.push(t);
        }
        Ok(u)
    }

    fn declare(&mut self, s: String, t: Type, r: SymRef) {
        self.table.insert(s.trim_matches('|').to_string(), r);
        self.decls.push((s, t));
    }

    /// Encodes the next round. Returns the commands to send to a live session.
    pub fn add_round(&mut self) -> Result<Vec<String>, SmtError> {
        let r = self.rounds as i64;
        let (d0, a0) = (self.decls.len(), self.asserts.len());
        let node = self.node.clone();
        for v in node
            .inputs
            .iter()
            .chain(&node.outputs)
            .chain(&node.locals)
            .chain(&node.states)
        {
            let round = r;
            self.declare(
                sym(&v.name, round),
                v.ty,
                SymRef::Var {
                    name: v.name.clone(),
                    round,
                },
            );
        }
        self.rounds += 1;
        for d in &node.defs {
            self.guard_divisions(&d.expr, r as usize)?;
            let rhs = self.term(&d.expr, r as usize)?;
            self.asserts.push(format!("(= {} {})", sym(&d.var, r), rhs));
        }
        for d in &node.next {
            self.guard_divisions(&d.expr, r as usize)?;
            let rhs = self.term(&d.expr, r as usize)?;
            self.asserts.push(format!("(= {} {})", sym(&d.var, r), rhs));
        }
        let mut cmds: Vec<String> = self.decls[d0..]
            .iter()
            .map(|(s, t)| format!("(declare-fun {} () {})", s, sort(*t)))
            .collect();
        cmds.extend(self.asserts[a0..].iter().map(|a| format!("(assert {})", a)));
        Ok(cmds)
    }

    /// Asserts `divisor ≠ 0` wherever a division by a non-constant is evaluated.
    fn guard_divisions(&mut self, e: &Expr, r: usize) -> Result<(), SmtError> {
        let mut guards = Vec::new();
        collect_guards(e, &mut Vec::new(), &mut guards);
        for (path, d) in guards {
            let zero = Expr::Const(match d.type_of(&|v| self.types.get(v).copied()) {
                Ok(Type::Real) => Value::real(0, 1),
                _ => Value::int(0),
            });
            let ne = Expr::bin(BinOp::Ne, d, zero);
            let g = if path.is_empty() {
                ne
            } else {
                Expr::bin(BinOp::Implies, Expr::and_all(path), ne)
            };
            let t = self.term(&g, r)?;
            self.asserts.push(t);
        }
        Ok(())
    }

    /// Translates `e` evaluated at `round`.
    pub fn term(&self, e: &Expr, round: usize) -> Result<String, SmtError> {
        if round >= self.rounds {
            return Err(SmtError::Encoding(format!(
                "round {} is beyond the unrolling ({} rounds)",
                round, self.rounds
            )));
        }
        self.term_at(e, round as i64)
    }

    fn term_at(&self, e: &Expr, r: i64) -> Result<String, SmtError> {
        Ok(match e {
            Expr::Const(v) => literal(v),
            Expr::Var(v) => {
                if self.node.params.iter().any(|p| &p.name == v) {
                    param_sym(v)
                } else if self.node.states.iter().any(|s| &s.name == v) {
                    sym(v, r - 1)
                } else if self.types.contains_key(v) {
                    sym(v, r)
                } else {
                    return Err(SmtError::Encoding(format!("unknown variable `{}`", v)));
                }
            }
            Expr::Unary(UnOp::Not, a) => format!("(not {})", self.term_at(a, r)?),
            Expr::Unary(UnOp::Neg, a) => format!("(- {})", self.term_at(a, r)?),
            Expr::Ite(c, t, f) => {
                format!(
                    "(ite {} {} {})",
                    self.term_at(c, r)?,
                    self.term_at(t, r)?,
                    self.term_at(f, r)?
                )
            }
            Expr::Binary(op, a, b) => {
                if *op == BinOp::Mul && !a.free_vars().is_empty() && !b.free_vars().is_empty() {
                    return Err(SmtError::Nonlinear(e.to_string()));
                }
                let (x, y) = (self.term_at(a, r)?, self.term_at(b, r)?);
                let f = match op {
                    BinOp::And => "and",
                    BinOp::Or => "or",
                    BinOp::Xor => "xor",
                    BinOp::Implies => "=>",
                    BinOp::Eq => "=",
                    BinOp::Ne => return Ok(format!("(not (= {} {}))", x, y)),
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Gt => ">",
                    BinOp::Ge => ">=",
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::IntDiv => "div",
                    BinOp::Mod => "mod",
                };
                format!("({} {} {})", f, x, y)
            }
        })
    }

    /// Self-contained script: header, declarations, assertions, optional
    /// goal, `check-sat` and `get-model`.
    pub fn script(&self, goal: Option<&str>) -> String {
        let mut s = String::new();
        for h in self.header() {
            s.push_str(&h);
            s.push('\n');
        }
        for (n, t) in &self.decls {
            s.push_str(&format!("(declare-fun {} () {})\n", n, sort(*t)));
        }
        for a in &self.asserts {
            s.push_str(&format!("(assert {})\n", a));
        }
        if let Some(g) = goal {
            s.push_str(&format!("(assert {})\n", g));
        }
        s.push_str("(check-sat)\n(get-model)\n");
        s
    }

    pub fn header(&self) -> Vec<String> {
        vec![
            "(set-option :produce-models true)".into(),
            format!("(set-logic {})", self.logic),
        ]
    }

    pub fn type_of_sym(&self, s: &str) -> Option<Type> {
        let key = s.trim_matches('|');
        self.decls
            .iter()
            .find(|(n, _)| n.trim_matches('|') == key)
            .map(|(_, t)| *t)
    }

    /// Rebuilds the trace, parameter values, per-round wires and states from
    /// solver values keyed by unquoted symbol.
    pub fn decode(&self, values: &BTreeMap<String, Value>) -> Result<Decoded, SmtError> {
        let get = |s: &str| -> Result<Value, SmtError> {
            let key = s.trim_matches('|');
            values
                .get(key)
                .cloned()
                .ok_or_else(|| SmtError::MissingSymbol(key.to_string()))
        };
        let mut params = Valuation::new();
        for p in &self.node.params {
            params.insert(p.name.clone(), get(&param_sym(&p.name))?.coerce(p.ty));
        }
        let mut trace = Trace::empty(self.node.inputs.clone(), self.node.outputs.clone());
        let mut states = Vec::new();
        let mut wires = Vec::new();
        let s0: Valuation = self
            .node
            .states
            .iter()
            .map(|s| Ok((s.name.clone(), get(&sym(&s.name, -1))?.coerce(s.ty))))
            .collect::<Result<_, SmtError>>()?;
        states.push(s0);
        for r in 0..self.rounds as i64 {
            let row = |vs: &[crate::ir::Var]| -> Result<Valuation, SmtError> {
                vs.iter()
                    .map(|v| Ok((v.name.clone(), get(&sym(&v.name, r))?.coerce(v.ty))))
                    .collect()
            };
            trace.inputs.push(row(&self.node.inputs)?);
            trace.outputs.push(row(&self.node.outputs)?);
            states.push(row(&self.node.states)?);
            let mut w = row(&self.node.locals)?;
            w.extend(trace.inputs.last().unwrap().clone());
            w.extend(trace.outputs.last().unwrap().clone());
            wires.push(w);
        }
        trace.states = Some(states);
        Ok(Decoded {
            trace,
            params,
            wires,
        })
    }
}

fn collect_guards(e: &Expr, path: &mut Vec<Expr>, out: &mut Vec<(Vec<Expr>, Expr)>) {
    match e {
        Expr::Const(_) | Expr::Var(_) => {}
        Expr::Unary(_, a) => collect_guards(a, path, out),
        Expr::Ite(c, t, f) => {
            collect_guards(c, path, out);
            path.push((**c).clone());
            collect_guards(t, path, out);
            path.pop();
            path.push(Expr::not((**c).clone()));
            collect_guards(f, path, out);
            path.pop();
        }
        Expr::Binary(op, a, b) => {
            collect_guards(a, path, out);
            let cond = match op {
                BinOp::And | BinOp::Implies => Some((**a).clone()),
                BinOp::Or => Some(Expr::not((**a).clone())),
                _ => None,
            };
            if let Some(c) = &cond {
                path.push(c.clone());
            }
            collect_guards(b, path, out);
            if cond.is_some() {
                path.pop();
            }
            if matches!(op, BinOp::Div | BinOp::IntDiv | BinOp::Mod) && !b.free_vars().is_empty() {
                out.push((path.clone(), (**b).clone()));
            }
        }
    }
}

/// A decoded model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub trace: Trace,
    pub params: Valuation,
    /// Inputs, outputs and locals per round.
    pub wires: Vec<Valuation>,
}

/// Reads a solver value of the given sort.
pub fn value_of(s: &Sexp, ty: Type) -> Result<Value, SmtError> {
    let bad = || SmtError::Malformed(format!("cannot read `{}` as {}", s, ty));
    let num = rational_of(s).ok_or_else(bad)?;
    match (ty, num) {
        (Type::Bool, Num::Bool(b)) => Ok(Value::Bool(b)),
        (Type::Int, Num::Rat(r)) if r.is_integer() => Ok(Value::Int(r.to_integer())),
        (Type::Real, Num::Rat(r)) => Ok(Value::Real(r)),
        _ => Err(bad()),
    }
}

enum Num {
    Bool(bool),
    Rat(num::BigRational),
}

fn rational_of(s: &Sexp) -> Option<Num> {
    match s {
        Sexp::Atom(a) if a == "true" => Some(Num::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(Num::Bool(false)),
        Sexp::Atom(a) => crate::ir::parse_rational(a).map(Num::Rat),
        Sexp::List(l) => {
            let op = l.first()?.atom()?;
            let args: Vec<num::BigRational> = l[1..]
                .iter()
                .map(|x| match rational_of(x) {
                    Some(Num::Rat(r)) => Some(r),
                    _ => None,
                })
                .collect::<Option<_>>()?;
            match (op, args.as_slice()) {
                ("-", [x]) => Some(Num::Rat(-x.clone())),
                ("/", [x, y]) if !num::Zero::is_zero(y) => Some(Num::Rat(x / y)),
                _ => None,
            }
        }
        Sexp::Str(_) => None,
    }
}

/// Parses `(get-model)` output into values for the unrolling's symbols.
pub fn decode_model(u: &Unrolling, model: &str) -> Result<BTreeMap<String, Value>, SmtError> {
    let s = super::sexp::parse(model).map_err(SmtError::Malformed)?;
    let items = s
        .list()
        .ok_or_else(|| SmtError::Malformed("model is not a list".into()))?;
    let mut out = BTreeMap::new();
    for it in items {
        let Some(l) = it.list() else { continue };
        // (define-fun name () Sort value)
        if l.len() != 5 || l[0].atom() != Some("define-fun") {
            continue;
        }
        if l[2].list().is_none_or(|a| !a.is_empty()) {
            continue;
        }
        let Some(name) = l[1].atom() else { continue };
        let Some(ty) = u.type_of_sym(name) else {
            continue;
        };
        out.insert(name.to_string(), value_of(&l[4], ty)?);
    }
    Ok(out)
}
