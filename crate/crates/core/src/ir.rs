//! Typed expression IR shared by elaborated nodes, predicates and the SMT encoder.
//!
//! Values are exact: integers are unbounded and reals are rationals, so the
//! simulator and the solver agree bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Euclid, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Bool,
    Int,
    Real,
}

impl Type {
    pub fn default_value(self) -> Value {
        match self {
            Type::Bool => Value::Bool(false),
            Type::Int => Value::Int(BigInt::zero()),
            Type::Real => Value::Real(BigRational::zero()),
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Bool => "bool",
            Type::Int => "int",
            Type::Real => "real",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(BigInt),
    Real(BigRational),
}

/// A variable valuation. Ordered so traces and reports are deterministic.
pub type Valuation = BTreeMap<String, Value>;

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Bool(_) => Type::Bool,
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Real,
        }
    }

    pub fn int(v: i64) -> Value {
        Value::Int(BigInt::from(v))
    }

    pub fn real(num: i64, den: i64) -> Value {
        Value::Real(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    /// Converts an integer value to a real one; other values are returned unchanged.
    pub fn coerce(&self, ty: Type) -> Value {
        match (self, ty) {
            (Value::Int(i), Type::Real) => Value::Real(BigRational::from_integer(i.clone())),
            _ => self.clone(),
        }
    }

    /// Parses `true`, `false`, decimal integers, decimals and `p/q` rationals.
    pub fn parse(text: &str, ty: Type) -> Option<Value> {
        let text = text.trim();
        match ty {
            Type::Bool => match text {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
            Type::Int => text.parse::<BigInt>().ok().map(Value::Int),
            Type::Real => parse_rational(text).map(Value::Real),
        }
    }

    /// CSV rendering: booleans as words, ints in decimal, reals as exact
    /// decimals when finite and `p/q` otherwise.
    pub fn to_csv(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Real(r) => {
                rational_to_decimal(r).unwrap_or_else(|| format!("{}/{}", r.numer(), r.denom()))
            }
        }
    }
}

/// Parses `p/q`, `-1.25`, `3` or `1e-3`-free decimal text into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{}{}", int_part, frac_part);
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = num::pow(BigInt::from(10), frac_part.len());
    let r = BigRational::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// Renders a rational as a terminating decimal when possible.
pub fn rational_to_decimal(r: &BigRational) -> Option<String> {
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let places = twos.max(fives).max(1);
    let scaled = r * BigRational::from_integer(num::pow(BigInt::from(10), places));
    debug_assert!(scaled.is_integer());
    let n = scaled.to_integer();
    let neg = n.is_negative();
    let digits = n.abs().to_string();
    let digits = format!("{:0>width$}", digits, width = places + 1);
    let (i, f) = digits.split_at(digits.len() - places);
    let f = f.trim_end_matches('0');
    let f = if f.is_empty() { "0" } else { f };
    Some(format!("{}{}.{}", if neg { "-" } else { "" }, i, f))
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{}", b),
            Value::Int(i) => write!(f, "{}", i),
            Value::Real(r) => match rational_to_decimal(r) {
                Some(s) => f.write_str(&s),
                None => write!(f, "({}.0 / {}.0)", r.numer(), r.denom()),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Implies,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    IntDiv,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Implies => "=>",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
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
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 2,
            BinOp::Or | BinOp::Xor => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::IntDiv | BinOp::Mod => 7,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 5
    }

    pub fn is_right_assoc(self) -> bool {
        matches!(self, BinOp::Implies)
    }
}

pub const PREC_ITE: u8 = 0;
pub const PREC_ARROW: u8 = 1;
pub const PREC_UNARY: u8 = 8;
pub const PREC_ATOM: u8 = 9;

/// Expression over named variables. State variables are ordinary names
/// (`pre(x)` by convention), so an `Expr` never contains temporal operators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("ill-typed operation: {0}")]
    IllTyped(String),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bool(b: bool) -> Expr {
        Expr::Const(Value::Bool(b))
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Value::int(v))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Eq, a, b)
    }

    /// Left-nested conjunction; `true` for an empty list.
    pub fn and_all(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut acc: Option<Expr> = None;
        for p in parts {
            if p == Expr::bool(true) {
                continue;
            }
            acc = Some(match acc {
                None => p,
                Some(a) => Expr::bin(BinOp::And, a, p),
            });
        }
        acc.unwrap_or_else(|| Expr::bool(true))
    }

    /// Flattens nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary(BinOp::And, a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            Expr::Const(Value::Bool(true)) => vec![],
            e => vec![e],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Ite(c, t, e) => {
                c.collect_vars(out);
                t.collect_vars(out);
                e.collect_vars(out);
            }
        }
    }

    /// Replaces variables for which `f` returns a term.
    pub fn substitute(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.substitute(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute(f)), Box::new(b.substitute(f)))
            }
            Expr::Ite(c, t, e) => Expr::Ite(
                Box::new(c.substitute(f)),
                Box::new(t.substitute(f)),
                Box::new(e.substitute(f)),
            ),
        }
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> Expr {
        self.substitute(&|v| map.get(v).map(|n| Expr::Var(n.clone())))
    }

    pub fn is_const(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        match self {
            Expr::Const(v) => Ok(v.clone()),
            Expr::Var(v) => env(v).ok_or_else(|| EvalError::Unbound(v.clone())),
            Expr::Unary(op, a) => {
                let a = a.eval(env)?;
                match (op, a) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(i)) => Ok(Value::Int(-i)),
                    (UnOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
                    (op, v) => Err(EvalError::IllTyped(format!("{:?} on {}", op, v))),
                }
            }
            Expr::Ite(c, t, e) => match c.eval(env)? {
                Value::Bool(true) => t.eval(env),
                Value::Bool(false) => e.eval(env),
                v => Err(EvalError::IllTyped(format!("if on {}", v))),
            },
            Expr::Binary(op, a, b) => {
                // Short-circuit keeps guarded divisions like `y <> 0 and x / y > 1` total.
                match op {
                    BinOp::And => {
                        if a.eval(env)?.as_bool() == Some(false) {
                            return Ok(Value::Bool(false));
                        }
                    }
                    BinOp::Or => {
                        if a.eval(env)?.as_bool() == Some(true) {
                            return Ok(Value::Bool(true));
                        }
                    }
                    BinOp::Implies if a.eval(env)?.as_bool() == Some(false) => {
                        return Ok(Value::Bool(true));
                    }
                    _ => {}
                }
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                apply_binop(*op, a, b)
            }
        }
    }

    /// Evaluates against a valuation.
    pub fn eval_in(&self, val: &Valuation) -> Result<Value, EvalError> {
        self.eval(&|v| val.get(v).cloned())
    }

    /// Infers the type given variable types. Ints and reals never mix.
    pub fn type_of(&self, types: &dyn Fn(&str) -> Option<Type>) -> Result<Type, String> {
        match self {
            Expr::Const(v) => Ok(v.ty()),
            Expr::Var(v) => types(v).ok_or_else(|| format!("unbound variable `{}`", v)),
            Expr::Unary(UnOp::Not, a) => match a.type_of(types)? {
                Type::Bool => Ok(Type::Bool),
                t => Err(format!("`not` applied to {}", t)),
            },
            Expr::Unary(UnOp::Neg, a) => match a.type_of(types)? {
                Type::Bool => Err("unary minus applied to bool".into()),
                t => Ok(t),
            },
            Expr::Ite(c, t, e) => {
                if c.type_of(types)? != Type::Bool {
                    return Err("non-boolean condition".into());
                }
                let tt = t.type_of(types)?;
                let te = e.type_of(types)?;
                if tt != te {
                    return Err(format!("branches have types {} and {}", tt, te));
                }
                Ok(tt)
            }
            Expr::Binary(op, a, b) => {
                let ta = a.type_of(types)?;
                let tb = b.type_of(types)?;
                binop_type(*op, ta, tb)
            }
        }
    }
}

pub fn binop_type(op: BinOp, ta: Type, tb: Type) -> Result<Type, String> {
    use BinOp::*;
    let mismatch = || format!("operator `{}` applied to {} and {}", op.symbol(), ta, tb);
    match op {
        And | Or | Xor | Implies => {
            if ta == Type::Bool && tb == Type::Bool {
                Ok(Type::Bool)
            } else {
                Err(mismatch())
            }
        }
        Eq | Ne => {
            if ta == tb {
                Ok(Type::Bool)
            } else {
                Err(mismatch())
            }
        }
        Lt | Le | Gt | Ge => {
            if ta == tb && ta.is_numeric() {
                Ok(Type::Bool)
            } else {
                Err(mismatch())
            }
        }
        Add | Sub | Mul => {
            if ta == tb && ta.is_numeric() {
                Ok(ta)
            } else {
                Err(mismatch())
            }
        }
        Div => {
            if ta == Type::Real && tb == Type::Real {
                Ok(Type::Real)
            } else {
                Err(mismatch())
            }
        }
        IntDiv | Mod => {
            if ta == Type::Int && tb == Type::Int {
                Ok(Type::Int)
            } else {
                Err(mismatch())
            }
        }
    }
}

pub fn apply_binop(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use BinOp::*;
    use Value::*;
    let ill = |a: &Value, b: &Value| EvalError::IllTyped(format!("{} {} {}", a, op.symbol(), b));
    Ok(match (op, &a, &b) {
        (And, Bool(x), Bool(y)) => Bool(*x && *y),
        (Or, Bool(x), Bool(y)) => Bool(*x || *y),
        (Xor, Bool(x), Bool(y)) => Bool(x != y),
        (Implies, Bool(x), Bool(y)) => Bool(!*x || *y),
        (Eq, _, _) if a.ty() == b.ty() => Bool(a == b),
        (Ne, _, _) if a.ty() == b.ty() => Bool(a != b),
        (Lt, Int(x), Int(y)) => Bool(x < y),
        (Le, Int(x), Int(y)) => Bool(x <= y),
        (Gt, Int(x), Int(y)) => Bool(x > y),
        (Ge, Int(x), Int(y)) => Bool(x >= y),
        (Lt, Real(x), Real(y)) => Bool(x < y),
        (Le, Real(x), Real(y)) => Bool(x <= y),
        (Gt, Real(x), Real(y)) => Bool(x > y),
        (Ge, Real(x), Real(y)) => Bool(x >= y),
        (Add, Int(x), Int(y)) => Int(x + y),
        (Sub, Int(x), Int(y)) => Int(x - y),
        (Mul, Int(x), Int(y)) => Int(x * y),
        (Add, Real(x), Real(y)) => Real(x + y),
        (Sub, Real(x), Real(y)) => Real(x - y),
        (Mul, Real(x), Real(y)) => Real(x * y),
        (Div, Real(x), Real(y)) => {
            if y.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            Real(x / y)
        }
        // SMT-LIB `div`/`mod`: Euclidean, remainder always nonnegative.
        (IntDiv, Int(x), Int(y)) => {
            if y.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            Int(x.div_euclid(y))
        }
        (Mod, Int(x), Int(y)) => {
            if y.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            Int(x.rem_euclid(y))
        }
        _ => return Err(ill(&a, &b)),
    })
}

/// Is `s` a plain identifier in the concrete syntax?
pub fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !crate::frontend::lexer::is_keyword(s)
}

/// Concrete-syntax rendering of a variable name: `x`, `x'`, `pre x`, `pre x'`
/// or a backquoted name for anything else.
pub fn display_var(name: &str) -> String {
    let trimmed = name.trim_end_matches('\'');
    let primes = &name[trimmed.len()..];
    if is_plain_ident(trimmed) {
        return format!("{}{}", trimmed, primes);
    }
    if let Some(inner) = trimmed
        .strip_prefix("pre(")
        .and_then(|r| r.strip_suffix(')'))
    {
        if is_plain_ident(inner) {
            return format!("pre {}{}", inner, primes);
        }
    }
    format!("`{}`", name)
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(Value::Int(i)) if i.is_negative() => PREC_UNARY,
            Expr::Const(Value::Real(r)) if r.is_negative() => PREC_UNARY,
            Expr::Const(Value::Real(r)) if rational_to_decimal(r).is_none() => PREC_ATOM,
            Expr::Const(_) => PREC_ATOM,
            Expr::Var(v) if display_var(v).starts_with("pre ") => PREC_UNARY,
            Expr::Var(_) => PREC_ATOM,
            Expr::Unary(..) => PREC_UNARY,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Ite(..) => PREC_ITE,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            write!(f, "(")?;
            self.fmt_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(v) => write!(f, "{}", v),
            Expr::Var(v) => f.write_str(&display_var(v)),
            Expr::Unary(UnOp::Not, a) => {
                write!(f, "not ")?;
                a.fmt_prec(f, PREC_UNARY)
            }
            Expr::Unary(UnOp::Neg, a) => {
                write!(f, "-")?;
                if a.precedence() < PREC_ATOM {
                    write!(f, "(")?;
                    a.fmt_prec(f, 0)?;
                    write!(f, ")")
                } else {
                    a.fmt_prec(f, PREC_UNARY)
                }
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (lmin, rmin) = if op.is_comparison() {
                    (p + 1, p + 1)
                } else if op.is_right_assoc() {
                    (p + 1, p)
                } else {
                    (p, p + 1)
                };
                a.fmt_prec(f, lmin)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, rmin)
            }
            Expr::Ite(c, t, e) => {
                write!(f, "if ")?;
                c.fmt_prec(f, 0)?;
                write!(f, " then ")?;
                t.fmt_prec(f, 0)?;
                write!(f, " else ")?;
                e.fmt_prec(f, 0)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub ty: Type,
}

impl Var {
    pub fn new(name: impl Into<String>, ty: Type) -> Var {
        Var {
            name: name.into(),
            ty,
        }
    }
}
