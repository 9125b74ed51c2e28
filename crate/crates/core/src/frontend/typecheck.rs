//! Type checking. Integer literals are coerced to reals where a real is
//! expected, and each call to a polymorphic template records how `'a` was
//! resolved at that call site.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{BinOp, Type, UnOp, Value};

use super::ast::*;
use super::lexer::Pos;
use super::{FrontendError, STDLIB_NAME};

/// Name of the builtin delay template, which has no `.lus` body.
pub const DELAY: &str = "Delay";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedProgram {
    pub nodes: Vec<NodeDecl>,
    pub stdlib: bool,
}

impl TypedProgram {
    pub fn node(&self, name: &str) -> Option<&NodeDecl> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Type of an expression inside `decl`, after checking.
    pub fn type_in(&self, decl: &NodeDecl, e: &Expr) -> Result<TypeExpr, FrontendError> {
        let env = Env::of(decl);
        let mut e = e.clone();
        Checker {
            prog: &self.nodes,
            stdlib: self.stdlib,
            env: &env,
        }
        .infer(&mut e, None)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Input,
    ConstInput,
    Defined,
}

struct Env {
    vars: BTreeMap<String, (TypeExpr, Kind)>,
}

impl Env {
    fn of(decl: &NodeDecl) -> Env {
        let mut vars = BTreeMap::new();
        for p in &decl.inputs {
            vars.insert(
                p.name.clone(),
                (
                    p.ty.clone(),
                    if p.is_const {
                        Kind::ConstInput
                    } else {
                        Kind::Input
                    },
                ),
            );
        }
        for p in decl.outputs.iter().chain(&decl.locals) {
            vars.insert(p.name.clone(), (p.ty.clone(), Kind::Defined));
        }
        Env { vars }
    }
}

pub fn typecheck(src: SourceProgram) -> Result<TypedProgram, FrontendError> {
    let stdlib = src.includes.iter().any(|i| i.path == STDLIB_NAME);
    let mut nodes = src.nodes;
    for i in 0..nodes.len() {
        let mut decl = nodes[i].clone();
        check_decl(&nodes, stdlib, &mut decl)?;
        nodes[i] = decl;
    }
    Ok(TypedProgram { nodes, stdlib })
}

fn check_decl(prog: &[NodeDecl], stdlib: bool, decl: &mut NodeDecl) -> Result<(), FrontendError> {
    let mut names = BTreeSet::new();
    for p in decl.inputs.iter().chain(&decl.outputs).chain(&decl.locals) {
        if !names.insert(p.name.clone()) {
            return Err(FrontendError::MultiplyDefined {
                pos: decl.pos,
                name: p.name.clone(),
            });
        }
    }
    let env = Env::of(decl);
    let mut defined = BTreeSet::new();
    let checker = Checker {
        prog,
        stdlib,
        env: &env,
    };
    for eq in &mut decl.equations {
        let Some((ty, kind)) = env.vars.get(&eq.lhs) else {
            return Err(FrontendError::Unbound {
                pos: eq.pos,
                name: eq.lhs.clone(),
            });
        };
        if *kind != Kind::Defined {
            return Err(FrontendError::DefinesInput {
                pos: eq.pos,
                name: eq.lhs.clone(),
            });
        }
        if !defined.insert(eq.lhs.clone()) {
            return Err(FrontendError::MultiplyDefined {
                pos: eq.pos,
                name: eq.lhs.clone(),
            });
        }
        checker.check(&mut eq.rhs, ty)?;
    }
    Ok(())
}

struct Checker<'a> {
    prog: &'a [NodeDecl],
    stdlib: bool,
    env: &'a Env,
}

/// Integer-valued expression built only from literals, so it may be read as a real.
fn literalish(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Lit(Value::Int(_)) => true,
        ExprKind::Unary(UnOp::Neg, a) => literalish(a),
        ExprKind::Binary(BinOp::Add | BinOp::Sub | BinOp::Mul, a, b) => {
            literalish(a) && literalish(b)
        }
        _ => false,
    }
}

fn to_real(e: &mut Expr) {
    match &mut e.kind {
        ExprKind::Lit(v @ Value::Int(_)) => *v = v.coerce(Type::Real),
        ExprKind::Unary(_, a) => to_real(a),
        ExprKind::Binary(_, a, b) => {
            to_real(a);
            to_real(b);
        }
        _ => {}
    }
}

fn mismatch(pos: Pos, msg: String) -> FrontendError {
    FrontendError::TypeMismatch { pos, msg }
}

const BOOL: TypeExpr = TypeExpr::Base(Type::Bool);
const INT: TypeExpr = TypeExpr::Base(Type::Int);
const REAL: TypeExpr = TypeExpr::Base(Type::Real);

impl<'a> Checker<'a> {
    /// Checks `e` against `ty`, coercing integer literals where needed.
    fn check(&self, e: &mut Expr, ty: &TypeExpr) -> Result<(), FrontendError> {
        let got = self.infer(e, Some(ty))?;
        if &got == ty {
            return Ok(());
        }
        if got == INT && *ty == REAL && literalish(e) {
            to_real(e);
            return Ok(());
        }
        Err(mismatch(e.pos, format!("expected {}, found {}", ty, got)))
    }

    /// Infers two operands that must share a type.
    fn unify2(
        &self,
        a: &mut Expr,
        b: &mut Expr,
        hint: Option<&TypeExpr>,
    ) -> Result<TypeExpr, FrontendError> {
        let hint_a = if literalish(a) && !literalish(b) {
            None
        } else {
            hint
        };
        let ta = self.infer(a, hint_a)?;
        let tb = self.infer(b, Some(hint.unwrap_or(&ta)))?;
        if ta == tb {
            return Ok(ta);
        }
        if ta == INT && tb == REAL && literalish(a) {
            to_real(a);
            return Ok(REAL);
        }
        if ta == REAL && tb == INT && literalish(b) {
            to_real(b);
            return Ok(REAL);
        }
        Err(mismatch(
            b.pos,
            format!("operands have types {} and {}", ta, tb),
        ))
    }

    fn infer(&self, e: &mut Expr, hint: Option<&TypeExpr>) -> Result<TypeExpr, FrontendError> {
        let pos = e.pos;
        match &mut e.kind {
            ExprKind::Lit(v) => {
                if matches!(v, Value::Int(_)) && hint == Some(&REAL) {
                    *v = v.coerce(Type::Real);
                }
                Ok(TypeExpr::Base(v.ty()))
            }
            ExprKind::Var(name) => match self.env.vars.get(name.as_str()) {
                Some((t, _)) => Ok(t.clone()),
                None => Err(FrontendError::Unbound {
                    pos,
                    name: name.clone(),
                }),
            },
            ExprKind::Unary(UnOp::Not, a) => {
                self.check(a, &BOOL)?;
                Ok(BOOL)
            }
            ExprKind::Unary(UnOp::Neg, a) => {
                let t = self.infer(a, hint)?;
                if !matches!(t, TypeExpr::Base(b) if b.is_numeric()) {
                    return Err(mismatch(pos, format!("unary minus applied to {}", t)));
                }
                Ok(t)
            }
            ExprKind::Pre(a) => self.infer(a, hint),
            ExprKind::Arrow(a, b) => self.unify2(a, b, hint),
            ExprKind::Ite(c, t, f) => {
                self.check(c, &BOOL)?;
                self.unify2(t, f, hint)
            }
            ExprKind::Binary(op, a, b) => {
                let op = *op;
                use BinOp::*;
                match op {
                    And | Or | Xor | Implies => {
                        self.check(a, &BOOL)?;
                        self.check(b, &BOOL)?;
                        Ok(BOOL)
                    }
                    Eq | Ne => {
                        self.unify2(a, b, None)?;
                        Ok(BOOL)
                    }
                    Lt | Le | Gt | Ge => {
                        let t = self.unify2(a, b, None)?;
                        if !matches!(t, TypeExpr::Base(b) if b.is_numeric()) {
                            return Err(mismatch(
                                pos,
                                format!("`{}` applied to {}", op.symbol(), t),
                            ));
                        }
                        Ok(BOOL)
                    }
                    Add | Sub | Mul => {
                        let h = hint.filter(|h| matches!(h, TypeExpr::Base(b) if b.is_numeric()));
                        let t = self.unify2(a, b, h)?;
                        if !matches!(t, TypeExpr::Base(b) if b.is_numeric()) {
                            return Err(mismatch(
                                pos,
                                format!("`{}` applied to {}", op.symbol(), t),
                            ));
                        }
                        Ok(t)
                    }
                    Div => {
                        self.check(a, &REAL)?;
                        self.check(b, &REAL)?;
                        Ok(REAL)
                    }
                    IntDiv | Mod => {
                        self.check(a, &INT)?;
                        self.check(b, &INT)?;
                        Ok(INT)
                    }
                }
            }
            ExprKind::Call {
                name,
                statics,
                args,
                inst,
            } => {
                let name = name.clone();
                self.call(pos, &name, statics, args, inst, hint)
            }
        }
    }

    fn is_const_expr(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Lit(_) => true,
            ExprKind::Var(v) => {
                matches!(self.env.vars.get(v.as_str()), Some((_, Kind::ConstInput)))
            }
            ExprKind::Unary(_, a) => self.is_const_expr(a),
            ExprKind::Binary(_, a, b) => self.is_const_expr(a) && self.is_const_expr(b),
            ExprKind::Ite(c, t, f) => {
                self.is_const_expr(c) && self.is_const_expr(t) && self.is_const_expr(f)
            }
            _ => false,
        }
    }

    fn call(
        &self,
        pos: Pos,
        name: &str,
        statics: &[i64],
        args: &mut [Expr],
        inst: &mut Option<Type>,
        hint: Option<&TypeExpr>,
    ) -> Result<TypeExpr, FrontendError> {
        if name == DELAY && self.stdlib && !self.prog.iter().any(|n| n.name == DELAY) {
            if statics.len() != 1 || statics[0] < 1 {
                return Err(mismatch(
                    pos,
                    "Delay takes one static argument d >= 1".into(),
                ));
            }
            if args.len() != 2 {
                return Err(mismatch(
                    pos,
                    format!("Delay expects 2 arguments, got {}", args.len()),
                ));
            }
            let (a, b) = args.split_at_mut(1);
            let t = self.unify2(&mut a[0], &mut b[0], hint)?;
            *inst = t.base();
            return Ok(t);
        }
        let Some(callee) = self.prog.iter().find(|n| n.name == name) else {
            return Err(FrontendError::UnknownNode {
                pos,
                name: name.to_string(),
            });
        };
        if !statics.is_empty() {
            return Err(mismatch(
                pos,
                format!("`{}` takes no static arguments", name),
            ));
        }
        if callee.outputs.len() != 1 {
            return Err(mismatch(
                pos,
                format!(
                    "`{}` has {} outputs; calls need exactly one",
                    name,
                    callee.outputs.len()
                ),
            ));
        }
        if args.len() != callee.inputs.len() {
            return Err(mismatch(
                pos,
                format!(
                    "`{}` expects {} arguments, got {}",
                    name,
                    callee.inputs.len(),
                    args.len()
                ),
            ));
        }
        let poly = |t: &TypeExpr| matches!(t, TypeExpr::Poly(_));
        // Resolve 'a: non-literal arguments first, then the expected result type, then int.
        let mut bind: Option<TypeExpr> = None;
        for (arg, p) in args.iter_mut().zip(&callee.inputs) {
            if poly(&p.ty) && !literalish(arg) {
                let t = self.infer(arg, None)?;
                match &bind {
                    None => bind = Some(t),
                    Some(b) if *b == t => {}
                    Some(b) => {
                        return Err(mismatch(arg.pos, format!("expected {}, found {}", b, t)))
                    }
                }
            }
        }
        if bind.is_none() && poly(&callee.outputs[0].ty) {
            bind = hint.cloned();
        }
        let any_poly = callee
            .inputs
            .iter()
            .chain(&callee.outputs)
            .chain(&callee.locals)
            .any(|p| poly(&p.ty));
        let bind = bind.unwrap_or(INT);
        let subst = |t: &TypeExpr| if poly(t) { bind.clone() } else { t.clone() };
        for (arg, p) in args.iter_mut().zip(&callee.inputs) {
            if p.is_const && !self.is_const_expr(arg) {
                return Err(FrontendError::NotConst {
                    pos: arg.pos,
                    param: p.name.clone(),
                });
            }
            self.check(arg, &subst(&p.ty))?;
        }
        *inst = if any_poly { bind.base() } else { None };
        Ok(subst(&callee.outputs[0].ty))
    }
}
