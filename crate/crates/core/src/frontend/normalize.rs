//! Normalization: every `pre` is applied to a variable. `pre e` for a
//! compound `e` becomes `pre v` with a fresh local `v = e`. Idempotent.

use std::collections::BTreeSet;

use super::ast::*;
use super::typecheck::TypedProgram;

pub fn normalize(mut prog: TypedProgram) -> TypedProgram {
    for i in 0..prog.nodes.len() {
        let decl = normalize_node(&prog, &prog.nodes[i]);
        prog.nodes[i] = decl;
    }
    prog
}

pub fn normalize_node(prog: &TypedProgram, decl: &NodeDecl) -> NodeDecl {
    let mut used: BTreeSet<String> = decl
        .inputs
        .iter()
        .chain(&decl.outputs)
        .chain(&decl.locals)
        .map(|p| p.name.clone())
        .collect();
    let mut out = decl.clone();
    let mut fresh_eqs = Vec::new();
    let mut counter = 0usize;
    for eq in &mut out.equations {
        lift(
            prog,
            decl,
            &mut eq.rhs,
            &mut used,
            &mut counter,
            &mut fresh_eqs,
            &mut out.locals,
        );
    }
    out.equations.extend(fresh_eqs);
    out
}

fn lift(
    prog: &TypedProgram,
    decl: &NodeDecl,
    e: &mut Expr,
    used: &mut BTreeSet<String>,
    counter: &mut usize,
    eqs: &mut Vec<Equation>,
    locals: &mut Vec<Param>,
) {
    match &mut e.kind {
        ExprKind::Lit(_) | ExprKind::Var(_) => {}
        ExprKind::Pre(a) => {
            lift(prog, decl, a, used, counter, eqs, locals);
            if !matches!(a.kind, ExprKind::Var(_)) {
                let ty = prog
                    .type_in(decl, a)
                    .expect("normalization runs on checked programs");
                let name = loop {
                    *counter += 1;
                    let n = format!("_n{}", counter);
                    if !used.contains(&n) {
                        break n;
                    }
                };
                used.insert(name.clone());
                locals.push(Param {
                    name: name.clone(),
                    ty,
                    is_const: false,
                });
                let pos = a.pos;
                let inner =
                    std::mem::replace(&mut **a, Expr::new(ExprKind::Var(name.clone()), pos));
                eqs.push(Equation {
                    lhs: name,
                    rhs: inner,
                    pos,
                });
            }
        }
        ExprKind::Unary(_, a) => lift(prog, decl, a, used, counter, eqs, locals),
        ExprKind::Binary(_, a, b) | ExprKind::Arrow(a, b) => {
            lift(prog, decl, a, used, counter, eqs, locals);
            lift(prog, decl, b, used, counter, eqs, locals);
        }
        ExprKind::Ite(c, t, f) => {
            lift(prog, decl, c, used, counter, eqs, locals);
            lift(prog, decl, t, used, counter, eqs, locals);
            lift(prog, decl, f, used, counter, eqs, locals);
        }
        ExprKind::Call { args, .. } => {
            for a in args {
                lift(prog, decl, a, used, counter, eqs, locals);
            }
        }
    }
}
