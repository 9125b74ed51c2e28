//! Canonical printer for the surface syntax. `parse(print(p)) == p`.

use std::fmt::Write;

use num::Signed;

use crate::ir::{rational_to_decimal, UnOp, Value, PREC_ARROW, PREC_ATOM, PREC_ITE, PREC_UNARY};

use super::ast::*;

pub fn print_program(p: &SourceProgram) -> String {
    let mut out = String::new();
    for inc in &p.includes {
        writeln!(out, "include \"{}\";", inc.path).unwrap();
    }
    for (i, n) in p.nodes.iter().enumerate() {
        if i > 0 || !p.includes.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_node(n));
    }
    out
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| {
            format!(
                "{}{}: {}",
                if p.is_const { "const " } else { "" },
                p.name,
                p.ty
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn print_node(n: &NodeDecl) -> String {
    let mut out = format!(
        "node {} ({}) returns ({})\n",
        n.name,
        params(&n.inputs),
        params(&n.outputs)
    );
    if !n.locals.is_empty() {
        out.push_str("var\n");
        for l in &n.locals {
            writeln!(out, "  {}: {};", l.name, l.ty).unwrap();
        }
    }
    out.push_str("let\n");
    for eq in &n.equations {
        writeln!(out, "  {} = {};", eq.lhs, print_expr(&eq.rhs)).unwrap();
    }
    out.push_str("tel\n");
    out
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    fmt_prec(e, &mut s, 0);
    s
}

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Lit(_) | ExprKind::Var(_) | ExprKind::Call { .. } => PREC_ATOM,
        ExprKind::Unary(..) | ExprKind::Pre(_) => PREC_UNARY,
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Ite(..) => PREC_ITE,
        ExprKind::Arrow(..) => PREC_ARROW,
    }
}

fn lit(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) if i.is_negative() => format!("(- {})", -i),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => {
            let body = rational_to_decimal(&r.abs())
                .unwrap_or_else(|| format!("({}.0 / {}.0)", r.numer().abs(), r.denom()));
            if r.is_negative() {
                format!("(- {})", body)
            } else {
                body
            }
        }
    }
}

fn fmt_prec(e: &Expr, out: &mut String, min: u8) {
    let p = precedence(e);
    // `if` extends as far right as possible, so it is parenthesized whenever
    // it is not in a top-level position.
    if p < min || (p == PREC_ITE && min > 0) {
        out.push('(');
        fmt_prec(e, out, 0);
        out.push(')');
        return;
    }
    match &e.kind {
        ExprKind::Lit(v) => out.push_str(&lit(v)),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Unary(UnOp::Not, a) => {
            out.push_str("not ");
            fmt_prec(a, out, PREC_UNARY);
        }
        ExprKind::Unary(UnOp::Neg, a) => {
            out.push_str("- ");
            fmt_prec(a, out, PREC_UNARY);
        }
        ExprKind::Pre(a) => {
            out.push_str("pre ");
            fmt_prec(a, out, PREC_UNARY);
        }
        ExprKind::Binary(op, a, b) => {
            let p = op.precedence();
            let (lmin, rmin) = if op.is_right_assoc() {
                (p + 1, p)
            } else {
                (p, p + 1)
            };
            fmt_prec(a, out, lmin);
            write!(out, " {} ", op.symbol()).unwrap();
            fmt_prec(b, out, rmin);
        }
        ExprKind::Arrow(a, b) => {
            fmt_prec(a, out, PREC_ARROW + 1);
            out.push_str(" -> ");
            fmt_prec(b, out, PREC_ARROW);
        }
        ExprKind::Ite(c, t, f) => {
            out.push_str("if ");
            fmt_prec(c, out, 0);
            out.push_str(" then ");
            fmt_prec(t, out, 0);
            out.push_str(" else ");
            fmt_prec(f, out, 0);
        }
        ExprKind::Call {
            name,
            statics,
            args,
            ..
        } => {
            out.push_str(name);
            if !statics.is_empty() {
                let s: Vec<String> = statics.iter().map(|s| s.to_string()).collect();
                write!(out, "<<{}>>", s.join(", ")).unwrap();
            }
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                fmt_prec(a, out, 0);
            }
            out.push(')');
        }
    }
}
