//! Proof-script, node-expression and property parsers.
//!
//! ```text
//! script    := header* proof*
//! header    := 'program' STRING ';' | 'let' NAME '=' nexpr ';'
//! proof     := ('proof' | 'premise') '{' field* '}'
//! field     := 'goal' ':' nexpr '|=' nexpr ';'
//!            | 'rule' ':' RULE (',' RULE)* ';'
//!            | ('j' | 'k' | 'r' | 's' | 'bound') ':' INT ';'
//!            | 'state_pred' ':' (pred | 'simulate') ';'
//!            | 'premise' '{' field* '}'
//! nexpr     := postfix ('||' postfix)*
//! postfix   := atom ('[' subst (',' subst)* ']')*
//! subst     := NAME ':=' NAME | 'init' ':=' pred
//! atom      := '(' nexpr ')' | 'C' '(' nexpr ',' ('init' | pred) ')'
//!            | 'obs' '(' property ')' | template | NAME
//! template  := TEMPLATE ('<<' INT (',' INT)* '>>')? '(' targ (',' targ)* ')'
//! targ      := '_' | literal | NAME | template
//! property  := conj ('/\' conj)*
//! conj      := 'always' pred | pred '@' INT
//! ```
//!
//! Predicates are expressions over raw variable names: `pre x` names the
//! state `pre(x)`, a trailing `'` primes a name and backquotes admit any
//! name, as in `` `pre(GD_X.cnt)`' ``.

use crate::algebra::NodeExpr;
use crate::ir::{parse_rational, BinOp, Expr, UnOp, Value};
use crate::proof::tree::{Judgment, ProofNode, ProofScript, Rule, StatePred};
use crate::properties::SafetyProperty;
use crate::templates::{is_template, TemplateArg, TemplateInst};

use super::lexer::Tok;
use super::parser::Parser;
use super::FrontendError;

type R<T> = Result<T, FrontendError>;

fn done<T>(p: &Parser, v: T) -> R<T> {
    if p.at_eof() {
        Ok(v)
    } else {
        p.unexpected("end of input")
    }
}

pub fn parse_pred(text: &str) -> R<Expr> {
    let mut p = Parser::new(text)?;
    let e = pred(&mut p)?;
    done(&p, e)
}

pub fn parse_property(text: &str) -> R<SafetyProperty> {
    let mut p = Parser::new(text)?;
    let e = property(&mut p)?;
    done(&p, e)
}

pub fn parse_node_expr(text: &str) -> R<NodeExpr> {
    let mut p = Parser::new(text)?;
    let e = nexpr(&mut p)?;
    done(&p, e)
}

pub fn parse_judgment(text: &str) -> R<Judgment> {
    let mut p = Parser::new(text)?;
    let j = judgment(&mut p)?;
    done(&p, j)
}

/// A template instance such as `Square(_, _, -1, 1)`.
pub fn parse_template(text: &str) -> R<TemplateInst> {
    let mut p = Parser::new(text)?;
    let name = p.ident()?;
    let t = template(&mut p, name)?;
    done(&p, t)
}

pub fn parse_script(text: &str) -> R<ProofScript> {
    let mut p = Parser::new(text)?;
    let mut s = ProofScript::default();
    loop {
        if p.eat_word("program") {
            match p.advance() {
                Tok::Str(f) => s.program = Some(f),
                _ => return p.error("expected a file name string after `program`"),
            }
            p.expect_sym(";")?;
        } else if p.eat_kw("let") {
            let name = p.ident()?;
            p.expect_sym("=")?;
            let e = nexpr(&mut p)?;
            p.expect_sym(";")?;
            s.lets.push((name, e));
        } else {
            break;
        }
    }
    while !p.at_eof() {
        if !(p.eat_word("proof") || p.eat_word("premise")) {
            return p.unexpected("`proof`");
        }
        let b = block(&mut p)?;
        s.proofs.push(b);
    }
    Ok(s)
}

fn block(p: &mut Parser) -> R<ProofNode> {
    let mut n = ProofNode::new(p.pos());
    p.expect_sym("{")?;
    while !p.eat_sym("}") {
        let pos = p.pos();
        let field = match p.peek().clone() {
            Tok::Ident(f) => {
                p.advance();
                f
            }
            _ => return p.unexpected("a field name or `}`"),
        };
        if field == "premise" {
            n.premises.push(block(p)?);
            continue;
        }
        p.expect_sym(":")?;
        match field.as_str() {
            "goal" => n.goal = Some(judgment(p)?),
            "rule" => loop {
                let rpos = p.pos();
                let name = p.ident()?;
                let r = Rule::parse(&name).ok_or(FrontendError::UnknownRule { pos: rpos, name })?;
                n.rules.push(r);
                if !p.eat_sym(",") {
                    break;
                }
            },
            "j" => n.j = Some(nat(p)?),
            "k" => n.k = Some(nat(p)?),
            "r" => n.r = Some(nat(p)?),
            "s" => n.s = Some(nat(p)?),
            "bound" => n.bound = Some(nat(p)? as usize),
            "state_pred" => {
                n.state_pred = Some(if p.eat_word("simulate") {
                    StatePred::Simulate
                } else {
                    StatePred::Given(pred(p)?)
                })
            }
            _ => {
                return Err(FrontendError::Syntax {
                    pos,
                    msg: format!("unknown field `{}`", field),
                })
            }
        }
        p.expect_sym(";")?;
    }
    Ok(n)
}

fn nat(p: &mut Parser) -> R<u64> {
    let v = p.int_literal()?;
    if v < 0 {
        return p.error("expected a nonnegative integer");
    }
    Ok(v as u64)
}

fn judgment(p: &mut Parser) -> R<Judgment> {
    let lhs = nexpr(p)?;
    p.expect_sym("|=")?;
    let rhs = nexpr(p)?;
    Ok(Judgment { lhs, rhs })
}

pub(crate) fn nexpr(p: &mut Parser) -> R<NodeExpr> {
    let mut items = vec![postfix(p)?];
    while p.eat_sym("||") {
        items.push(postfix(p)?);
    }
    Ok(NodeExpr::par_all(items).expect("nonempty"))
}

fn postfix(p: &mut Parser) -> R<NodeExpr> {
    let mut e = atom(p)?;
    while p.eat_sym("[") {
        loop {
            if p.is_word("init") && matches!(p.peek_at(1), Tok::Sym(":=")) {
                p.advance();
                p.advance();
                e = NodeExpr::WithInit(Box::new(e), pred(p)?);
            } else {
                let x = name(p)?;
                p.expect_sym(":=")?;
                let y = name(p)?;
                e = NodeExpr::Rename(Box::new(e), x, y);
            }
            if !p.eat_sym(",") {
                break;
            }
        }
        p.expect_sym("]")?;
    }
    Ok(e)
}

fn name(p: &mut Parser) -> R<String> {
    let mut s = match p.peek().clone() {
        Tok::Quoted(s) | Tok::Ident(s) => s,
        _ => return p.unexpected("a variable name"),
    };
    p.advance();
    while matches!(p.peek(), Tok::Prime) {
        p.advance();
        s.push('\'');
    }
    Ok(s)
}

fn atom(p: &mut Parser) -> R<NodeExpr> {
    if p.eat_sym("(") {
        let e = nexpr(p)?;
        p.expect_sym(")")?;
        return Ok(e);
    }
    if p.is_word("C") && matches!(p.peek_at(1), Tok::Sym("(")) {
        p.advance();
        p.advance();
        let e = nexpr(p)?;
        p.expect_sym(",")?;
        let init = if p.is_word("init") && matches!(p.peek_at(1), Tok::Sym(")")) {
            p.advance();
            None
        } else {
            Some(pred(p)?)
        };
        p.expect_sym(")")?;
        return Ok(NodeExpr::Combi(Box::new(e), init));
    }
    if p.is_word("obs") && matches!(p.peek_at(1), Tok::Sym("(")) {
        p.advance();
        p.advance();
        let phi = property(p)?;
        p.expect_sym(")")?;
        return Ok(NodeExpr::Observer(phi));
    }
    match p.peek().clone() {
        Tok::Ident(n)
            if is_template(&n) && matches!(p.peek_at(1), Tok::Sym("(") | Tok::Sym("<<")) =>
        {
            p.advance();
            Ok(NodeExpr::Template(template(p, n)?))
        }
        Tok::Ident(_) | Tok::Quoted(_) => Ok(NodeExpr::Named(name(p)?)),
        _ => p.unexpected("a node expression"),
    }
}

fn template(p: &mut Parser, name: String) -> R<TemplateInst> {
    let mut statics = Vec::new();
    if p.eat_sym("<<") {
        statics.push(p.int_literal()?);
        while p.eat_sym(",") {
            statics.push(p.int_literal()?);
        }
        p.expect_sym(">>")?;
    }
    p.expect_sym("(")?;
    let mut args = Vec::new();
    if !p.is_sym(")") {
        loop {
            args.push(targ(p)?);
            if !p.eat_sym(",") {
                break;
            }
        }
    }
    p.expect_sym(")")?;
    Ok(TemplateInst {
        name,
        statics,
        args,
    })
}

fn targ(p: &mut Parser) -> R<TemplateArg> {
    match p.peek().clone() {
        Tok::Ident(s) if s == "_" => {
            p.advance();
            Ok(TemplateArg::Symbolic)
        }
        Tok::Ident(n)
            if is_template(&n) && matches!(p.peek_at(1), Tok::Sym("(") | Tok::Sym("<<")) =>
        {
            p.advance();
            Ok(TemplateArg::Nested(Box::new(template(p, n)?)))
        }
        Tok::Ident(_) | Tok::Quoted(_) => Ok(TemplateArg::Wire(name(p)?)),
        _ => match pred(p)? {
            Expr::Const(v) => Ok(TemplateArg::Value(v)),
            e => Err(FrontendError::Syntax {
                pos: p.pos(),
                msg: format!("template argument `{}` is not a literal", e),
            }),
        },
    }
}

pub(crate) fn property(p: &mut Parser) -> R<SafetyProperty> {
    let mut parts = vec![conj(p)?];
    while p.eat_sym("/\\") {
        parts.push(conj(p)?);
    }
    Ok(SafetyProperty::and_all(parts).expect("nonempty"))
}

fn conj(p: &mut Parser) -> R<SafetyProperty> {
    if p.eat_word("always") {
        return Ok(SafetyProperty::Always(pred(p)?));
    }
    // `(phi) @ s` and `(phi)` group whole properties.
    if p.is_sym("(") {
        let save = p.clone();
        p.advance();
        if let Ok(inner) = property(p) {
            if p.eat_sym(")") && (!p.is_sym("@") || !matches!(inner, SafetyProperty::At(..))) {
                if p.eat_sym("@") {
                    let s = nat(p)?;
                    return Ok(distribute_at(inner, s));
                }
                if !starts_binop(p) {
                    return Ok(inner);
                }
            }
        }
        *p = save;
    }
    let e = pred(p)?;
    if p.eat_sym("@") {
        let s = nat(p)?;
        return Ok(SafetyProperty::at(e, s));
    }
    p.unexpected("`@` after the predicate")
}

/// `(always e) @ s` reads as `e @ s`.
fn distribute_at(phi: SafetyProperty, s: u64) -> SafetyProperty {
    match phi {
        SafetyProperty::Always(e) => SafetyProperty::at(e, s),
        SafetyProperty::And(a, b) => {
            SafetyProperty::and(distribute_at(*a, s), distribute_at(*b, s))
        }
        at => at,
    }
}

fn starts_binop(p: &Parser) -> bool {
    binop(p).is_some()
}

fn binop(p: &Parser) -> Option<BinOp> {
    Some(match p.peek() {
        Tok::Kw("and") => BinOp::And,
        Tok::Kw("or") => BinOp::Or,
        Tok::Kw("xor") => BinOp::Xor,
        Tok::Kw("div") => BinOp::IntDiv,
        Tok::Kw("mod") => BinOp::Mod,
        Tok::Sym(s) => match *s {
            "=>" => BinOp::Implies,
            "=" => BinOp::Eq,
            "<>" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            _ => return None,
        },
        _ => return None,
    })
}

pub(crate) fn pred(p: &mut Parser) -> R<Expr> {
    pred_prec(p, 0)
}

fn pred_prec(p: &mut Parser, min: u8) -> R<Expr> {
    let mut lhs = unary(p)?;
    while let Some(op) = binop(p) {
        let prec = op.precedence();
        if prec < min {
            break;
        }
        p.advance();
        let rmin = if op.is_right_assoc() { prec } else { prec + 1 };
        let rhs = pred_prec(p, rmin)?;
        lhs = fold(Expr::bin(op, lhs, rhs));
    }
    Ok(lhs)
}

/// Folds literal negation and literal real division so printed constants
/// read back as constants.
fn fold(e: Expr) -> Expr {
    match &e {
        Expr::Unary(UnOp::Neg, a) => match &**a {
            Expr::Const(Value::Int(i)) => Expr::Const(Value::Int(-i)),
            Expr::Const(Value::Real(r)) => Expr::Const(Value::Real(-r)),
            _ => e,
        },
        Expr::Binary(BinOp::Div, a, b) => match (&**a, &**b) {
            (Expr::Const(Value::Real(x)), Expr::Const(Value::Real(y)))
                if !num::Zero::is_zero(y) =>
            {
                Expr::Const(Value::Real(x / y))
            }
            _ => e,
        },
        _ => e,
    }
}

fn unary(p: &mut Parser) -> R<Expr> {
    if p.eat_kw("not") {
        return Ok(Expr::not(unary(p)?));
    }
    if p.eat_sym("-") {
        return Ok(fold(Expr::Unary(UnOp::Neg, Box::new(unary(p)?))));
    }
    if p.eat_kw("pre") {
        let inner = name(p)?;
        let trimmed = inner.trim_end_matches('\'');
        let primes = &inner[trimmed.len()..];
        return Ok(Expr::var(format!("pre({}){}", trimmed, primes)));
    }
    if p.eat_kw("if") {
        let c = pred(p)?;
        p.expect_kw("then")?;
        let t = pred(p)?;
        p.expect_kw("else")?;
        let e = pred(p)?;
        return Ok(Expr::ite(c, t, e));
    }
    match p.peek().clone() {
        Tok::Kw("true") => {
            p.advance();
            Ok(Expr::bool(true))
        }
        Tok::Kw("false") => {
            p.advance();
            Ok(Expr::bool(false))
        }
        Tok::Int(s) => {
            p.advance();
            Ok(Expr::Const(Value::Int(
                s.parse().expect("lexer yields digits"),
            )))
        }
        Tok::Real(s) => {
            p.advance();
            Ok(Expr::Const(Value::Real(
                parse_rational(&s).expect("lexer yields decimals"),
            )))
        }
        Tok::Sym("(") => {
            p.advance();
            let e = pred(p)?;
            p.expect_sym(")")?;
            Ok(e)
        }
        Tok::Ident(_) | Tok::Quoted(_) => Ok(Expr::var(name(p)?)),
        _ => p.unexpected("expression"),
    }
}
