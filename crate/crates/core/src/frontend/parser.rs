//! Recursive-descent parser for `.lus` programs and expression fragments.

use std::collections::HashMap;

use crate::ir::{parse_rational, BinOp, Type, UnOp, Value};

use super::ast::*;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::FrontendError;

#[derive(Clone)]
pub struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Parser, FrontendError> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].tok
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn error<T>(&self, msg: impl Into<String>) -> Result<T, FrontendError> {
        Err(FrontendError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    pub fn unexpected<T>(&self, wanted: &str) -> Result<T, FrontendError> {
        self.error(format!("expected {}, found {}", wanted, self.peek()))
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == s)
    }

    /// Contextual keyword: an identifier with the given spelling.
    pub fn is_word(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn eat_word(&mut self, s: &str) -> bool {
        if self.is_word(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", s))
        }
    }

    pub fn expect_kw(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", s))
        }
    }

    pub fn expect_word(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat_word(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", s))
        }
    }

    pub fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.unexpected("identifier"),
        }
    }

    pub fn int_literal(&mut self) -> Result<i64, FrontendError> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Int(s) => {
                self.advance();
                let v: i64 = s.parse().map_err(|_| FrontendError::Syntax {
                    pos: self.pos(),
                    msg: format!("integer `{}` out of range", s),
                })?;
                Ok(if neg { -v } else { v })
            }
            _ => self.unexpected("integer literal"),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn program(&mut self) -> Result<SourceProgram, FrontendError> {
        let mut prog = SourceProgram::default();
        let mut seen: HashMap<String, Pos> = HashMap::new();
        while self.eat_kw("include") {
            match self.advance() {
                Tok::Str(path) => prog.includes.push(Include { path }),
                _ => return self.error("expected a string after `include`"),
            }
            self.eat_sym(";");
        }
        while !self.at_eof() {
            let decl = self.node_decl()?;
            if seen.contains_key(&decl.name) {
                return Err(FrontendError::DuplicateNode {
                    pos: decl.pos,
                    name: decl.name,
                });
            }
            seen.insert(decl.name.clone(), decl.pos);
            prog.nodes.push(decl);
        }
        Ok(prog)
    }

    fn node_decl(&mut self) -> Result<NodeDecl, FrontendError> {
        let pos = self.pos();
        self.expect_kw("node")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let inputs = if self.is_sym(")") {
            vec![]
        } else {
            self.param_groups(true)?
        };
        self.expect_sym(")")?;
        self.expect_kw("returns")?;
        self.expect_sym("(")?;
        let outputs = self.param_groups(false)?;
        self.expect_sym(")")?;
        self.eat_sym(";");
        let mut locals = Vec::new();
        while self.eat_kw("var") {
            while matches!(self.peek(), Tok::Ident(_)) {
                locals.extend(self.param_group(false)?);
                self.expect_sym(";")?;
            }
        }
        self.expect_kw("let")?;
        let mut equations = Vec::new();
        while !self.is_kw("tel") {
            let pos = self.pos();
            let lhs = self.ident()?;
            self.expect_sym("=")?;
            let rhs = self.expr()?;
            self.expect_sym(";")?;
            equations.push(Equation { lhs, rhs, pos });
        }
        self.expect_kw("tel")?;
        self.eat_sym(";");
        Ok(NodeDecl {
            name,
            inputs,
            outputs,
            locals,
            equations,
            pos,
        })
    }

    fn param_groups(&mut self, allow_const: bool) -> Result<Vec<Param>, FrontendError> {
        let mut out = self.param_group(allow_const)?;
        while self.eat_sym(";") {
            if self.is_sym(")") {
                break;
            }
            out.extend(self.param_group(allow_const)?);
        }
        Ok(out)
    }

    fn param_group(&mut self, allow_const: bool) -> Result<Vec<Param>, FrontendError> {
        let is_const = if self.is_kw("const") {
            if !allow_const {
                return self.error("`const` is only allowed on inputs");
            }
            self.advance();
            true
        } else {
            false
        };
        let mut names = vec![self.ident()?];
        while self.eat_sym(",") {
            names.push(self.ident()?);
        }
        self.expect_sym(":")?;
        let ty = self.type_expr()?;
        Ok(names
            .into_iter()
            .map(|name| Param {
                name,
                ty: ty.clone(),
                is_const,
            })
            .collect())
    }

    fn type_expr(&mut self) -> Result<TypeExpr, FrontendError> {
        let t = match self.peek().clone() {
            Tok::Kw("bool") => TypeExpr::Base(Type::Bool),
            Tok::Kw("int") => TypeExpr::Base(Type::Int),
            Tok::Kw("real") => TypeExpr::Base(Type::Real),
            Tok::TypeVar(a) => TypeExpr::Poly(a),
            _ => return self.unexpected("type"),
        };
        self.advance();
        Ok(t)
    }

    pub fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.expr_prec(0)
    }

    fn binop(&self) -> Option<(BinOp, u8)> {
        let op = match self.peek() {
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
        };
        Some((op, op.precedence()))
    }

    pub fn expr_prec(&mut self, min: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        loop {
            let pos = self.pos();
            if self.is_sym("->") && crate::ir::PREC_ARROW >= min {
                self.advance();
                let rhs = self.expr_prec(crate::ir::PREC_ARROW)?;
                lhs = Expr::new(ExprKind::Arrow(Box::new(lhs), Box::new(rhs)), pos);
                continue;
            }
            let Some((op, p)) = self.binop() else { break };
            if p < min {
                break;
            }
            self.advance();
            let rmin = if op.is_right_assoc() { p } else { p + 1 };
            let rhs = self.expr_prec(rmin)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        let pos = self.pos();
        if self.eat_kw("not") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), pos));
        }
        if self.eat_sym("-") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), pos));
        }
        if self.eat_kw("pre") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Pre(Box::new(e)), pos));
        }
        if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            self.expect_kw("else")?;
            let e = self.expr()?;
            return Ok(Expr::new(
                ExprKind::Ite(Box::new(c), Box::new(t), Box::new(e)),
                pos,
            ));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Kw("true") => {
                self.advance();
                ExprKind::Lit(Value::Bool(true))
            }
            Tok::Kw("false") => {
                self.advance();
                ExprKind::Lit(Value::Bool(false))
            }
            Tok::Int(s) => {
                self.advance();
                ExprKind::Lit(Value::Int(s.parse().expect("lexer yields digits")))
            }
            Tok::Real(s) => {
                self.advance();
                ExprKind::Lit(Value::Real(
                    parse_rational(&s).expect("lexer yields decimals"),
                ))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                return Ok(e);
            }
            Tok::Ident(name) => {
                self.advance();
                let mut statics = Vec::new();
                if self.eat_sym("<<") {
                    statics.push(self.int_literal()?);
                    while self.eat_sym(",") {
                        statics.push(self.int_literal()?);
                    }
                    self.expect_sym(">>")?;
                    if !self.is_sym("(") {
                        return self.unexpected("`(` after static arguments");
                    }
                }
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.is_sym(")") {
                        args.push(self.expr()?);
                        while self.eat_sym(",") {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_sym(")")?;
                    ExprKind::Call {
                        name,
                        statics,
                        args,
                        inst: None,
                    }
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => return self.unexpected("expression"),
        };
        Ok(Expr::new(kind, pos))
    }
}

/// Parses program text without resolving includes.
pub fn parse_program(text: &str) -> Result<SourceProgram, FrontendError> {
    let mut p = Parser::new(text)?;
    p.program()
}

pub fn parse_expr(text: &str) -> Result<Expr, FrontendError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.unexpected("end of expression");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnt_listing() {
        let prog = parse_program(
            "node Cnt (En: bool) returns (C: int)\nlet C = if En then 1 + pre C else pre C; tel",
        )
        .unwrap();
        let n = &prog.nodes[0];
        assert_eq!(n.name, "Cnt");
        assert_eq!(
            n.inputs,
            vec![Param {
                name: "En".into(),
                ty: TypeExpr::Base(Type::Bool),
                is_const: false
            }]
        );
        assert_eq!(n.outputs.len(), 1);
        assert_eq!(n.equations.len(), 1);
    }

    #[test]
    fn empty_file() {
        assert_eq!(parse_program("  -- nothing\n").unwrap().nodes.len(), 0);
    }

    #[test]
    fn template_signature() {
        let p = parse_program("node Step (const s: int; v1, v2: 'a) returns (Out: 'a)\nvar c: int;\nlet c = 0 -> (pre c) + 1; Out = if c < s then v1 else v2; tel").unwrap();
        let n = &p.nodes[0];
        assert!(n.inputs[0].is_const);
        assert_eq!(n.inputs[2].ty, TypeExpr::Poly("a".into()));
        assert!(n.is_polymorphic());
    }

    #[test]
    fn duplicate_node() {
        let err = parse_program("node A(x:int) returns (y:int) let y = x; tel\nnode A(x:int) returns (y:int) let y = x; tel")
            .unwrap_err();
        assert!(matches!(err, FrontendError::DuplicateNode { ref name, .. } if name == "A"));
        assert!(err.to_string().starts_with("2:1"));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_program("node A(x:int) returns (y:int)\nlet y = x +; tel").unwrap_err();
        assert_eq!(
            err.to_string(),
            "2:12: syntax error: expected expression, found `;`"
        );
    }

    #[test]
    fn arrow_binds_weaker_than_or() {
        let e = parse_expr("En -> pre En_ or En").unwrap();
        assert!(matches!(e.kind, ExprKind::Arrow(..)));
    }

    #[test]
    fn static_call() {
        let e = parse_expr("Delay <<10>> (false, FOut)").unwrap();
        match e.kind {
            ExprKind::Call {
                name,
                statics,
                args,
                ..
            } => {
                assert_eq!(name, "Delay");
                assert_eq!(statics, vec![10]);
                assert_eq!(args.len(), 2);
            }
            k => panic!("{:?}", k),
        }
    }
}
