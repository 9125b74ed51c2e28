//! Surface syntax of the Lustre subset.

use crate::ir::{BinOp, Type, UnOp, Value};

use super::lexer::Pos;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SourceProgram {
    pub includes: Vec<Include>,
    pub nodes: Vec<NodeDecl>,
}

impl SourceProgram {
    pub fn node(&self, name: &str) -> Option<&NodeDecl> {
        self.nodes.iter().find(|n| n.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Include {
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeExpr {
    Base(Type),
    /// Polymorphic marker `'a`, only meaningful in template declarations.
    Poly(String),
}

impl TypeExpr {
    pub fn base(&self) -> Option<Type> {
        match self {
            TypeExpr::Base(t) => Some(*t),
            TypeExpr::Poly(_) => None,
        }
    }

    /// Resolves `'a` to `inst` when given.
    pub fn resolve(&self, inst: Option<Type>) -> Option<Type> {
        match self {
            TypeExpr::Base(t) => Some(*t),
            TypeExpr::Poly(_) => inst,
        }
    }
}

impl std::fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TypeExpr::Base(t) => write!(f, "{}", t),
            TypeExpr::Poly(a) => write!(f, "'{}", a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: TypeExpr,
    pub is_const: bool,
}

#[derive(Clone, Debug, Eq)]
pub struct NodeDecl {
    pub name: String,
    pub inputs: Vec<Param>,
    pub outputs: Vec<Param>,
    pub locals: Vec<Param>,
    pub equations: Vec<Equation>,
    pub pos: Pos,
}

impl PartialEq for NodeDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.locals == other.locals
            && self.equations == other.equations
    }
}

impl NodeDecl {
    pub fn is_polymorphic(&self) -> bool {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .chain(&self.locals)
            .any(|p| matches!(p.ty, TypeExpr::Poly(_)))
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .chain(&self.locals)
            .find(|p| p.name == name)
    }
}

#[derive(Clone, Debug, Eq)]
pub struct Equation {
    pub lhs: String,
    pub rhs: Expr,
    pub pos: Pos,
}

impl PartialEq for Equation {
    fn eq(&self, other: &Self) -> bool {
        self.lhs == other.lhs && self.rhs == other.rhs
    }
}

/// Expression with a source position. Equality ignores positions.
#[derive(Clone, Debug, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Pre(Box<Expr>),
    Arrow(Box<Expr>, Box<Expr>),
    Call {
        name: String,
        /// `<<k>>` static arguments (Delay only).
        statics: Vec<i64>,
        args: Vec<Expr>,
        /// Resolution of the callee's `'a`, filled in by the type checker.
        inst: Option<Type>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Expr {
        Expr { kind, pos }
    }

    pub fn synth(kind: ExprKind) -> Expr {
        Expr {
            kind,
            pos: Pos::default(),
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::synth(ExprKind::Var(name.into()))
    }

    /// Pre-order walk.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) => {}
            ExprKind::Unary(_, a) | ExprKind::Pre(a) => a.visit(f),
            ExprKind::Binary(_, a, b) | ExprKind::Arrow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            ExprKind::Ite(c, t, e) => {
                c.visit(f);
                t.visit(f);
                e.visit(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.visit(f)),
        }
    }
}
