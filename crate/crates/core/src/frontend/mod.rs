//! Parsing, type checking and normalization of `.lus` programs, plus the
//! parsers for properties, node expressions and proof scripts.

pub mod ast;
pub mod lexer;
pub mod normalize;
pub mod parser;
pub mod pretty;
pub mod script;
pub mod typecheck;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ast::{NodeDecl, SourceProgram};
pub use lexer::Pos;
pub use parser::{parse_expr, parse_program};
pub use typecheck::{typecheck, TypedProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{pos}: lexical error: {msg}")]
    Lex { pos: Pos, msg: String },
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: duplicate node `{name}`")]
    DuplicateNode { pos: Pos, name: String },
    #[error("{pos}: unbound variable `{name}`")]
    Unbound { pos: Pos, name: String },
    #[error("{pos}: unknown node `{name}`")]
    UnknownNode { pos: Pos, name: String },
    #[error("{pos}: type error: {msg}")]
    TypeMismatch { pos: Pos, msg: String },
    #[error("{pos}: `{name}` is defined more than once")]
    MultiplyDefined { pos: Pos, name: String },
    #[error("{pos}: `{name}` is an input and cannot be defined")]
    DefinesInput { pos: Pos, name: String },
    #[error("{pos}: argument for const parameter `{param}` is not a constant")]
    NotConst { pos: Pos, param: String },
    #[error("{pos}: unknown proof rule `{name}`")]
    UnknownRule { pos: Pos, name: String },
    #[error("cannot include \"{path}\": {msg}")]
    Include { path: String, msg: String },
}

impl FrontendError {
    pub fn pos(&self) -> Option<Pos> {
        use FrontendError::*;
        match self {
            Lex { pos, .. }
            | Syntax { pos, .. }
            | DuplicateNode { pos, .. }
            | Unbound { pos, .. }
            | UnknownNode { pos, .. }
            | TypeMismatch { pos, .. }
            | MultiplyDefined { pos, .. }
            | DefinesInput { pos, .. }
            | NotConst { pos, .. }
            | UnknownRule { pos, .. } => Some(*pos),
            Include { .. } => None,
        }
    }
}

/// Name under which the embedded template library is included.
pub const STDLIB_NAME: &str = "stdlib.lus";

/// Parses `text`, splices in its includes (recursively, each file once) and
/// returns the combined program. `base` is the directory relative paths
/// resolve against. The embedded library is always available as `stdlib.lus`.
pub fn load_source(text: &str, base: Option<&Path>) -> Result<SourceProgram, FrontendError> {
    let mut seen = Vec::new();
    let mut out = SourceProgram::default();
    load_into(text, base, &mut seen, &mut out)?;
    Ok(out)
}

fn load_into(
    text: &str,
    base: Option<&Path>,
    seen: &mut Vec<String>,
    out: &mut SourceProgram,
) -> Result<(), FrontendError> {
    let prog = parse_program(text)?;
    for inc in &prog.includes {
        if seen.contains(&inc.path) {
            continue;
        }
        seen.push(inc.path.clone());
        out.includes.push(inc.clone());
        if inc.path == STDLIB_NAME {
            load_into(crate::templates::STDLIB_SOURCE, None, seen, out)?;
            continue;
        }
        let path: PathBuf = match base {
            Some(b) => b.join(&inc.path),
            None => PathBuf::from(&inc.path),
        };
        let sub = std::fs::read_to_string(&path).map_err(|e| FrontendError::Include {
            path: inc.path.clone(),
            msg: e.to_string(),
        })?;
        let sub_base = path.parent().map(Path::to_path_buf);
        load_into(&sub, sub_base.as_deref(), seen, out)?;
    }
    for n in prog.nodes {
        if out.node(&n.name).is_some() {
            return Err(FrontendError::DuplicateNode {
                pos: n.pos,
                name: n.name,
            });
        }
        out.nodes.push(n);
    }
    Ok(())
}

/// Full front-end pipeline: load, type check, normalize.
pub fn load_program(text: &str, base: Option<&Path>) -> Result<TypedProgram, FrontendError> {
    let src = load_source(text, base)?;
    let typed = typecheck(src)?;
    Ok(normalize::normalize(typed))
}

pub fn load_file(path: &Path) -> Result<TypedProgram, FrontendError> {
    let text = std::fs::read_to_string(path).map_err(|e| FrontendError::Include {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    load_program(&text, path.parent())
}
