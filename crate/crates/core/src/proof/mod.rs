//! Compositional proof trees: representation, rule checking and validation.

pub mod check;
pub mod tree;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algebra::Library;
use crate::frontend::{load_file, script::parse_script, FrontendError};

pub use check::{
    check_rule, default_bound, discharge_leaf, validate_proofs, validate_tree, Checker, NodeReport,
    Outcome, Report,
};
pub use tree::{Judgment, ProofNode, ProofScript, Rule, StatePred};

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Frontend {
        path: PathBuf,
        source: FrontendError,
    },
    #[error("`{0}` names no program; add `program \"file.lus\";`")]
    NoProgram(PathBuf),
}

/// Reads a proof script and the program it names, resolved relative to
/// the script, with the script's `let` definitions registered.
pub fn load_script(path: &Path) -> Result<(Library, ProofScript), ProofError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProofError::Io {
        path: path.into(),
        source,
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    load_script_str(&text, path, dir)
}

/// Like [`load_script`] for script text already in memory; `name` labels
/// errors and `dir` anchors the program path.
pub fn load_script_str(
    text: &str,
    name: &Path,
    dir: &Path,
) -> Result<(Library, ProofScript), ProofError> {
    let script = parse_script(text).map_err(|source| ProofError::Frontend {
        path: name.into(),
        source,
    })?;
    let rel = script
        .program
        .as_ref()
        .ok_or_else(|| ProofError::NoProgram(name.into()))?;
    let prog_path = dir.join(rel);
    let prog = load_file(&prog_path).map_err(|source| ProofError::Frontend {
        path: prog_path.clone(),
        source,
    })?;
    let mut lib = Library::new(prog);
    for (name, e) in &script.lets {
        lib.define(name, e.clone());
    }
    Ok((lib, script))
}
