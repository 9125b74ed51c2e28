//! Tokenizer shared by `.lus` programs, proof scripts, properties and node expressions.

use std::fmt;

use super::FrontendError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Backquoted raw name, e.g. `` `pre(F#1.x)` ``.
    Quoted(String),
    Int(String),
    Real(String),
    Str(String),
    TypeVar(String),
    Kw(&'static str),
    Sym(&'static str),
    Prime,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{}`", s),
            Tok::Quoted(s) => write!(f, "`{}`", s),
            Tok::Int(s) | Tok::Real(s) => write!(f, "number `{}`", s),
            Tok::Str(s) => write!(f, "string \"{}\"", s),
            Tok::TypeVar(s) => write!(f, "type variable '{}", s),
            Tok::Kw(k) => write!(f, "`{}`", k),
            Tok::Sym(s) => write!(f, "`{}`", s),
            Tok::Prime => write!(f, "`'`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "node", "returns", "var", "let", "tel", "const", "include", "if", "then", "else", "and", "or",
    "xor", "not", "pre", "div", "mod", "true", "false", "bool", "int", "real",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

// Longest first.
const SYMBOLS: &[&str] = &[
    ":=", "<>", "<=", ">=", "->", "=>", "<<", ">>", "/\\", "||", "|=", "(", ")", "[", "]", "{",
    "}", ",", ";", ":", "=", "<", ">", "+", "-", "*", "/", "@",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // Comments: `--`, `//` to end of line; `(* ... *)` block.
        if (c == '-' && chars.get(i + 1) == Some(&'-'))
            || (c == '/' && chars.get(i + 1) == Some(&'/'))
        {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '(' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(FrontendError::Lex {
                        pos,
                        msg: "unterminated comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&')') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let mut is_real = false;
            if i < chars.len()
                && chars[i] == '.'
                && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
            {
                is_real = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            let text: String = chars[start..i].iter().collect();
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(FrontendError::Lex {
                    pos,
                    msg: format!("malformed number `{}{}`", text, chars[i]),
                });
            }
            out.push(Token {
                tok: if is_real {
                    Tok::Real(text)
                } else {
                    Tok::Int(text)
                },
                pos,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                bump!();
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(FrontendError::Lex {
                    pos,
                    msg: "unterminated string".into(),
                });
            }
            let s: String = chars[start..i].iter().collect();
            bump!();
            out.push(Token {
                tok: Tok::Str(s),
                pos,
            });
            continue;
        }
        if c == '`' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i] != '`' && chars[i] != '\n' {
                bump!();
            }
            if i >= chars.len() || chars[i] != '`' {
                return Err(FrontendError::Lex {
                    pos,
                    msg: "unterminated quoted name".into(),
                });
            }
            let s: String = chars[start..i].iter().collect();
            bump!();
            if s.is_empty() {
                return Err(FrontendError::Lex {
                    pos,
                    msg: "empty quoted name".into(),
                });
            }
            out.push(Token {
                tok: Tok::Quoted(s),
                pos,
            });
            continue;
        }
        if c == '\'' {
            let glued = i > 0 && {
                let p = chars[i - 1];
                p.is_ascii_alphanumeric() || p == '_' || p == ')' || p == '`' || p == '\''
            };
            if glued {
                bump!();
                out.push(Token {
                    tok: Tok::Prime,
                    pos,
                });
                continue;
            }
            bump!();
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            if start == i {
                return Err(FrontendError::Lex {
                    pos,
                    msg: "stray `'`".into(),
                });
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::TypeVar(s),
                pos,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                for _ in 0..sym.len() {
                    bump!();
                }
                out.push(Token {
                    tok: Tok::Sym(sym),
                    pos,
                });
            }
            None => {
                return Err(FrontendError::Lex {
                    pos,
                    msg: format!("unexpected character `{}`", c),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
