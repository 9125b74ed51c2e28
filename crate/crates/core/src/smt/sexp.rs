//! Minimal S-expression reader for solver responses.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    /// Symbol or numeral; `|quoted|` symbols are stored without the bars.
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => write!(f, "{}", a),
            Sexp::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Sexp::List(l) => {
                write!(f, "(")?;
                for (i, x) in l.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{}", x)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses every S-expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut i);
        if i >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut i)?);
    }
}

pub fn parse(text: &str) -> Result<Sexp, String> {
    let mut all = parse_all(text)?;
    match all.len() {
        1 => Ok(all.remove(0)),
        n => Err(format!("expected one S-expression, found {}", n)),
    }
}

fn skip_ws(c: &[char], i: &mut usize) {
    while *i < c.len() {
        if c[*i].is_whitespace() {
            *i += 1;
        } else if c[*i] == ';' {
            while *i < c.len() && c[*i] != '\n' {
                *i += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(c: &[char], i: &mut usize) -> Result<Sexp, String> {
    skip_ws(c, i);
    match c.get(*i) {
        None => Err("unexpected end of input".into()),
        Some('(') => {
            *i += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, i);
                match c.get(*i) {
                    None => return Err("unbalanced parentheses".into()),
                    Some(')') => {
                        *i += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_one(c, i)?),
                }
            }
        }
        Some(')') => Err("unexpected `)`".into()),
        Some('"') => {
            *i += 1;
            let mut s = String::new();
            loop {
                match c.get(*i) {
                    None => return Err("unterminated string".into()),
                    Some('"') if c.get(*i + 1) == Some(&'"') => {
                        s.push('"');
                        *i += 2;
                    }
                    Some('"') => {
                        *i += 1;
                        return Ok(Sexp::Str(s));
                    }
                    Some(ch) => {
                        s.push(*ch);
                        *i += 1;
                    }
                }
            }
        }
        Some('|') => {
            *i += 1;
            let start = *i;
            while *i < c.len() && c[*i] != '|' {
                *i += 1;
            }
            if *i >= c.len() {
                return Err("unterminated quoted symbol".into());
            }
            let s: String = c[start..*i].iter().collect();
            *i += 1;
            Ok(Sexp::Atom(s))
        }
        Some(_) => {
            let start = *i;
            while *i < c.len() && !c[*i].is_whitespace() && !matches!(c[*i], '(' | ')' | '"' | ';')
            {
                *i += 1;
            }
            Ok(Sexp::Atom(c[start..*i].iter().collect()))
        }
    }
}

/// Number of unclosed parentheses in `text`, ignoring strings and quoted symbols.
pub fn depth_delta(text: &str) -> i64 {
    let mut d = 0;
    let mut in_str = false;
    let mut in_bar = false;
    for ch in text.chars() {
        match ch {
            '"' if !in_bar => in_str = !in_str,
            '|' if !in_str => in_bar = !in_bar,
            '(' if !in_str && !in_bar => d += 1,
            ')' if !in_str && !in_bar => d -= 1,
            _ => {}
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_fragment() {
        let s = parse("((define-fun |pre(C)@-1| () Int (- 3)) (x \"a\"\"b\"))").unwrap();
        let l = s.list().unwrap();
        assert_eq!(l[0].list().unwrap()[1], Sexp::Atom("pre(C)@-1".into()));
        assert_eq!(l[1].list().unwrap()[1], Sexp::Str("a\"b".into()));
        assert_eq!(depth_delta("(a (|)(|"), 2);
    }
}
