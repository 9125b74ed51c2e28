//! Finite traces and their CSV form.

use serde::Serialize;

use crate::ir::{Valuation, Value, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub in_vars: Vec<Var>,
    pub out_vars: Vec<Var>,
    #[serde(serialize_with = "ser_rows")]
    pub inputs: Vec<Valuation>,
    #[serde(serialize_with = "ser_rows")]
    pub outputs: Vec<Valuation>,
    /// `s_{-1} .. s_{k-1}` when recorded, so one longer than the trace.
    #[serde(skip)]
    pub states: Option<Vec<Valuation>>,
}

fn ser_rows<S: serde::Serializer>(rows: &[Valuation], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for r in rows {
        let m: std::collections::BTreeMap<&str, String> =
            r.iter().map(|(k, v)| (k.as_str(), v.to_csv())).collect();
        seq.serialize_element(&m)?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CsvError {
    #[error("empty CSV")]
    Empty,
    #[error("header must start with `round`")]
    Header,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
}

impl Trace {
    pub fn empty(in_vars: Vec<Var>, out_vars: Vec<Var>) -> Trace {
        Trace {
            in_vars,
            out_vars,
            inputs: vec![],
            outputs: vec![],
            states: None,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn prefix(&self, j: usize) -> Trace {
        Trace {
            in_vars: self.in_vars.clone(),
            out_vars: self.out_vars.clone(),
            inputs: self.inputs[..j].to_vec(),
            outputs: self.outputs[..j].to_vec(),
            states: self.states.as_ref().map(|s| s[..=j].to_vec()),
        }
    }

    /// Value of `var` (input or output) at `round`.
    pub fn value(&self, round: usize, var: &str) -> Option<&Value> {
        self.outputs
            .get(round)?
            .get(var)
            .or_else(|| self.inputs[round].get(var))
    }

    /// Values of one variable over all rounds.
    pub fn column(&self, var: &str) -> Vec<Value> {
        (0..self.len())
            .filter_map(|r| self.value(r, var).cloned())
            .collect()
    }

    /// Header `round,<inputs>,<outputs>`.
    pub fn to_csv(&self) -> String {
        let vars: Vec<&Var> = self.in_vars.iter().chain(&self.out_vars).collect();
        let mut out = String::from("round");
        for v in &vars {
            out.push(',');
            out.push_str(&v.name);
        }
        out.push('\n');
        for r in 0..self.len() {
            out.push_str(&r.to_string());
            for v in &vars {
                out.push(',');
                if let Some(x) = self.value(r, &v.name) {
                    out.push_str(&x.to_csv());
                }
            }
            out.push('\n');
        }
        out
    }

    /// Reads a CSV written by [`Trace::to_csv`]. Columns are matched to the
    /// given signature by name; values are parsed at the declared type.
    pub fn from_csv(text: &str, in_vars: &[Var], out_vars: &[Var]) -> Result<Trace, CsvError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(CsvError::Empty)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"round") {
            return Err(CsvError::Header);
        }
        let mut kinds = Vec::new();
        for c in &cols[1..] {
            if let Some(v) = in_vars.iter().find(|v| v.name == *c) {
                kinds.push((true, v.clone()));
            } else if let Some(v) = out_vars.iter().find(|v| v.name == *c) {
                kinds.push((false, v.clone()));
            } else {
                return Err(CsvError::UnknownColumn(c.to_string()));
            }
        }
        let mut t = Trace::empty(in_vars.to_vec(), out_vars.to_vec());
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != cols.len() {
                return Err(CsvError::Row {
                    line: i + 2,
                    msg: format!("expected {} cells", cols.len()),
                });
            }
            let (mut iv, mut ov) = (Valuation::new(), Valuation::new());
            for ((is_in, var), cell) in kinds.iter().zip(&cells[1..]) {
                if cell.is_empty() {
                    continue;
                }
                let val = Value::parse(cell, var.ty).ok_or_else(|| CsvError::Row {
                    line: i + 2,
                    msg: format!("bad {} value `{}`", var.ty, cell),
                })?;
                if *is_in { &mut iv } else { &mut ov }.insert(var.name.clone(), val);
            }
            t.inputs.push(iv);
            t.outputs.push(ov);
        }
        Ok(t)
    }
}
