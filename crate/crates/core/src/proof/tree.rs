//! Proof scripts: judgments, rule applications and their attachments.

use std::fmt;

use serde::Serialize;

use crate::algebra::NodeExpr;
use crate::frontend::Pos;
use crate::ir::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    AG,
    Temp,
    RT,
    Cons,
    IP,
    V,
}

impl Rule {
    pub fn parse(s: &str) -> Option<Rule> {
        Some(match s {
            "AG" => Rule::AG,
            "Temp" => Rule::Temp,
            "RT" => Rule::RT,
            "Cons" => Rule::Cons,
            "IP" => Rule::IP,
            "V" => Rule::V,
            _ => return None,
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `lhs |= rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judgment {
    pub lhs: NodeExpr,
    pub rhs: NodeExpr,
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |= {}", self.lhs, self.rhs)
    }
}

/// How Temp obtains its intermediate state predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatePred {
    Given(Expr),
    /// Simulate the goal's left-hand side and take the state after round `j`.
    Simulate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofNode {
    /// Omitted only for Temp premises, which are then derived.
    pub goal: Option<Judgment>,
    /// One rule, or a composite annotation such as `RT, AG`.
    pub rules: Vec<Rule>,
    pub j: Option<u64>,
    pub k: Option<u64>,
    pub r: Option<u64>,
    pub s: Option<u64>,
    pub bound: Option<usize>,
    pub state_pred: Option<StatePred>,
    pub premises: Vec<ProofNode>,
    pub pos: Pos,
}

impl ProofNode {
    pub fn new(pos: Pos) -> ProofNode {
        ProofNode {
            goal: None,
            rules: vec![],
            j: None,
            k: None,
            r: None,
            s: None,
            bound: None,
            state_pred: None,
            premises: vec![],
            pos,
        }
    }

    pub fn rule_label(&self) -> String {
        self.rules
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(ProofNode::size).sum::<usize>()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProofScript {
    /// Program file, relative to the script.
    pub program: Option<String>,
    pub lets: Vec<(String, NodeExpr)>,
    pub proofs: Vec<ProofNode>,
}
