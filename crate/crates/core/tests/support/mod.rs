//! Shared test support: independent oracles built on the simulator only.
//!
//! Compositions are interpreted round by round, wiring components by name,
//! and judgments are decided by enumerating every boolean input stream.
#![allow(dead_code)]

pub mod rules;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use ctgen_core::algebra::{primed, Library, NodeExpr};
use ctgen_core::frontend::load_program;
use ctgen_core::ir::{Expr, Type, Valuation, Value, Var};
use ctgen_core::properties::SafetyProperty;
use ctgen_core::semantics::{step, Node};
use ctgen_core::templates::TemplateArg;

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

/// Seed for randomized tests: `CTGEN_TEST_SEED` or a fixed default. The
/// value is printed so failures can be replayed.
pub fn seed(default: u64) -> u64 {
    let s = std::env::var("CTGEN_TEST_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(default);
    println!("seed = {} (set CTGEN_TEST_SEED to replay)", s);
    s
}

pub fn library(src: &str) -> Library {
    Library::new(load_program(src, None).unwrap_or_else(|e| panic!("{}\n{}", e, src)))
}

/// Every valuation of boolean `vars`.
pub fn bool_points(vars: &[String]) -> Vec<Valuation> {
    (0..1u64 << vars.len())
        .map(|bits| {
            vars.iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), Value::Bool(bits >> i & 1 == 1)))
                .collect()
        })
        .collect()
}

/// Every boolean input stream of length `len` over `inputs`.
pub fn bool_streams(inputs: &[Var], len: usize) -> Vec<Vec<Valuation>> {
    let names: Vec<String> = inputs.iter().map(|v| v.name.clone()).collect();
    let points = bool_points(&names);
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s: Vec<Valuation>| {
                points.iter().map(move |p| {
                    let mut s = s.clone();
                    s.push(p.clone());
                    s
                })
            })
            .collect();
    }
    out
}

/// One component of a composition under test.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Comp {
    /// A node started from each of `inits`; with `expose`, its states and
    /// their next values (primed) are visible as in `C(N, e)`.
    Node {
        node: Node,
        inits: Vec<Valuation>,
        expose: bool,
    },
    /// Enabled output: `input` at rounds that are multiples of `period`.
    Rt {
        input: String,
        output: String,
        period: u64,
    },
}

impl Comp {
    fn reads(&self) -> Vec<String> {
        match self {
            Comp::Node { node, .. } => node.inputs.iter().map(|v| v.name.clone()).collect(),
            Comp::Rt { input, .. } => vec![input.clone()],
        }
    }

    fn writes(&self) -> Vec<String> {
        match self {
            Comp::Node { node, expose, .. } => {
                let mut w: Vec<String> = node.outputs.iter().map(|v| v.name.clone()).collect();
                if *expose {
                    for s in &node.states {
                        w.push(s.name.clone());
                        w.push(primed(&s.name));
                    }
                }
                w
            }
            Comp::Rt { output, .. } => vec![output.clone()],
        }
    }
}

/// A judgment `comps || assume |= guarantee` over boolean streams.
#[derive(Clone, Debug, Default)]
pub struct Sys {
    pub comps: Vec<Comp>,
    pub assume: Vec<SafetyProperty>,
    pub guarantee: Vec<SafetyProperty>,
}

fn atom_holds(a: &SafetyProperty, round: usize, val: &Valuation) -> bool {
    let eval = |e: &Expr| match e.eval_in(val) {
        Ok(Value::Bool(b)) => b,
        other => panic!("oracle cannot evaluate `{}` on {:?}: {:?}", e, val, other),
    };
    match a {
        SafetyProperty::Always(e) => eval(e),
        SafetyProperty::At(e, t) => *t as usize != round || eval(e),
        SafetyProperty::And(x, y) => atom_holds(x, round, val) && atom_holds(y, round, val),
    }
}

impl Sys {
    /// Whether, for every input stream of length `len` and every round `r`,
    /// the assumptions holding on rounds `0..=r` imply the guarantees at `r`.
    /// `None` when the components cannot be ordered (same-round cycle).
    pub fn holds(&self, len: usize) -> Option<bool> {
        let produced: BTreeSet<String> = self.comps.iter().flat_map(Comp::writes).collect();
        let mut read: BTreeSet<String> = self.comps.iter().flat_map(Comp::reads).collect();
        for p in self.assume.iter().chain(&self.guarantee) {
            read.extend(p.free_vars());
        }
        let free: Vec<String> = read.difference(&produced).cloned().collect();
        let order = self.order(&free)?;
        let points = bool_points(&free);
        let mut starts: Vec<Vec<Valuation>> = vec![vec![]];
        for c in &self.comps {
            let inits = match c {
                Comp::Node { inits, .. } => inits.clone(),
                Comp::Rt { .. } => vec![Valuation::new()],
            };
            starts = starts
                .into_iter()
                .flat_map(|s| {
                    inits.iter().map(move |i| {
                        let mut s = s.clone();
                        s.push(i.clone());
                        s
                    })
                })
                .collect();
        }
        Some(starts.iter().all(|s| self.dfs(&order, &points, s, 0, len)))
    }

    fn order(&self, free: &[String]) -> Option<Vec<usize>> {
        let mut avail: BTreeSet<String> = free.iter().cloned().collect();
        let mut order = Vec::new();
        let mut left: Vec<usize> = (0..self.comps.len()).collect();
        while !left.is_empty() {
            let i = left
                .iter()
                .position(|&i| self.comps[i].reads().iter().all(|r| avail.contains(r)))?;
            let c = left.remove(i);
            avail.extend(self.comps[c].writes());
            order.push(c);
        }
        Some(order)
    }

    fn dfs(
        &self,
        order: &[usize],
        points: &[Valuation],
        states: &[Valuation],
        round: usize,
        len: usize,
    ) -> bool {
        if round == len {
            return true;
        }
        for p in points {
            let mut val = p.clone();
            let mut next = states.to_vec();
            for &i in order {
                match &self.comps[i] {
                    Comp::Node { node, expose, .. } => {
                        let ins: Valuation = node
                            .inputs
                            .iter()
                            .map(|v| (v.name.clone(), val[&v.name].clone()))
                            .collect();
                        let (o, n) = step(node, &states[i], &ins).expect("oracle step");
                        if *expose {
                            val.extend(states[i].iter().map(|(k, v)| (k.clone(), v.clone())));
                            val.extend(n.iter().map(|(k, v)| (primed(k), v.clone())));
                        }
                        val.extend(o);
                        next[i] = n;
                    }
                    Comp::Rt {
                        input,
                        output,
                        period,
                    } => {
                        let on = val[input] == Value::Bool(true)
                            && (round as u64).is_multiple_of(*period);
                        val.insert(output.clone(), Value::Bool(on));
                    }
                }
            }
            if !self.assume.iter().all(|a| atom_holds(a, round, &val)) {
                continue;
            }
            if !self.guarantee.iter().all(|g| atom_holds(g, round, &val)) {
                return false;
            }
            if !self.dfs(order, points, &next, round + 1, len) {
                return false;
            }
        }
        true
    }
}

/// Initial states of `C(n, e)`: all boolean states satisfying `e`, or the
/// node's own initial state.
pub fn combi_inits(n: &Node, e: Option<&Expr>) -> Vec<Valuation> {
    match e {
        None => vec![n.init_point().expect("deterministic node")],
        Some(e) => {
            assert!(
                n.states.iter().all(|s| s.ty == Type::Bool),
                "oracle enumerates boolean states only"
            );
            let names: Vec<String> = n.states.iter().map(|s| s.name.clone()).collect();
            bool_points(&names)
                .into_iter()
                .filter(|s| e.eval_in(s) == Ok(Value::Bool(true)))
                .collect()
        }
    }
}

/// The oracle's view of `lhs |= rhs`. Named leaves are evaluated one at a
/// time; composition, `C(N, e)` and rate transitions are interpreted here.
pub fn sys_of(lib: &Library, lhs: &NodeExpr, rhs: &NodeExpr) -> Sys {
    let mut sys = Sys::default();
    for leaf in lib.resolve(lhs).unwrap().leaves() {
        match leaf {
            NodeExpr::Observer(p) => sys.assume.extend(p.atoms()),
            NodeExpr::Named(_) => {
                let node = lib.eval(&leaf).unwrap();
                let inits = combi_inits(&node, None);
                sys.comps.push(Comp::Node {
                    node,
                    inits,
                    expose: false,
                });
            }
            NodeExpr::Combi(inner, e) => {
                let node = lib.eval(&inner).unwrap();
                let inits = combi_inits(&node, e.as_ref());
                sys.comps.push(Comp::Node {
                    node,
                    inits,
                    expose: true,
                });
            }
            NodeExpr::Template(t) if t.name == "RateTransition" => {
                let input = match &t.args[0] {
                    TemplateArg::Wire(w) => w.clone(),
                    a => panic!("unsupported rate-transition input {:?}", a),
                };
                let period = match &t.args[1] {
                    TemplateArg::Value(Value::Int(i)) => u64::try_from(i.clone()).unwrap(),
                    a => panic!("unsupported rate-transition period {:?}", a),
                };
                sys.comps.push(Comp::Rt {
                    input,
                    output: "En".into(),
                    period,
                });
            }
            l => panic!("the oracle does not interpret `{}`", l),
        }
    }
    for leaf in lib.resolve(rhs).unwrap().leaves() {
        match leaf {
            NodeExpr::Observer(p) => sys.guarantee.extend(p.atoms()),
            l => panic!(
                "the oracle supports observer guarantees only, found `{}`",
                l
            ),
        }
    }
    sys
}

/// Disjunction of point predicates, one per valuation.
pub fn dnf(points: &[Valuation]) -> Expr {
    points
        .iter()
        .map(|p| {
            Expr::and_all(p.iter().map(|(k, v)| {
                if *v == Value::Bool(true) {
                    Expr::var(k.clone())
                } else {
                    Expr::not(Expr::var(k.clone()))
                }
            }))
        })
        .reduce(|a, b| Expr::bin(ctgen_core::ir::BinOp::Or, a, b))
        .unwrap_or(Expr::bool(false))
}

/// Renames every state variable of `n` in `e` to its primed form.
pub fn prime_states(n: &Node, e: &Expr) -> Expr {
    let map: BTreeMap<String, String> = n
        .states
        .iter()
        .map(|s| (s.name.clone(), primed(&s.name)))
        .collect();
    e.rename(&map)
}
