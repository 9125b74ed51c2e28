//! Random instances of each proof rule over tiny boolean nodes.
//!
//! Every instance is built as a proof node with V premises and handed to
//! the rule checker. When the checker accepts and every premise holds by
//! enumeration, the conclusion must hold by enumeration too. Generators
//! mostly build well-formed instances and sometimes perturb them, so both
//! acceptance and rejection paths are exercised.

use std::fmt;

use ctgen_core::algebra::{Library, NodeExpr};
use ctgen_core::frontend::script::parse_node_expr;
use ctgen_core::frontend::Pos;
use ctgen_core::ir::{BinOp, Expr, Valuation};
use ctgen_core::proof::{check_rule, Judgment, ProofNode, Rule, StatePred};
use ctgen_core::properties::SafetyProperty;
use ctgen_core::smt::SolverConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dnf, library, prime_states, sys_of, Comp, Sys};

/// Stream length of every enumeration: rounds 0 to 5.
pub const LEN: usize = 6;

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub rule: &'static str,
    pub attempts: usize,
    /// Accepted by the checker with every premise valid.
    pub effective: usize,
    pub rejected: usize,
    pub premise_failed: usize,
    /// Perturbed instances with valid premises and a false conclusion, all
    /// of which the checker must reject.
    pub unsound_rejected: usize,
    pub violations: Vec<String>,
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} effective instances, {} rejected by the checker ({} of them unsound by enumeration), \
             {} with a false premise, {} violations ({} attempts)",
            self.rule,
            self.effective,
            self.rejected,
            self.unsound_rejected,
            self.premise_failed,
            self.violations.len(),
            self.attempts
        )
    }
}

pub struct Instance {
    lib: Library,
    node: ProofNode,
    /// Whether the generator expects the checker to reject.
    perturbed: bool,
}

fn judgment(lhs: NodeExpr, rhs: NodeExpr) -> Judgment {
    Judgment { lhs, rhs }
}

fn leaf_node(goal: Judgment) -> ProofNode {
    let mut n = ProofNode::new(Pos::default());
    n.goal = Some(goal);
    n.rules = vec![Rule::V];
    n
}

fn rule_node(rules: Vec<Rule>, goal: Judgment, premises: Vec<Judgment>) -> ProofNode {
    let mut n = ProofNode::new(Pos::default());
    n.goal = Some(goal);
    n.rules = rules;
    n.premises = premises.into_iter().map(leaf_node).collect();
    n
}

fn named(n: &str) -> NodeExpr {
    NodeExpr::Named(n.into())
}

fn par(items: Vec<NodeExpr>) -> NodeExpr {
    NodeExpr::par_all(items).expect("nonempty composition")
}

fn obs(atoms: &[SafetyProperty]) -> Vec<NodeExpr> {
    atoms
        .iter()
        .map(|a| NodeExpr::Observer(a.clone()))
        .collect()
}

fn obs_one(atoms: &[SafetyProperty]) -> NodeExpr {
    par(obs(atoms))
}

/// Random boolean formula over `vars`.
fn formula(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        let v = Expr::var(*vars.choose(rng).unwrap());
        return if rng.gen_bool(0.3) { Expr::not(v) } else { v };
    }
    let a = formula(rng, vars, depth - 1);
    match rng.gen_range(0..4) {
        0 => Expr::not(a),
        1 => Expr::bin(BinOp::And, a, formula(rng, vars, depth - 1)),
        2 => Expr::bin(BinOp::Or, a, formula(rng, vars, depth - 1)),
        _ => Expr::bin(BinOp::Xor, a, formula(rng, vars, depth - 1)),
    }
}

fn atom(rng: &mut ChaCha8Rng, vars: &[&str], max_round: u64) -> SafetyProperty {
    SafetyProperty::At(formula(rng, vars, 2), rng.gen_range(0..=max_round))
}

/// A weaker (or equal) atom: a disjunction, or one conjunct.
fn weaken(rng: &mut ChaCha8Rng, a: &SafetyProperty, vars: &[&str]) -> SafetyProperty {
    let SafetyProperty::At(e, t) = a else {
        return a.clone();
    };
    match rng.gen_range(0..3) {
        0 => SafetyProperty::At(Expr::bin(BinOp::Or, e.clone(), formula(rng, vars, 1)), *t),
        1 => match e {
            Expr::Binary(BinOp::And, l, _) => SafetyProperty::At((**l).clone(), *t),
            _ => a.clone(),
        },
        _ => a.clone(),
    }
}

/// Body of a node: `out` as a formula over `ins` and up to two delayed
/// signals, written with constant-initialized `pre`.
fn body(rng: &mut ChaCha8Rng, ins: &[&str], out: &str, feedback: bool) -> String {
    let mut cands: Vec<String> = ins.iter().map(|s| s.to_string()).collect();
    if feedback {
        cands.push(out.to_string());
    }
    cands.shuffle(rng);
    let mut atoms: Vec<String> = ins.iter().map(|s| s.to_string()).collect();
    for v in cands.iter().take(rng.gen_range(0..=2)) {
        atoms.push(format!("({} -> pre {})", rng.gen_bool(0.5), v));
    }
    source_formula(rng, &atoms)
}

/// A random formula over source-level atoms such as `(false -> pre y)`.
fn source_formula(rng: &mut ChaCha8Rng, atoms: &[String]) -> String {
    let holes: Vec<String> = (0..atoms.len()).map(|i| format!("hole{}", i)).collect();
    let refs: Vec<&str> = holes.iter().map(String::as_str).collect();
    let mut text = formula(rng, &refs, 2).to_string();
    for (h, a) in holes.iter().zip(atoms) {
        text = text.replace(h.as_str(), a);
    }
    text
}

fn node_src(name: &str, ins: &[&str], out: &str, body: &str) -> String {
    format!(
        "node {} ({}: bool) returns ({}: bool)\nlet\n  {} = {};\ntel\n",
        name,
        ins.join(", "),
        out,
        out,
        body
    )
}

/// Atoms over `vars` that hold for `comps || assume` by enumeration, and
/// a few that do not.
fn guarantees(
    rng: &mut ChaCha8Rng,
    comps: &[Comp],
    assume: &[SafetyProperty],
    vars: &[&str],
    max_round: u64,
    count: std::ops::RangeInclusive<usize>,
) -> Vec<SafetyProperty> {
    let count = rng.gen_range(count);
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for _ in 0..12 {
        let a = atom(rng, vars, max_round);
        let s = Sys {
            comps: comps.to_vec(),
            assume: assume.to_vec(),
            guarantee: vec![a.clone()],
        };
        if s.holds(LEN) == Some(true) {
            good.push(a);
        } else {
            bad.push(a);
        }
    }
    let mut out = Vec::new();
    for _ in 0..count {
        let pool = if good.is_empty() || (rng.gen_bool(0.1) && !bad.is_empty()) {
            &bad
        } else {
            &good
        };
        if let Some(a) = pool.choose(rng) {
            out.push(a.clone());
        }
    }
    out.dedup();
    if out.is_empty() {
        out.push(SafetyProperty::At(Expr::bool(true), 0));
    }
    out
}

fn comp_of(lib: &Library, name: &str) -> Comp {
    let node = lib.eval(&named(name)).unwrap();
    let inits = vec![node.init_point().unwrap()];
    Comp::Node {
        node,
        inits,
        expose: false,
    }
}

/// Runs `target` effective instances (or gives up after many attempts).
pub fn run(
    rule: &'static str,
    seed: u64,
    target: usize,
    cfg: &SolverConfig,
    gen: fn(&mut ChaCha8Rng) -> Instance,
) -> Stats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = Stats {
        rule,
        ..Stats::default()
    };
    while st.effective < target && st.attempts < target * 30 {
        st.attempts += 1;
        let inst = gen(&mut rng);
        let goal = inst.node.goal.clone().unwrap();
        let tag = format!("attempt {} (seed {})", st.attempts, seed);
        let shape = check_rule(&inst.lib, cfg, &inst.node);
        let premises: Vec<Judgment> = inst
            .node
            .premises
            .iter()
            .map(|p| p.goal.clone().unwrap())
            .collect();
        let premises_ok = premises
            .iter()
            .all(|p| sys_of(&inst.lib, &p.lhs, &p.rhs).holds(LEN) == Some(true));
        let concl = sys_of(&inst.lib, &goal.lhs, &goal.rhs).holds(LEN);
        if inst.perturbed && premises_ok && concl != Some(true) {
            st.unsound_rejected += usize::from(shape.is_err());
        }
        match (shape, concl) {
            (Err(reason), _) => {
                if reason.contains("solver") {
                    st.violations
                        .push(format!("{}: solver failure: {}", tag, reason));
                }
                st.rejected += 1;
            }
            (Ok(()), None) => st
                .violations
                .push(format!("{}: accepted a cyclic composition: {}", tag, goal)),
            (Ok(()), Some(_)) if !premises_ok => st.premise_failed += 1,
            (Ok(()), Some(concl_ok)) => {
                st.effective += 1;
                if !concl_ok {
                    st.violations.push(format!(
                        "{}: premises {} hold but the conclusion {} fails",
                        tag,
                        premises
                            .iter()
                            .map(|p| format!("[{}]", p))
                            .collect::<Vec<_>>()
                            .join(" "),
                        goal
                    ));
                }
            }
        }
    }
    st
}

pub fn ip(rng: &mut ChaCha8Rng) -> Instance {
    let vars = ["a", "b"];
    let lhs: Vec<SafetyProperty> = (0..rng.gen_range(1..=3))
        .map(|_| atom(rng, &vars, 3))
        .collect();
    let weakened = rng.gen_bool(0.6);
    let rhs: Vec<SafetyProperty> = if weakened {
        let mut v = Vec::new();
        for a in &lhs {
            if rng.gen_bool(0.7) {
                v.push(weaken(rng, a, &vars));
            }
        }
        v
    } else {
        (0..rng.gen_range(1..=2))
            .map(|_| atom(rng, &vars, 3))
            .collect()
    };
    let rhs = if rhs.is_empty() {
        vec![weaken(rng, &lhs[0], &vars)]
    } else {
        rhs
    };
    let lib = library("");
    let node = rule_node(
        vec![Rule::IP],
        judgment(obs_one(&lhs), obs_one(&rhs)),
        vec![],
    );
    Instance {
        lib,
        node,
        perturbed: !weakened,
    }
}

pub fn cons(rng: &mut ChaCha8Rng) -> Instance {
    let two = rng.gen_bool(0.5);
    let mut src = node_src("N0", &["x"], "a", &body(rng, &["x"], "a", true));
    if two {
        src += &node_src("N1", &["a"], "b", &body(rng, &["a"], "b", true));
    }
    let lib = library(&src);
    let mut l = vec![named("N0")];
    let mut comps = vec![comp_of(&lib, "N0")];
    let mut outs = vec!["a"];
    if two {
        l.push(named("N1"));
        comps.push(comp_of(&lib, "N1"));
        outs.push("b");
    }
    let m1 = guarantees(rng, &comps, &[], &outs, 4, 1..=2);
    let weak = |rng: &mut ChaCha8Rng, m: &[SafetyProperty]| -> Vec<SafetyProperty> {
        if rng.gen_bool(0.8) {
            m.iter().map(|a| weaken(rng, a, &outs)).collect()
        } else {
            vec![atom(rng, &outs, 4)]
        }
    };
    let m2 = weak(rng, &m1);
    let lhs = par(l);
    let mut premises = vec![
        judgment(lhs.clone(), obs_one(&m1)),
        judgment(obs_one(&m1), obs_one(&m2)),
    ];
    let mut last = m2.clone();
    if rng.gen_bool(0.4) {
        let m3 = weak(rng, &m2);
        premises.push(judgment(obs_one(&m2), obs_one(&m3)));
        last = m3;
    }
    let mut perturbed = false;
    let goal_rhs = if rng.gen_bool(0.1) {
        perturbed = true;
        obs_one(&[atom(rng, &outs, 4)])
    } else {
        obs_one(&last)
    };
    let node = rule_node(vec![Rule::Cons], judgment(lhs, goal_rhs), premises);
    Instance {
        lib,
        node,
        perturbed,
    }
}

pub fn ag(rng: &mut ChaCha8Rng) -> Instance {
    // forward: N1 reads x and N2 reads a; backward: N1 reads b, N2 reads y;
    // cyclic: N1 reads b and N2 reads a in the same round.
    let topo = rng.gen_range(0..10);
    let (ins1, ins2): (Vec<&str>, Vec<&str>) = match topo {
        0..=4 => (vec!["x"], vec!["a"]),
        5..=8 => (vec!["x", "b"], vec!["y"]),
        _ => (vec!["b"], vec!["a"]),
    };
    let src = node_src("N1", &ins1, "a", &body(rng, &ins1, "a", true))
        + &node_src("N2", &ins2, "b", &body(rng, &ins2, "b", true));
    let lib = library(&src);
    let c1 = comp_of(&lib, "N1");
    let c2 = comp_of(&lib, "N2");
    let cyclic = topo == 9;
    let (na, nb) = if cyclic {
        (vec![atom(rng, &["a"], 4)], vec![atom(rng, &["b"], 4)])
    } else if topo <= 4 {
        let na = guarantees(rng, std::slice::from_ref(&c1), &[], &["a"], 4, 1..=2);
        let nb = guarantees(rng, std::slice::from_ref(&c2), &na, &["b"], 4, 1..=2);
        (na, nb)
    } else {
        let nb = guarantees(rng, std::slice::from_ref(&c2), &[], &["b"], 4, 1..=2);
        let na = guarantees(rng, std::slice::from_ref(&c1), &nb, &["a"], 4, 1..=2);
        (na, nb)
    };
    // Occasionally assume something unsatisfiable.
    let mut nb = nb;
    if rng.gen_bool(0.08) {
        let t = rng.gen_range(0..=3);
        nb.push(SafetyProperty::At(
            Expr::bin(BinOp::And, Expr::var("b"), Expr::not(Expr::var("b"))),
            t,
        ));
    }
    let p1 = judgment(par([vec![named("N1")], obs(&nb)].concat()), obs_one(&na));
    let p2 = judgment(par([vec![named("N2")], obs(&na)].concat()), obs_one(&nb));
    let mut perturbed = cyclic;
    let mut rhs = [obs(&na), obs(&nb)].concat();
    if rng.gen_bool(0.08) {
        perturbed = true;
        rhs.push(NodeExpr::Observer(atom(rng, &["a", "b"], 4)));
    }
    let goal = judgment(par(vec![named("N1"), named("N2")]), par(rhs));
    let node = rule_node(vec![Rule::AG], goal, vec![p1, p2]);
    Instance {
        lib,
        node,
        perturbed,
    }
}

pub fn rt(rng: &mut ChaCha8Rng) -> Instance {
    let s: u64 = rng.gen_range(1..=2);
    let r: u64 = rng.gen_range(2..=3);
    let max_t = 5 / r;
    let p = format!("({} -> pre g)", rng.gen_bool(0.5));
    let src = if rng.gen_bool(0.8) {
        let f = source_formula(rng, &[p.clone(), "true".into(), "false".into()]);
        node_src("G", &["En"], "g", &format!("if En then {} else {}", f, p))
    } else {
        node_src("G", &["En"], "g", &body(rng, &["En"], "g", true))
    };
    let lib = library(&src);
    let rt_at = |period: u64| parse_node_expr(&format!("RateTransition(u, {})", period)).unwrap();
    let assume: Vec<SafetyProperty> = (0..rng.gen_range(0..=2))
        .map(|_| atom(rng, &["u"], max_t))
        .collect();
    let comps = vec![
        Comp::Rt {
            input: "u".into(),
            output: "En".into(),
            period: s,
        },
        comp_of(&lib, "G"),
    ];
    let guar = guarantees(rng, &comps, &assume, &["g"], max_t, 1..=2);
    let premise = judgment(
        par([vec![rt_at(s), named("G")], obs(&assume)].concat()),
        obs_one(&guar),
    );
    let lift = |atoms: &[SafetyProperty]| -> Vec<SafetyProperty> {
        atoms.iter().map(|a| a.rescale(r)).collect()
    };
    let mut rhs = lift(&guar);
    let mut perturbed = false;
    if rng.gen_bool(0.15) {
        perturbed = true;
        let i = rng.gen_range(0..rhs.len());
        if let SafetyProperty::At(e, t) = &rhs[i] {
            let t = if *t == 0 || rng.gen_bool(0.5) {
                t + 1
            } else {
                t - 1
            };
            rhs[i] = SafetyProperty::At(e.clone(), t);
        }
    }
    let goal = judgment(
        par([vec![rt_at(r * s), named("G")], obs(&lift(&assume))].concat()),
        obs_one(&rhs),
    );
    let mut node = rule_node(vec![Rule::RT], goal, vec![premise]);
    node.r = Some(r);
    node.s = if rng.gen_bool(0.5) { Some(s) } else { None };
    Instance {
        lib,
        node,
        perturbed,
    }
}

pub fn temp(rng: &mut ChaCha8Rng) -> Instance {
    let src = node_src("T0", &["x"], "y", &body(rng, &["x"], "y", true));
    let lib = library(&src);
    let n = lib.eval(&named("T0")).unwrap();
    let j: u64 = rng.gen_range(0..=3);
    let k: u64 = rng.gen_range(0..=(4 - j));
    // States reachable after round j, plus random extra states.
    let reach = reachable_after(&n, j as usize);
    let names: Vec<String> = n.states.iter().map(|s| s.name.clone()).collect();
    let mut pts: Vec<Valuation> = super::bool_points(&names)
        .into_iter()
        .filter(|p| reach.contains(p) || rng.gen_bool(0.2))
        .collect();
    if rng.gen_bool(0.1) && pts.len() > 1 {
        pts.pop();
    }
    let e_s = dnf(&pts);
    let comps = vec![Comp::Node {
        node: n.clone(),
        inits: pts.clone(),
        expose: true,
    }];
    let mut e = guarantees(rng, &comps, &[], &["y"], k, 1..=1)[0].clone();
    if let SafetyProperty::At(x, _) = &e {
        e = SafetyProperty::At(x.clone(), k);
    }
    let SafetyProperty::At(ex, _) = &e else {
        unreachable!()
    };
    let mut perturbed = false;
    let mut round = j + k + 1;
    if rng.gen_bool(0.15) {
        perturbed = true;
        round = if rng.gen_bool(0.5) {
            round + 1
        } else {
            round - 1
        };
    }
    let t0 = Box::new(named("T0"));
    let p1 = judgment(
        NodeExpr::Combi(t0.clone(), None),
        NodeExpr::Observer(SafetyProperty::At(prime_states(&n, &e_s), j)),
    );
    let p2 = judgment(
        NodeExpr::Combi(t0, Some(e_s.clone())),
        NodeExpr::Observer(e.clone()),
    );
    let goal = judgment(
        named("T0"),
        NodeExpr::Observer(SafetyProperty::At(ex.clone(), round)),
    );
    let mut node = rule_node(vec![Rule::Temp], goal, vec![p1, p2]);
    node.j = Some(j);
    node.k = Some(k);
    node.state_pred = Some(StatePred::Given(e_s));
    Instance {
        lib,
        node,
        perturbed,
    }
}

/// States of `n` after the reaction at round `j`, over all inputs.
fn reachable_after(n: &ctgen_core::semantics::Node, j: usize) -> Vec<Valuation> {
    let mut out = Vec::new();
    for s in super::bool_streams(&n.inputs, j + 1) {
        let st = ctgen_core::semantics::record_state_at(n, &s, j).unwrap();
        if !out.contains(&st) {
            out.push(st);
        }
    }
    out
}

/// Draws one random instance of a rule.
pub type Generator = fn(&mut ChaCha8Rng) -> Instance;

pub const ALL: [(&str, Generator); 5] = [
    ("AG", ag),
    ("Temp", temp),
    ("RT", rt),
    ("Cons", cons),
    ("IP", ip),
];
