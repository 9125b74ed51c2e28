//! Property tests over parsing, templates, monitors, composition and traces.

mod support;

use ctgen_core::algebra::{Library, NodeExpr};
use ctgen_core::frontend::pretty::{print_expr, print_program};
use ctgen_core::frontend::script::parse_node_expr;
use ctgen_core::frontend::{load_file, load_program, parse_expr, parse_program};
use ctgen_core::ir::{Expr, Type, Valuation, Value, Var};
use ctgen_core::properties::{observer, SafetyProperty};
use ctgen_core::semantics::{elaborate_node, simulate, Trace};
use ctgen_core::templates::reference_value;
use proptest::prelude::*;

fn lustre_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-20i64..20).prop_map(|i| i.to_string()),
        Just("true".to_string()),
        Just("1.5".to_string()),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (
                inner.clone(),
                inner.clone(),
                prop::sample::select(vec!["+", "-", "*", "and", "or", "=", "<", "->", "xor"])
            )
                .prop_map(|(a, b, op)| format!("({} {} {})", a, op, b)),
            inner.clone().prop_map(|a| format!("(pre {})", a)),
            inner.clone().prop_map(|a| format!("(not {})", a)),
            inner.clone().prop_map(|a| format!("(- {})", a)),
            (inner.clone(), inner.clone(), inner)
                .prop_map(|(c, t, e)| format!("(if {} then {} else {})", c, t, e)),
        ]
    })
}

fn bool_property() -> impl Strategy<Value = SafetyProperty> {
    let pred = prop::sample::select(vec!["a", "b", "a and b", "a or not b", "a xor b", "not a"]);
    let atom = prop_oneof![
        (pred.clone(), 0u64..6).prop_map(|(p, t)| SafetyProperty::At(parse_pred(p), t)),
        pred.prop_map(|p| SafetyProperty::Always(parse_pred(p))),
    ];
    prop::collection::vec(atom, 1..4).prop_map(|v| SafetyProperty::and_all(v).unwrap())
}

fn parse_pred(s: &str) -> Expr {
    ctgen_core::frontend::script::parse_pred(s).unwrap()
}

fn bool_rows(bits: &[(bool, bool)]) -> Vec<Valuation> {
    bits.iter()
        .map(|(a, b)| {
            [
                ("a".to_string(), Value::Bool(*a)),
                ("b".to_string(), Value::Bool(*b)),
            ]
            .into_iter()
            .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expressions_print_and_reparse(text in lustre_expr()) {
        let once = print_expr(&parse_expr(&text).unwrap());
        let twice = print_expr(&parse_expr(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn templates_follow_their_closed_form(t in 2i64..6, p in 0i64..8, s in 1i64..10, v1 in -5i64..5, v2 in -5i64..5) {
        let lib = Library::new(load_program("", None).unwrap());
        let cases = [
            ("Constant", vec![v1]),
            ("Step", vec![s, v1, v2]),
            ("Square", vec![t, p, v1, v2]),
        ];
        for (name, args) in cases {
            let text = format!("{}({})", name, args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "));
            let node = lib.eval(&parse_node_expr(&text).unwrap()).unwrap();
            let trace = simulate(&node, &vec![Valuation::new(); 30]).unwrap();
            for (c, v) in trace.column("Out").iter().enumerate() {
                prop_assert_eq!(v, &Value::int(reference_value(name, &args, c as i64).unwrap()), "{} at {}", text, c);
            }
        }
    }

    #[test]
    fn monitors_match_reference_semantics(phi in bool_property(), bits in prop::collection::vec(any::<(bool, bool)>(), 0..9)) {
        let mon = observer(&phi, &|_| Some(Type::Bool), "ok", "m.").unwrap();
        let rows = bool_rows(&bits);
        let ins: Vec<Valuation> = rows
            .iter()
            .map(|r| r.iter().filter(|(k, _)| mon.is_input(k)).map(|(k, v)| (k.clone(), v.clone())).collect())
            .collect();
        let trace = simulate(&mon, &ins).unwrap();
        for (t, row) in rows.iter().enumerate() {
            prop_assert_eq!(trace.outputs[t]["ok"].as_bool(), phi.holds_at(t as u64, row));
        }
        let all = trace.column("ok").iter().all(|v| *v == Value::Bool(true));
        prop_assert_eq!(Some(all), phi.holds_on(&rows));
    }

    #[test]
    fn parallel_composition_is_associative_and_commutative(
        perm in Just(vec!["A", "B", "obs(x @ 1)", "obs(y @ 2 /\\ x @ 0)"]).prop_shuffle(),
        split in 1usize..3,
    ) {
        let reference = parse_node_expr("A || B || obs(x @ 1) || obs(y @ 2 /\\ x @ 0)").unwrap();
        let left = format!("({}) || ({})", perm[..split].join(" || "), perm[split..].join(" || "));
        let e = parse_node_expr(&left).unwrap();
        let mut got = e.leaf_keys();
        let mut want = reference.leaf_keys();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
        prop_assert_eq!(e.canon(), reference.canon());
        let split_obs = NodeExpr::par_all(e.leaves()).unwrap();
        prop_assert_eq!(split_obs.leaf_keys(), e.leaf_keys());
    }

    #[test]
    fn simulation_is_deterministic_and_prefix_closed(xs in prop::collection::vec(-50i64..50, 1..12), cut in 0usize..12) {
        let prog = load_file(&support::corpus("small.lus")).unwrap();
        for name in ["Acc", "MaxSoFar", "Diff", "Window"] {
            let n = elaborate_node(&prog, name).unwrap();
            let ins: Vec<Valuation> = xs.iter().map(|x| [("x".to_string(), Value::int(*x))].into_iter().collect()).collect();
            let a = simulate(&n, &ins).unwrap();
            let b = simulate(&n, &ins).unwrap();
            prop_assert_eq!(&a, &b);
            let k = cut.min(ins.len());
            prop_assert_eq!(simulate(&n, &ins[..k]).unwrap(), a.prefix(k));
        }
    }

    #[test]
    fn traces_round_trip_through_csv(rows in prop::collection::vec((any::<bool>(), -1000i64..1000, -999i64..999, 1i64..40), 0..8)) {
        let in_vars = vec![Var::new("b", Type::Bool), Var::new("i", Type::Int)];
        let out_vars = vec![Var::new("r", Type::Real)];
        let mut t = Trace::empty(in_vars.clone(), out_vars.clone());
        for (b, i, num, den) in rows {
            t.inputs.push([("b".to_string(), Value::Bool(b)), ("i".to_string(), Value::int(i))].into_iter().collect());
            t.outputs.push([("r".to_string(), Value::real(num, den))].into_iter().collect());
        }
        let back = Trace::from_csv(&t.to_csv(), &in_vars, &out_vars).unwrap();
        prop_assert_eq!(back.inputs, t.inputs);
        prop_assert_eq!(back.outputs, t.outputs);
    }
}

#[test]
fn corpus_programs_print_and_reparse() {
    for file in ["cnt.lus", "sys1.lus", "sys2.lus", "small.lus"] {
        let text = std::fs::read_to_string(support::corpus(file)).unwrap();
        let once = print_program(&parse_program(&text).unwrap());
        let twice = print_program(&parse_program(&once).unwrap());
        assert_eq!(once, twice, "{}", file);
    }
}
