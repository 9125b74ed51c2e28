//! Each proof rule against exhaustive enumeration on random instances.

mod support;

use ctgen_core::smt::SolverConfig;
use support::rules::{self, ALL};

fn check(rule: &str, target: usize) {
    let (name, gen) = ALL.iter().find(|(n, _)| *n == rule).unwrap();
    let seed = support::seed(0x5eed);
    let st = rules::run(name, seed, target, &SolverConfig::from_env(), *gen);
    println!("{}", st);
    for v in &st.violations {
        println!("  {}", v);
    }
    assert!(st.violations.is_empty());
    assert!(
        st.effective >= target,
        "only {} effective instances",
        st.effective
    );
}

#[test]
fn ag_is_sound() {
    check("AG", 100);
}

#[test]
fn temp_is_sound() {
    check("Temp", 100);
}

#[test]
fn rt_is_sound() {
    check("RT", 100);
}

#[test]
fn cons_is_sound() {
    check("Cons", 100);
}

#[test]
fn ip_is_sound() {
    check("IP", 100);
}
