//! Indeterminates of the classifying residual and their Wronskian conditions.

use hypsym::classify::{
    check_condition_solution, enumerate_case_conditions, match_printed, standard_indeterminates,
    ConditionFlag,
};
use hypsym::detsys::FMode;
use hypsym::symkernel::parse;

fn main() {
    let s = standard_indeterminates(FMode::OpaqueU).unwrap();
    println!("indeterminates in {}: {:?}", s.var, s.items.iter().map(|e| e.to_string()).collect::<Vec<_>>());
    for m in 2..=s.items.len() {
        for c in enumerate_case_conditions(&s, m).unwrap() {
            let live = !c.flags.iter().any(|f| matches!(f, ConditionFlag::Duplicate { .. }));
            if live {
                println!("m={m} {:?}: {} = 0", c.elements.iter().map(|e| e.to_string()).collect::<Vec<_>>(), c.ode);
            }
        }
    }

    let m3 = enumerate_case_conditions(&s, 3).unwrap();
    let f = parse("a_3*(u + a_1)^a_2").unwrap();
    println!("{f} solves the first m=3 condition: {:?}", check_condition_solution(&f, &m3[0], "u").unwrap());

    for mode in [FMode::OpaqueU, FMode::OpaqueUx] {
        for (p, hit) in match_printed(mode).unwrap() {
            let k = hit.map(|(_, k)| k.to_string()).unwrap_or_else(|| "none".into());
            println!("{:<12} factor {k}", p.label);
        }
    }
}
