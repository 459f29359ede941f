//! Verify every class-table symmetry, and check one candidate by hand.

use hypsym::classify::verify_class_table;
use hypsym::detsys::{symmetry_residual, FSpec};
use hypsym::jetcalc::PointVectorField;
use hypsym::symkernel::parse;

fn main() {
    let r = verify_class_table("all", None).unwrap();
    for e in &r.entries {
        println!("{:<7} {:<16} {:?} {:.1} ms", e.table, e.label, e.status, e.millis);
    }
    println!("{}/{} ok", r.passed(), r.entries.len());

    // x d_x - d_u leaves u_xy = e^u invariant, x d_x - 2 d_u does not
    let f = FSpec::parse("exp(u)").unwrap();
    let v = PointVectorField::new(parse("x").unwrap(), parse("0").unwrap(), parse("-1").unwrap()).unwrap();
    println!("x d_x - d_u: {}", symmetry_residual(&f, &v).unwrap());
    let w = PointVectorField::new(parse("x").unwrap(), parse("0").unwrap(), parse("-2").unwrap()).unwrap();
    println!("x d_x - 2 d_u: {}", symmetry_residual(&f, &w).unwrap());
}
