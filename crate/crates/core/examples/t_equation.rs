//! The linear equation for T(y, z) and its point symmetries.

use hypsym::claws::{t_catalog, t_context, t_equation_residual, t_field_catalog, verify_t_symmetry};

fn main() {
    for (label, t) in t_catalog().unwrap() {
        println!("{label}: residual {}", t_equation_residual(&t).canon());
    }
    let t = t_context().parse("z + y").unwrap();
    println!("T = z + y: residual {}", t_equation_residual(&t).canon());
    for (label, field, expected) in t_field_catalog().unwrap() {
        println!("{label:<13} symmetry {} (expected {expected})", verify_t_symmetry(&field).unwrap());
    }
}
