//! Multipliers, fluxes by homotopy, and the catalog check.

use hypsym::claws::{
    flux_residual, homotopy_flux, multiplier_determining_system, multiplier_residual,
    verify_claw_catalog, MultiplierAnsatz,
};
use hypsym::detsys::FSpec;
use hypsym::symkernel::parse;

fn main() {
    let f = FSpec::opaque_u();
    println!("multiplier system for Q(x, y, u, u_x):");
    for e in multiplier_determining_system(&f, MultiplierAnsatz::Ux).unwrap() {
        println!("  [{}] {} = 0", e.monomial, e.equation);
    }

    let liouville = FSpec::parse("exp(u)").unwrap();
    let q = parse("func p(x); p_x + p*u_x").unwrap();
    println!("E_u(Q (u_xy - e^u)) = {}", multiplier_residual(&q, &liouville));
    let theta = homotopy_flux(&q, &liouville, true).unwrap();
    println!("flux: {}", theta.to_json());
    println!("D_x Phi + D_y Psi - Q (u_xy - e^u) = {}", flux_residual(&theta, &q, &liouville).canon());

    let r = verify_claw_catalog().unwrap();
    for e in &r.entries {
        println!("{:<11} {:<14} {:?}", e.table, e.label, e.status);
    }
}
