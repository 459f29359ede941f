//! Solve a Goursat problem on refined grids and measure conservation residuals.

use hypsym::claws::FluxVector;
use hypsym::numgrid::{refinement_study, GoursatProblem};
use hypsym::symkernel::parse;

fn main() {
    let p = GoursatProblem::new("exp(u)", "ln(2) - 2*ln(x+1)", "ln(2) - 2*ln(1+y)", [1.0, 2.0, 1.0, 2.0], 32)
        .unwrap()
        .with_exact("ln(2) - 2*ln(x+y)")
        .unwrap();
    let theta = FluxVector::new(parse("-exp(u)*x + u_y").unwrap(), parse("x*u_x^2/2").unwrap());
    let s = refinement_study(&p, Some(&theta), &[32, 64, 128]).unwrap();
    println!("{}", serde_json::to_string_pretty(&s.to_json()).unwrap());

    // dropping u_y from Phi leaves D_x u_y = e^u behind, so the residual stays O(1)
    let wrong = FluxVector::new(parse("-exp(u)*x").unwrap(), parse("x*u_x^2/2").unwrap());
    let s = refinement_study(&p, Some(&wrong), &[32, 64, 128]).unwrap();
    println!("wrong flux residuals: {:?}", s.residual_norms);
}
