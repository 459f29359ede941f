//! Parse, canonicalize, differentiate and integrate expressions.

use hypsym::jetcalc::{total_derivative, Axis};
use hypsym::symkernel::{derive, equivalent, integrate, parse, render_with_header, to_json, Context};

fn main() {
    let e = parse("(u + 1)^2 - u^2 - 2*u").unwrap();
    println!("(u+1)^2 - u^2 - 2u  ->  {}", e.canon());

    // opaque functions carry their own derivative slots
    let ctx = Context::new().func("F", &["u"]);
    let f = ctx.parse("F*exp(u)").unwrap();
    println!("d/du F e^u = {}", derive(&f, "u"));
    println!("D_x (F e^u) = {}", total_derivative(&f, Axis::X));

    let g = parse("u^3*exp(2*u)").unwrap();
    let antideriv = integrate(&g, "u").unwrap();
    println!("int u^3 e^(2u) du = {antideriv}");
    println!("check: {}", equivalent(&derive(&antideriv, "u"), &g));

    let q = ctx.parse("F_uu*u_x + F").unwrap();
    println!("with header: {}", render_with_header(&q));
    println!("json: {}", to_json(&q));
}
