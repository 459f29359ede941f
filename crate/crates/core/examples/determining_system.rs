//! Split the symmetry determining equations of u_xy = F(u) and u_xy = F(u_x).

use hypsym::detsys::{arbitrary_f_symmetries, split_system, FSpec};

fn main() {
    for (name, f) in [("F(u)", FSpec::opaque_u()), ("F(u_x)", FSpec::opaque_ux())] {
        let d = split_system(&f).unwrap();
        println!("== {name}");
        println!("unknowns: {}", d.unknowns.join(", "));
        for c in &d.constraints {
            println!("  {c} = 0");
        }
        println!("residual: {}", d.residual);
        let v = arbitrary_f_symmetries(&f).unwrap();
        println!("symmetries for arbitrary F: {}", v.to_json());
    }
}
