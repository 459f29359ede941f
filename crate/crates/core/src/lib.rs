//! Symmetry classification and conservation laws for the hyperbolic family
//! `u_xy = F(u, u_x)`.

pub mod symkernel;
pub mod jetcalc;
pub mod detsys;
pub mod classify;
pub mod report;
pub mod claws;
pub mod numgrid;
pub mod cli;
