//! Exact symbolic expression kernel: construction, canonical form,
//! differentiation, substitution, integration rules, parsing, rendering and
//! equality probing.

mod canon;
mod derive;
mod expr;
mod integrate;
mod json;
mod parse;
mod probe;
mod render;
mod subst;

pub use canon::{canonicalize, decompose_term, equivalent, recanonicalize, terms};
pub use derive::{bump_slot, derive, derive_many};
pub use expr::{is_integer, product_of, sum_of, sym, Expr, FuncApp, Node, Sym};
pub use integrate::{definite, integrate};
pub use json::{from_json, to_json};
pub use parse::{jet_name, parse, parse_jet_name, Context};
pub use probe::{probe, probe_equal, probe_zero, ProbeOutcome, DEFAULT_SEED};
pub use render::{deriv_suffix, header, render_with_header};
pub use subst::{substitute, Bindings, FunctionSymbol};


#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SymError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("arity mismatch for {name}: expected {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("circular binding through {0}")]
    CircularBinding(String),
    #[error("cannot integrate {expr} with respect to {var}")]
    Integration { expr: String, var: String },
    #[error("invalid expression json: {0}")]
    Json(String),
}
