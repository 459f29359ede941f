//! Partial differentiation.

use super::canon::canonicalize;
use super::expr::{Expr, FuncApp, Node};

/// Partial derivative of `e` with respect to the variable `v`.
///
/// Jet coordinates such as `u_x` are independent variables here; total
/// derivatives live in the jet layer.
pub fn derive(e: &Expr, v: &str) -> Expr {
    match raw(e, v) {
        Some(d) => canonicalize(&d),
        None => Expr::zero(),
    }
}

/// Repeated partial derivative, one variable per entry of `vars`.
pub fn derive_many(e: &Expr, vars: &[&str]) -> Expr {
    vars.iter().fold(e.clone(), |acc, v| derive(&acc, v))
}

/// Derivative of an opaque application in argument slot `k`.
pub fn bump_slot(f: &FuncApp, k: usize, by: i32) -> Expr {
    let mut g = f.clone();
    g.deriv[k] += by;
    canonicalize(&Expr::new(Node::Func(g)))
}

fn neg(e: Expr) -> Expr {
    Expr::product(vec![Expr::int(-1), e])
}

// `None` stands for an exact zero so that products can be pruned early.
fn raw(e: &Expr, v: &str) -> Option<Expr> {
    match e.node() {
        Node::Rational(_) | Node::Param(_) => None,
        Node::Var(w) => (&**w == v).then(Expr::one),
        Node::Func(f) => {
            let mut terms = Vec::new();
            for (k, a) in f.args.iter().enumerate() {
                if let Some(da) = raw(a, v) {
                    let mut g = f.clone();
                    g.deriv[k] += 1;
                    terms.push(Expr::product(vec![Expr::new(Node::Func(g)), da]));
                }
            }
            nonempty_sum(terms)
        }
        Node::Sum(ts) => nonempty_sum(ts.iter().filter_map(|t| raw(t, v)).collect()),
        Node::Product(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                if let Some(df) = raw(f, v) {
                    let mut parts: Vec<Expr> = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, g)| g.clone())
                        .collect();
                    parts.push(df);
                    terms.push(Expr::product(parts));
                }
            }
            nonempty_sum(terms)
        }
        Node::Power(b, x) => {
            let db = raw(b, v);
            let dx = raw(x, v);
            match (db, dx) {
                (None, None) => None,
                (Some(db), None) => Some(Expr::product(vec![
                    x.clone(),
                    Expr::pow(b.clone(), Expr::sum(vec![x.clone(), Expr::int(-1)])),
                    db,
                ])),
                (db, Some(dx)) => {
                    let mut inner = vec![Expr::product(vec![dx, Expr::ln(b.clone())])];
                    if let Some(db) = db {
                        inner.push(Expr::product(vec![
                            x.clone(),
                            db,
                            Expr::pow(b.clone(), Expr::int(-1)),
                        ]));
                    }
                    Some(Expr::product(vec![e.clone(), Expr::sum(inner)]))
                }
            }
        }
        Node::Exp(a) => raw(a, v).map(|da| Expr::product(vec![e.clone(), da])),
        Node::Ln(a) => raw(a, v).map(|da| Expr::product(vec![da, Expr::pow(a.clone(), Expr::int(-1))])),
        Node::Sin(a) => raw(a, v).map(|da| Expr::product(vec![Expr::cos(a.clone()), da])),
        Node::Cos(a) => raw(a, v).map(|da| neg(Expr::product(vec![Expr::sin(a.clone()), da]))),
    }
}

fn nonempty_sum(terms: Vec<Expr>) -> Option<Expr> {
    match terms.len() {
        0 => None,
        1 => terms.into_iter().next(),
        _ => Some(Expr::sum(terms)),
    }
}
