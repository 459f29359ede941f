//! Text rendering in the parser's grammar.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::expr::{Expr, FuncApp, Node};
use super::parse::{parse_jet_name, Context};

fn rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn is_natural(r: &BigRational) -> bool {
    r.denom().is_one() && !r.is_negative()
}

/// Derivative suffix for an application, e.g. `_uu` or `_{u_x,int:y}`.
pub fn deriv_suffix(f: &FuncApp) -> String {
    if f.deriv.iter().all(|d| *d == 0) {
        return String::new();
    }
    let short = f.deriv.iter().all(|d| *d >= 0)
        && f.params.iter().all(|p| p.chars().count() == 1 && p.chars().all(char::is_alphabetic));
    let mut items = Vec::new();
    for (p, d) in f.params.iter().zip(&f.deriv) {
        for _ in 0..d.unsigned_abs() {
            items.push(if *d > 0 { p.to_string() } else { format!("int:{p}") });
        }
    }
    if short {
        format!("_{}", items.concat())
    } else {
        format!("_{{{}}}", items.join(","))
    }
}

fn func(f: &FuncApp, out: &mut String) {
    out.push_str(&f.name);
    out.push_str(&deriv_suffix(f));
    if !f.has_default_args() {
        out.push('(');
        for (k, a) in f.args.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            write_expr(a, out);
        }
        out.push(')');
    }
}

/// Split a leading negative coefficient off a term, returning the printed
/// magnitude.
fn negated(t: &Expr) -> Option<String> {
    match t.node() {
        Node::Rational(r) if r.is_negative() => Some(rational(&-r)),
        Node::Product(fs) => {
            let r = fs.first()?.as_rational()?;
            if !r.is_negative() {
                return None;
            }
            let mut rest: Vec<Expr> = fs[1..].to_vec();
            let m = -r;
            if !m.is_one() {
                rest.insert(0, Expr::rational(m));
            }
            let mut s = String::new();
            if rest.len() == 1 {
                factor(&rest[0], &mut s);
            } else {
                product(&rest, &mut s);
            }
            Some(s)
        }
        _ => None,
    }
}

fn product(fs: &[Expr], out: &mut String) {
    let mut start = 0;
    if let Some(r) = fs.first().and_then(|f| f.as_rational()) {
        if *r == -BigRational::one() && fs.len() > 1 {
            out.push('-');
            start = 1;
        }
    }
    for (k, f) in fs[start..].iter().enumerate() {
        if k > 0 {
            out.push('*');
        }
        factor(f, out);
    }
}

fn factor(e: &Expr, out: &mut String) {
    match e.node() {
        Node::Sum(_) => {
            out.push('(');
            write_expr(e, out);
            out.push(')');
        }
        _ => write_expr(e, out),
    }
}

fn base(e: &Expr, out: &mut String) {
    let simple = match e.node() {
        Node::Rational(r) => is_natural(r),
        Node::Sum(_) | Node::Product(_) | Node::Power(_, _) => false,
        _ => true,
    };
    if simple {
        write_expr(e, out);
    } else {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e.node() {
        Node::Rational(r) => out.push_str(&rational(r)),
        Node::Param(s) | Node::Var(s) => out.push_str(s),
        Node::Func(f) => func(f, out),
        Node::Sum(ts) => {
            if ts.is_empty() {
                out.push('0');
            }
            for (k, t) in ts.iter().enumerate() {
                match negated(t) {
                    Some(m) if k > 0 => {
                        out.push_str(" - ");
                        out.push_str(&m);
                    }
                    _ => {
                        if k > 0 {
                            out.push_str(" + ");
                        }
                        write_expr(t, out);
                    }
                }
            }
        }
        Node::Product(fs) => {
            if fs.is_empty() {
                out.push('1');
            }
            product(fs, out)
        }
        Node::Power(b, x) => {
            base(b, out);
            out.push('^');
            base(x, out);
        }
        Node::Exp(a) | Node::Ln(a) | Node::Sin(a) | Node::Cos(a) => {
            let name = match e.node() {
                Node::Exp(_) => "exp",
                Node::Ln(_) => "ln",
                Node::Sin(_) => "sin",
                _ => "cos",
            };
            let _ = write!(out, "{name}(");
            write_expr(a, out);
            out.push(')');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(self, &mut s);
        f.write_str(&s)
    }
}

/// Declaration header that makes `e.to_string()` reparse to `e`.
pub fn header(e: &Expr) -> String {
    let ctx = Context::new();
    let mut out = String::new();
    for (name, params) in e.functions() {
        let ps: Vec<&str> = params.iter().map(|p| &**p).collect();
        let _ = write!(out, "func {name}({}); ", ps.join(", "));
    }
    let vars: BTreeSet<_> = e.free_vars().into_iter().filter(|v| !ctx.is_var(v)).collect();
    if !vars.is_empty() {
        let vs: Vec<&str> = vars.iter().map(|v| &**v).collect();
        let _ = write!(out, "var {}; ", vs.join(", "));
    }
    let params: BTreeSet<_> = e
        .free_params()
        .into_iter()
        .filter(|p| ctx.is_var(p) || parse_jet_name(p).is_some() || e.functions().iter().any(|(f, _)| f == p))
        .collect();
    if !params.is_empty() {
        let ps: Vec<&str> = params.iter().map(|p| &**p).collect();
        let _ = write!(out, "param {}; ", ps.join(", "));
    }
    out
}

/// Self-contained text: header followed by the expression.
pub fn render_with_header(e: &Expr) -> String {
    format!("{}{}", header(e), e)
}
