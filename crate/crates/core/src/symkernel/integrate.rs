//! Antiderivatives by a small rule set.
//!
//! Supported integrands, term by term after canonicalization, with `L` linear
//! in the integration variable and `k` a non-negative integer:
//! `v^n`, `L^n` (any exponent, including symbolic), `v^k L^n`,
//! `v^k exp(L)`, `v^k ln(L)`, `v^k sin(L)`, `v^k cos(L)`, `ln(L)`, and an
//! opaque function of a single linear argument (yielding an antiderivative
//! slot). Anything else is an [`SymError::Integration`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use super::canon::{canonicalize, decompose_term, terms};
use super::derive::{bump_slot, derive};
use super::expr::{product_of, sum_of, Expr, Node};
use super::subst::{substitute, Bindings};
use super::SymError;

/// Antiderivative of `e` with respect to `v` (no integration constant).
pub fn integrate(e: &Expr, v: &str) -> Result<Expr, SymError> {
    let e = canonicalize(e);
    let mut out = Vec::new();
    for t in terms(&e) {
        out.push(term(&t, v)?);
    }
    Ok(sum_of(out))
}

/// `F(hi) - F(lo)` for the antiderivative `F`.
pub fn definite(e: &Expr, v: &str, lo: &Expr, hi: &Expr) -> Result<Expr, SymError> {
    let f = integrate(e, v)?;
    let at = |x: &Expr| substitute(&f, &Bindings::new().var(v, x.clone()));
    Ok(at(hi)? - at(lo)?)
}

fn fail(e: &Expr, v: &str) -> SymError {
    SymError::Integration {
        expr: e.to_string(),
        var: v.to_string(),
    }
}

fn term(t: &Expr, v: &str) -> Result<Expr, SymError> {
    let (c, factors) = decompose_term(t);
    let mut free = vec![Expr::rational(c)];
    let mut dep = Vec::new();
    for (b, x) in factors {
        if b.contains_var(v) || x.contains_var(v) {
            dep.push((b, x));
        } else {
            free.push(Expr::pow(b, x));
        }
    }
    let core = dependent(&dep, v).ok_or_else(|| fail(t, v))?;
    Ok(product_of(free.into_iter().chain(std::iter::once(core))))
}

/// `(a, b)` with `e = a v + b`, both free of `v` and `a != 0`.
fn linear(e: &Expr, v: &str) -> Option<(Expr, Expr)> {
    let a = derive(e, v);
    if a.is_zero() || a.contains_var(v) {
        return None;
    }
    let b = e - &(&a * &Expr::var(v));
    if b.contains_var(v) {
        return None;
    }
    Some((a, b))
}

fn nonneg_int(x: &Expr) -> Option<u32> {
    let r = x.as_rational()?;
    if r.denom().is_one() {
        r.numer().to_u32()
    } else {
        None
    }
}

fn is_minus_one(x: &Expr) -> bool {
    x.as_rational().is_some_and(|r| *r == -BigRational::one())
}

fn dependent(dep: &[(Expr, Expr)], v: &str) -> Option<Expr> {
    let var = Expr::var(v);
    match dep {
        [] => Some(var),
        [(b, x)] => single(b, x, v),
        [(p, k), (b, x)] | [(b, x), (p, k)] if *p == var && nonneg_int(k).is_some() => {
            let k = nonneg_int(k).unwrap();
            if x.contains_var(v) {
                return None;
            }
            mixed(k, b, x, v)
        }
        _ => None,
    }
}

fn single(b: &Expr, x: &Expr, v: &str) -> Option<Expr> {
    if x.contains_var(v) {
        return None;
    }
    let var = Expr::var(v);
    if *b == var {
        return Some(if is_minus_one(x) {
            Expr::ln(var).canon()
        } else {
            let n1 = x + &Expr::one();
            &var.powe(&n1) / &n1
        });
    }
    if !x.is_one() {
        let (a, _) = linear(b, v)?;
        return Some(if is_minus_one(x) {
            &Expr::ln(b.clone()).canon() / &a
        } else {
            let n1 = x + &Expr::one();
            &b.powe(&n1) / &(&n1 * &a)
        });
    }
    match b.node() {
        Node::Exp(arg) => {
            let (a, _) = linear(arg, v)?;
            Some(b / &a)
        }
        Node::Ln(arg) => {
            let (a, _) = linear(arg, v)?;
            Some(&(&(arg * b) - arg) / &a)
        }
        Node::Sin(arg) => {
            let (a, _) = linear(arg, v)?;
            Some(-(&Expr::cos(arg.clone()).canon() / &a))
        }
        Node::Cos(arg) => {
            let (a, _) = linear(arg, v)?;
            Some(&Expr::sin(arg.clone()).canon() / &a)
        }
        Node::Func(f) => {
            let hits: Vec<usize> = (0..f.args.len()).filter(|k| f.args[*k].contains_var(v)).collect();
            if hits.len() != 1 {
                return None;
            }
            let (a, _) = linear(&f.args[hits[0]], v)?;
            Some(&bump_slot(f, hits[0], -1) / &a)
        }
        Node::Sum(_) => linear(b, v).map(|(a, _)| &b.powi(2) / &(&Expr::int(2) * &a)),
        _ => None,
    }
}

fn binom(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `∫ v^k · b^x dv` with `k >= 1` (or `k = 0`, which defers to `single`).
fn mixed(k: u32, b: &Expr, x: &Expr, v: &str) -> Option<Expr> {
    if k == 0 {
        return single(b, x, v);
    }
    let var = Expr::var(v);
    let vk = var.powi(k as i64);
    if !x.is_one() || matches!(b.node(), Node::Sum(_)) {
        // v = (L - c)/a, expand v^k and integrate powers of L
        let (a, c) = linear(b, v)?;
        let mut acc = Vec::new();
        for j in 0..=k {
            let coef = product_of([
                Expr::rational(BigRational::from_integer(binom(k, j))),
                (-&c).powi((k - j) as i64),
                a.powi(-(k as i64)),
            ]);
            let n = x + &Expr::int(j as i64);
            let piece = if n.is_zero() { var.clone() } else { single(b, &n, v)? };
            acc.push(&coef * &piece);
        }
        return Some(sum_of(acc));
    }
    match b.node() {
        // integration by parts, lowering the power of v
        Node::Exp(arg) => {
            let (a, _) = linear(arg, v)?;
            let first = &(&vk * b) / &a;
            let rest = mixed(k - 1, b, x, v)?;
            Some(&first - &(&(&Expr::int(k as i64) / &a) * &rest))
        }
        Node::Sin(arg) | Node::Cos(arg) => {
            let (a, _) = linear(arg, v)?;
            let is_sin = matches!(b.node(), Node::Sin(_));
            let anti = if is_sin {
                -(&Expr::cos(arg.clone()).canon() / &a)
            } else {
                &Expr::sin(arg.clone()).canon() / &a
            };
            let next = if is_sin { Expr::cos(arg.clone()) } else { Expr::sin(arg.clone()) }.canon();
            let sign = if is_sin { Expr::one() } else { Expr::int(-1) };
            let rest = mixed(k - 1, &next, &Expr::one(), v)?;
            Some(&(&vk * &anti) + &(&(&sign * &(&Expr::int(k as i64) / &a)) * &rest))
        }
        Node::Ln(arg) => {
            let (a, _) = linear(arg, v)?;
            let p = &var.powi(k as i64 + 1) / &Expr::int(k as i64 + 1);
            let inner = integrate(&(&(&p * &a) / arg), v).ok()?;
            Some(&(&p * b) - &inner)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(e: &Expr, v: &str) {
        let f = integrate(e, v).unwrap();
        assert!((derive(&f, v) - e).is_zero(), "d/d{v} of {f} != {e}");
    }

    #[test]
    fn power_and_linear_rules() {
        let u = Expr::var("u");
        let t = Expr::var("t");
        let a = Expr::param("a");
        check(&(&u.powi(3) + &u.recip()), "u");
        check(&(&(&t * &u) + &Expr::one()).powe(&a), "t");
        check(&(&(&t * &u) + &Expr::one()).powi(-2), "t");
        check(&(&t.powi(2) * &(&(&t * &u) + &Expr::one()).powi(-1)), "t");
    }

    #[test]
    fn transcendental_rules() {
        let t = Expr::var("t");
        let u = Expr::var("u");
        check(&(&t.powi(2) * &Expr::exp(&t * &u).canon()), "t");
        check(&Expr::ln(&Expr::one() + &(&t * &u)).canon(), "t");
        check(&(&t * &Expr::ln(&Expr::one() + &t).canon()), "t");
        check(&(&t * &Expr::sin(&t * &u).canon()), "t");
        check(&Expr::func_app("F", &["s"], vec![&t * &u]).canon(), "t");
    }
}
