//! Canonical form.
//!
//! Every expression is expanded into a sparse polynomial over "atoms"
//! (variables, parameters, function applications, ln/sin/cos wrappers and
//! non-expandable powers) with rational coefficients. A monomial is a map from
//! atom to exponent plus at most one merged `exp(..)` factor. The polynomial
//! is then rebuilt into a tree with a deterministic term order.
//!
//! Rewrite rules applied during expansion:
//! - positive integer powers of sums are multiplied out; negative powers are
//!   kept with a monic base and the content pulled into the coefficient
//! - a symbolic exponent on a sum base has its integer part >= 1 split off
//! - all `exp` factors of a term merge; `exp(c*ln(t) + r)` becomes `t^c exp(r)`
//! - `ln` splits products with a positive coefficient; `ln(exp(a)) = a`
//! - `sin`/`cos` are sign-normalized and products of them go to sums
//!
//! Zero detection clears sum denominators before deciding, so rational
//! identities such as `1/(1+u) + u/(1+u) - 1` canonicalize to `0`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::expr::{Expr, FuncApp, Node};

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Monomial {
    pub factors: BTreeMap<Expr, Expr>,
    pub exp: Option<Expr>,
}

pub(crate) type Poly = BTreeMap<Monomial, BigRational>;

/// Canonical form of `e`. Idempotent; cheap on already-canonical input.
pub fn canonicalize(e: &Expr) -> Expr {
    if e.is_canonical() {
        return e.clone();
    }
    let p = expand(e);
    if is_zero_poly(&p) {
        return Expr::new_canonical(Node::Rational(BigRational::zero()));
    }
    to_expr(&p)
}

/// Canonicalize ignoring any cached canonical markers in `e`.
pub fn recanonicalize(e: &Expr) -> Expr {
    canonicalize(&strip(e))
}

fn strip(e: &Expr) -> Expr {
    let kids: Vec<Expr> = e.children().into_iter().map(strip).collect();
    match e.node() {
        Node::Rational(_) | Node::Param(_) | Node::Var(_) => e.clone(),
        _ => {
            let rebuilt = e.with_children(kids);
            Expr::new(rebuilt.node().clone())
        }
    }
}

/// True if `a` and `b` canonicalize to the same value (zero difference).
pub fn equivalent(a: &Expr, b: &Expr) -> bool {
    (a - b).is_zero()
}

fn rzero() -> BigRational {
    BigRational::zero()
}

fn rone() -> BigRational {
    BigRational::one()
}

fn rconst(r: BigRational) -> Expr {
    Expr::new_canonical(Node::Rational(r))
}

fn constant(r: BigRational) -> Poly {
    let mut p = Poly::new();
    if !r.is_zero() {
        p.insert(Monomial::default(), r);
    }
    p
}

fn one_poly() -> Poly {
    constant(rone())
}

fn atom_pow(base: Expr, x: Expr) -> Poly {
    let mut m = Monomial::default();
    m.factors.insert(base, x);
    fixup(m, rone())
}

fn atom(base: Expr) -> Poly {
    let mut m = Monomial::default();
    m.factors.insert(base, rconst(rone()));
    let mut p = Poly::new();
    p.insert(m, rone());
    p
}

pub(crate) fn expand(e: &Expr) -> Poly {
    match e.node() {
        Node::Rational(r) => constant(r.clone()),
        Node::Param(_) | Node::Var(_) => atom(e.clone()),
        Node::Func(f) => {
            if e.is_canonical() {
                atom(e.clone())
            } else {
                let args = f.args.iter().map(canonicalize).collect();
                atom(Expr::new_canonical(Node::Func(FuncApp { args, ..f.clone() })))
            }
        }
        Node::Sum(ts) => {
            let mut acc = Poly::new();
            for t in ts {
                poly_add_into(&mut acc, &expand(t));
            }
            acc
        }
        Node::Product(fs) => {
            let mut acc = one_poly();
            for f in fs {
                if acc.is_empty() {
                    break;
                }
                acc = poly_mul(&acc, &expand(f));
            }
            acc
        }
        Node::Power(b, x) => pow_poly(&expand(b), &canonicalize(x)),
        Node::Exp(a) => exp_poly(&canonicalize(a)),
        Node::Ln(a) => ln_poly(&canonicalize(a)),
        Node::Sin(a) => trig_atom(true, &canonicalize(a)),
        Node::Cos(a) => trig_atom(false, &canonicalize(a)),
    }
}

pub(crate) fn poly_add_into(acc: &mut Poly, p: &Poly) {
    for (m, c) in p {
        add_term(acc, m.clone(), c.clone());
    }
}

fn add_term(acc: &mut Poly, m: Monomial, c: BigRational) {
    if c.is_zero() {
        return;
    }
    match acc.get_mut(&m) {
        Some(v) => {
            *v += c;
            if v.is_zero() {
                acc.remove(&m);
            }
        }
        None => {
            acc.insert(m, c);
        }
    }
}

pub(crate) fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m = mono_mul(ma, mb);
            poly_add_into(&mut out, &fixup(m, ca * cb));
        }
    }
    out
}

fn add_exponents(a: &Expr, b: &Expr) -> Expr {
    match (a.as_rational(), b.as_rational()) {
        (Some(x), Some(y)) => rconst(x + y),
        _ => canonicalize(&Expr::sum(vec![a.clone(), b.clone()])),
    }
}

fn mul_exponents(a: &Expr, b: &Expr) -> Expr {
    match (a.as_rational(), b.as_rational()) {
        (Some(x), Some(y)) => rconst(x * y),
        _ => canonicalize(&Expr::product(vec![a.clone(), b.clone()])),
    }
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = a.clone();
    for (base, x) in &b.factors {
        let nx = match out.factors.get(base) {
            Some(y) => add_exponents(y, x),
            None => x.clone(),
        };
        out.factors.insert(base.clone(), nx);
    }
    out.exp = match (&a.exp, &b.exp) {
        (Some(p), Some(q)) => Some(add_exponents(p, q)),
        (Some(p), None) => Some(p.clone()),
        (None, Some(q)) => Some(q.clone()),
        (None, None) => None,
    };
    out
}

fn mono_pow(m: &Monomial, x: &Expr) -> Monomial {
    Monomial {
        factors: m
            .factors
            .iter()
            .map(|(b, e)| (b.clone(), mul_exponents(e, x)))
            .collect(),
        exp: m.exp.as_ref().map(|a| mul_exponents(a, x)),
    }
}

pub(crate) fn rpow(r: &BigRational, n: i64) -> BigRational {
    let mut acc = rone();
    let mut b = if n < 0 { r.recip() } else { r.clone() };
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc *= &b;
        }
        b = &b * &b;
        k >>= 1;
    }
    acc
}

fn small_int(r: &BigRational) -> Option<i64> {
    if r.denom().is_one() {
        r.numer().to_i64().filter(|n| n.abs() <= 10_000)
    } else {
        None
    }
}

/// `r^(p/q)` when the result is rational.
fn exact_rational_power(r: &BigRational, x: &BigRational) -> Option<BigRational> {
    let q = x.denom().to_u32()?;
    let p = x.numer().to_i64()?;
    if r.is_negative() && q % 2 == 0 {
        return None;
    }
    let root = |n: &BigInt| -> Option<BigInt> {
        let c = n.nth_root(q);
        if num_traits::pow(c.clone(), q as usize) == *n {
            Some(c)
        } else {
            None
        }
    };
    let base = BigRational::new(root(r.numer())?, root(r.denom())?);
    if base.is_zero() && p < 0 {
        return None;
    }
    Some(rpow(&base, p))
}

/// Constant (rational) part of a canonical exponent.
pub(crate) fn const_part(x: &Expr) -> BigRational {
    match x.node() {
        Node::Rational(r) => r.clone(),
        Node::Sum(ts) => ts.first().and_then(|t| t.as_rational().cloned()).unwrap_or_else(rzero),
        _ => rzero(),
    }
}

fn floor(r: &BigRational) -> BigInt {
    r.floor().to_integer()
}

/// Normalize a monomial and multiply out whatever the rules say to expand.
fn fixup(m: Monomial, coeff: BigRational) -> Poly {
    if coeff.is_zero() {
        return Poly::new();
    }
    let mut c = coeff;
    let mut extra: Vec<Poly> = Vec::new();
    let mut out = Monomial {
        factors: BTreeMap::new(),
        exp: m.exp.filter(|a| !a.is_zero()),
    };
    for (base, x) in m.factors {
        if x.is_zero() {
            continue;
        }
        match base.node() {
            Node::Rational(r) => {
                if r.is_one() {
                    continue;
                }
                if let Some(q) = x.as_rational() {
                    if let Some(v) = exact_rational_power(r, q) {
                        c *= v;
                        continue;
                    }
                }
                out.factors.insert(base, x);
            }
            Node::Sum(_) => {
                if let Some(n) = x.as_rational().and_then(small_int).filter(|n| *n > 0) {
                    extra.push(expand_sum_power(&base, n));
                    continue;
                }
                if x.as_rational().is_none() {
                    let k = floor(&const_part(&x));
                    if k >= BigInt::one() {
                        if let Some(n) = k.to_i64().filter(|n| *n <= 64) {
                            let rest = add_exponents(&x, &rconst(-BigRational::from_integer(k)));
                            extra.push(expand_sum_power(&base, n));
                            if !rest.is_zero() {
                                out.factors.insert(base, rest);
                            }
                            continue;
                        }
                    }
                }
                out.factors.insert(base, x);
            }
            _ => {
                out.factors.insert(base, x);
            }
        }
    }
    let trig: Vec<(Expr, i64)> = out
        .factors
        .iter()
        .filter(|(b, _)| matches!(b.node(), Node::Sin(_) | Node::Cos(_)))
        .filter_map(|(b, x)| x.as_rational().and_then(small_int).filter(|n| *n > 0).map(|n| (b.clone(), n)))
        .collect();
    if trig.iter().map(|(_, n)| n).sum::<i64>() >= 2 {
        let mut list = Vec::new();
        for (b, n) in &trig {
            out.factors.remove(b);
            let (is_sin, arg) = match b.node() {
                Node::Sin(a) => (true, a.clone()),
                Node::Cos(a) => (false, a.clone()),
                _ => unreachable!(),
            };
            for _ in 0..*n {
                list.push((is_sin, arg.clone()));
            }
        }
        extra.push(trig_product(&list));
    }
    let mut p = Poly::new();
    p.insert(out, c);
    for e in extra {
        p = poly_mul(&p, &e);
    }
    p
}

fn expand_sum_power(base: &Expr, n: i64) -> Poly {
    let b = expand(base);
    let mut acc = one_poly();
    for _ in 0..n {
        acc = poly_mul(&acc, &b);
    }
    acc
}

/// Split a multi-term polynomial into (leading coefficient, monic part).
fn monic(p: &Poly) -> (BigRational, Poly) {
    let lc = p.values().next().cloned().unwrap_or_else(rone);
    let q = p.iter().map(|(m, c)| (m.clone(), c / &lc)).collect();
    (lc, q)
}

fn pow_poly(b: &Poly, x: &Expr) -> Poly {
    if x.is_zero() {
        return one_poly();
    }
    if b.is_empty() {
        if let Some(r) = x.as_rational() {
            if r.is_positive() {
                return Poly::new();
            }
        }
        return atom_pow(rconst(rzero()), x.clone());
    }
    if let Some(n) = x.as_rational().and_then(small_int) {
        if b.len() == 1 {
            let (m, c) = b.iter().next().unwrap();
            return fixup(mono_pow(m, x), rpow(c, n));
        }
        if n > 0 {
            let mut acc = one_poly();
            for _ in 0..n {
                acc = poly_mul(&acc, b);
            }
            return acc;
        }
        let (lc, q) = monic(b);
        let mut p = atom_pow(to_expr(&q), x.clone());
        scale(&mut p, &rpow(&lc, n));
        return p;
    }
    if b.len() == 1 {
        let (m, c) = b.iter().next().unwrap();
        if c.is_positive() {
            let mut mm = mono_pow(m, x);
            if !c.is_one() {
                mm.factors.insert(rconst(c.clone()), x.clone());
            }
            return fixup(mm, rone());
        }
        return atom_pow(to_expr(b), x.clone());
    }
    let (lc, q) = monic(b);
    if lc.is_positive() {
        let mut m = Monomial::default();
        m.factors.insert(to_expr(&q), x.clone());
        if !lc.is_one() {
            m.factors.insert(rconst(lc), x.clone());
        }
        fixup(m, rone())
    } else {
        atom_pow(to_expr(b), x.clone())
    }
}

fn scale(p: &mut Poly, r: &BigRational) {
    for v in p.values_mut() {
        *v *= r;
    }
}

fn exp_poly(a: &Expr) -> Poly {
    if a.is_zero() {
        return one_poly();
    }
    let p = expand(a);
    let mut rest = Poly::new();
    let mut result = one_poly();
    for (m, c) in &p {
        let lns: Vec<&Expr> = m
            .factors
            .iter()
            .filter(|(b, x)| matches!(b.node(), Node::Ln(_)) && x.is_one())
            .map(|(b, _)| b)
            .collect();
        if lns.len() == 1 {
            let ln_atom = lns[0];
            let Node::Ln(t) = ln_atom.node() else { unreachable!() };
            let mut coef_m = m.clone();
            coef_m.factors.remove(ln_atom);
            let mut cp = Poly::new();
            cp.insert(coef_m, c.clone());
            let coef = to_expr(&cp);
            result = poly_mul(&result, &pow_poly(&expand(t), &coef));
        } else {
            rest.insert(m.clone(), c.clone());
        }
    }
    if !rest.is_empty() {
        let m = Monomial {
            factors: BTreeMap::new(),
            exp: Some(to_expr(&rest)),
        };
        let mut e = Poly::new();
        e.insert(m, rone());
        result = poly_mul(&result, &e);
    }
    result
}

fn ln_atom(t: Expr) -> Poly {
    atom(Expr::new_canonical(Node::Ln(t)))
}

fn ln_rational(r: &BigRational) -> Poly {
    if r.is_one() {
        Poly::new()
    } else {
        ln_atom(rconst(r.clone()))
    }
}

fn ln_poly(a: &Expr) -> Poly {
    let p = expand(a);
    if p.is_empty() {
        return ln_atom(a.clone());
    }
    if p.len() == 1 {
        let (m, c) = p.iter().next().unwrap();
        if m.factors.is_empty() && m.exp.is_none() {
            return if c.is_positive() { ln_rational(c) } else { ln_atom(a.clone()) };
        }
        if !c.is_positive() {
            return ln_atom(a.clone());
        }
        let simple = c.is_one() && m.exp.is_none() && m.factors.len() == 1 && m.factors.values().all(|x| x.is_one());
        if simple {
            return ln_atom(a.clone());
        }
        let mut acc = ln_rational(c);
        for (b, x) in &m.factors {
            let lb = ln_poly(b);
            poly_add_into(&mut acc, &poly_mul(&lb, &expand(x)));
        }
        if let Some(e) = &m.exp {
            poly_add_into(&mut acc, &expand(e));
        }
        return acc;
    }
    let (lc, q) = monic(&p);
    if lc.is_positive() {
        let mut acc = ln_rational(&lc);
        poly_add_into(&mut acc, &ln_atom(to_expr(&q)));
        acc
    } else {
        ln_atom(a.clone())
    }
}

/// Rational coefficient of the leading term of a canonical expression.
pub(crate) fn lead_coeff(e: &Expr) -> BigRational {
    match e.node() {
        Node::Rational(r) => r.clone(),
        Node::Product(fs) => fs.first().and_then(|f| f.as_rational().cloned()).unwrap_or_else(rone),
        Node::Sum(ts) => ts.first().map(lead_coeff).unwrap_or_else(rone),
        _ => rone(),
    }
}

fn trig_atom(is_sin: bool, a: &Expr) -> Poly {
    if a.is_zero() {
        return if is_sin { Poly::new() } else { one_poly() };
    }
    if lead_coeff(a).is_negative() {
        let na = canonicalize(&Expr::product(vec![Expr::int(-1), a.clone()]));
        let mut p = trig_atom(is_sin, &na);
        if is_sin {
            scale(&mut p, &-rone());
        }
        return p;
    }
    let node = if is_sin { Node::Sin(a.clone()) } else { Node::Cos(a.clone()) };
    atom(Expr::new_canonical(node))
}

fn trig_product(list: &[(bool, Expr)]) -> Poly {
    match list.len() {
        0 => one_poly(),
        1 => trig_atom(list[0].0, &list[0].1),
        _ => {
            let (s1, a) = &list[0];
            let (s2, b) = &list[1];
            let plus = canonicalize(&Expr::sum(vec![a.clone(), b.clone()]));
            let minus = canonicalize(&Expr::sum(vec![
                a.clone(),
                Expr::product(vec![Expr::int(-1), b.clone()]),
            ]));
            let half = BigRational::new(BigInt::from(1), BigInt::from(2));
            let mut pair = Poly::new();
            let mut push = |p: Poly, s: BigRational| {
                let mut p = p;
                scale(&mut p, &s);
                poly_add_into(&mut pair, &p);
            };
            match (s1, s2) {
                (true, true) => {
                    push(trig_atom(false, &minus), half.clone());
                    push(trig_atom(false, &plus), -half.clone());
                }
                (false, false) => {
                    push(trig_atom(false, &minus), half.clone());
                    push(trig_atom(false, &plus), half.clone());
                }
                (true, false) => {
                    push(trig_atom(true, &plus), half.clone());
                    push(trig_atom(true, &minus), half.clone());
                }
                (false, true) => {
                    push(trig_atom(true, &plus), half.clone());
                    push(trig_atom(true, &minus), -half.clone());
                }
            }
            poly_mul(&pair, &trig_product(&list[2..]))
        }
    }
}

/// Exponent of a denominator factor: sum base with negative constant part.
fn denominator_bases(p: &Poly) -> BTreeMap<Expr, i64> {
    let mut out: BTreeMap<Expr, i64> = BTreeMap::new();
    for m in p.keys() {
        for (b, x) in &m.factors {
            if !matches!(b.node(), Node::Sum(_)) {
                continue;
            }
            let c = const_part(x);
            if c.is_negative() {
                let k = (-c).ceil().to_integer().to_i64().unwrap_or(i64::MAX).min(64);
                let e = out.entry(b.clone()).or_insert(0);
                *e = (*e).max(k);
            }
        }
    }
    out
}

fn is_zero_poly(p: &Poly) -> bool {
    if p.is_empty() {
        return true;
    }
    let dens = denominator_bases(p);
    if dens.is_empty() {
        return false;
    }
    let mut acc = Poly::new();
    for (m, c) in p {
        let mut mm = m.clone();
        let mut extra = one_poly();
        for (b, k) in &dens {
            match mm.factors.get(b) {
                Some(x) => {
                    let nx = add_exponents(x, &rconst(BigRational::from_integer(BigInt::from(*k))));
                    mm.factors.insert(b.clone(), nx);
                }
                None => extra = poly_mul(&extra, &expand_sum_power(b, *k)),
            }
        }
        poly_add_into(&mut acc, &poly_mul(&fixup(mm, c.clone()), &extra));
    }
    acc.is_empty()
}

fn term_expr(m: &Monomial, c: &BigRational) -> Expr {
    let mut fs = Vec::new();
    for (b, x) in &m.factors {
        if x.is_one() {
            fs.push(b.clone());
        } else {
            fs.push(Expr::new_canonical(Node::Power(b.clone(), x.clone())));
        }
    }
    if let Some(a) = &m.exp {
        fs.push(Expr::new_canonical(Node::Exp(a.clone())));
    }
    if fs.is_empty() {
        return rconst(c.clone());
    }
    if c.is_one() && fs.len() == 1 {
        return fs.pop().unwrap();
    }
    if !c.is_one() {
        fs.insert(0, rconst(c.clone()));
    }
    Expr::new_canonical(Node::Product(fs))
}

pub(crate) fn to_expr(p: &Poly) -> Expr {
    let mut terms: Vec<Expr> = p.iter().map(|(m, c)| term_expr(m, c)).collect();
    match terms.len() {
        0 => rconst(rzero()),
        1 => terms.pop().unwrap(),
        _ => Expr::new_canonical(Node::Sum(terms)),
    }
}

/// Terms of a canonical expression (a single term if it is not a sum).
pub fn terms(e: &Expr) -> Vec<Expr> {
    match e.node() {
        Node::Sum(ts) => ts.clone(),
        _ if e.is_zero() => vec![],
        _ => vec![e.clone()],
    }
}

/// Decompose a canonical term into its rational coefficient and
/// `(base, exponent)` factors. An `exp(a)` factor appears as `(exp(a), 1)`.
pub fn decompose_term(t: &Expr) -> (BigRational, Vec<(Expr, Expr)>) {
    let one = || rconst(rone());
    let split = |f: &Expr| match f.node() {
        Node::Power(b, x) => (b.clone(), x.clone()),
        _ => (f.clone(), one()),
    };
    match t.node() {
        Node::Rational(r) => (r.clone(), vec![]),
        Node::Product(fs) => {
            let mut c = rone();
            let mut out = Vec::new();
            for f in fs {
                match f.as_rational() {
                    Some(r) => c *= r,
                    None => out.push(split(f)),
                }
            }
            (c, out)
        }
        _ => (rone(), vec![split(t)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Expr {
        Expr::var("u")
    }

    #[test]
    fn binomial_square_cancels() {
        let e = (u() + Expr::one()).powi(2) - u().powi(2) - Expr::int(2) * u() - Expr::one();
        assert!(e.is_zero());
    }

    #[test]
    fn coefficients_collect() {
        let ux = Expr::var("u_x");
        let e = Expr::int(2) * Expr::frac(1, 2) * ux.clone() * ux.clone();
        assert_eq!(e, ux.powi(2));
    }

    #[test]
    fn opaque_products_commute() {
        let f = Expr::func("F", &["u"]);
        let g = Expr::pow(Expr::func("G", &["u"]), Expr::int(3));
        let a = &f * &canonicalize(&g);
        let b = canonicalize(&g) * &f;
        assert!((a - b).is_zero());
    }

    #[test]
    fn rational_function_zero() {
        let d = (u() + Expr::one()).recip();
        let e = &d + &(u() * &d) - Expr::one();
        assert!(e.is_zero());
    }

    #[test]
    fn exp_ln_merge() {
        let x = Expr::var("x");
        let e = canonicalize(&Expr::exp(Expr::sum(vec![u(), Expr::product(vec![Expr::int(2), Expr::ln(x.clone())])])));
        let want = x.powi(2) * canonicalize(&Expr::exp(u()));
        assert_eq!(e, want);
        assert!(canonicalize(&Expr::ln(Expr::exp(u()))) == u());
    }

    #[test]
    fn exp_factors_merge() {
        let e = canonicalize(&Expr::exp(u())) * canonicalize(&Expr::exp(u().neg()));
        assert!(e.is_one());
    }

    #[test]
    fn symbolic_exponent_shift() {
        let a = Expr::param("alpha");
        let b = Expr::param("beta");
        let base = &a + &Expr::var("u_x");
        let lhs = base.powe(&(&b - &Expr::one())) * &base;
        let rhs = base.powe(&b);
        assert!((lhs - rhs).is_zero());
    }

    #[test]
    fn pythagoras() {
        let s = canonicalize(&Expr::sin(u()));
        let c = canonicalize(&Expr::cos(u()));
        assert!((&s * &s + &c * &c - Expr::one()).is_zero());
        let t = canonicalize(&Expr::sin(u().neg()));
        assert!((t + s).is_zero());
    }

    #[test]
    fn rational_roots() {
        let e = canonicalize(&Expr::pow(Expr::int(4), Expr::frac(1, 2)));
        assert_eq!(e, Expr::int(2));
        let e = canonicalize(&Expr::pow(Expr::int(2), Expr::frac(1, 2)));
        assert!(e.as_rational().is_none());
    }

    #[test]
    fn recanonicalize_is_stable() {
        let e = (u() + Expr::param("a")).powe(&Expr::param("b")) * canonicalize(&Expr::ln(&u() * &Expr::var("x")));
        assert_eq!(recanonicalize(&e), e);
    }
}
