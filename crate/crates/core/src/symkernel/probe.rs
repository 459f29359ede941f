//! Randomized exact equality probing.
//!
//! Variables are replaced by random rationals, parameters by small nonzero
//! integers and opaque functions by random integer polynomials. Each trial
//! canonicalizes the fully numeric difference. A rational result decides the
//! trial; a sum of `c·exp(r)` terms with distinct rational `r` is certified
//! nonzero (Lindemann–Weierstrass), as is any single product of nonzero
//! transcendental atoms. Anything else leaves the trial undecided.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use num_traits::{One, Signed, Zero};

use super::canon::{canonicalize, decompose_term, terms};
use super::expr::{sum_of, Expr, Node};
use super::subst::{substitute, Bindings};

pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    Equal,
    NotEqual,
    Undecided,
}

enum Trial {
    Zero,
    Nonzero,
    Unknown,
    Singular,
}

/// `true` iff `a - b` canonicalizes to zero or every trial evaluates to zero.
pub fn probe_equal(a: &Expr, b: &Expr, trials: usize) -> bool {
    probe(a, b, trials) == ProbeOutcome::Equal
}

pub fn probe(a: &Expr, b: &Expr, trials: usize) -> ProbeOutcome {
    probe_zero(&(a - b), trials, DEFAULT_SEED)
}

/// Decide whether `e` vanishes identically.
pub fn probe_zero(e: &Expr, trials: usize, seed: u64) -> ProbeOutcome {
    let d = canonicalize(e);
    if d.is_zero() {
        return ProbeOutcome::Equal;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = d.free_vars();
    let params = d.free_params();
    let funcs = d.functions();
    let budget = trials.max(1) * 10;
    let (mut done, mut unknown) = (0, 0);
    for _ in 0..budget {
        if done == trials.max(1) {
            break;
        }
        let mut b = Bindings::new();
        for v in &vars {
            let n: i64 = loop {
                let n = rng.gen_range(-9..=9);
                if n != 0 {
                    break n;
                }
            };
            let q: i64 = rng.gen_range(1..=5);
            b = b.var(v, Expr::frac(n, q));
        }
        for p in &params {
            let n: i64 = loop {
                let n = rng.gen_range(-6..=6);
                if n != 0 {
                    break n;
                }
            };
            b = b.param(p, Expr::int(n));
        }
        for (name, ps) in &funcs {
            let names: Vec<&str> = ps.iter().map(|p| &**p).collect();
            b = b.func(name, &names, random_poly(&mut rng, &names));
        }
        let value = match substitute(&d, &b) {
            Ok(v) => v,
            Err(_) => {
                done += 1;
                unknown += 1;
                continue;
            }
        };
        match classify(&value) {
            Trial::Singular => continue,
            Trial::Zero => done += 1,
            Trial::Nonzero => return ProbeOutcome::NotEqual,
            Trial::Unknown => {
                done += 1;
                unknown += 1;
            }
        }
    }
    if done == 0 || unknown > 0 {
        ProbeOutcome::Undecided
    } else {
        ProbeOutcome::Equal
    }
}

fn random_poly(rng: &mut ChaCha8Rng, params: &[&str]) -> Expr {
    let coeff = |rng: &mut ChaCha8Rng| Expr::int(rng.gen_range(-5..=5));
    let mut out = vec![coeff(rng)];
    match params.len() {
        0 => {}
        1 => {
            let t = Expr::var(params[0]);
            for k in 1..=3 {
                out.push(&coeff(rng) * &t.powi(k));
            }
        }
        _ => {
            for (i, p) in params.iter().enumerate() {
                let t = Expr::var(p);
                out.push(&coeff(rng) * &t);
                for q in &params[i..] {
                    out.push(&(&coeff(rng) * &t) * &Expr::var(q));
                }
            }
        }
    }
    sum_of(out)
}

fn singular(e: &Expr) -> bool {
    let mut bad = false;
    e.visit(&mut |n| match n.node() {
        Node::Power(b, x) => {
            if let Some(r) = b.as_rational() {
                let integral = x.as_rational().is_some_and(|q| q.denom().is_one());
                let negative_x = x.as_rational().is_some_and(|q| !q.is_positive());
                if (r.is_zero() && negative_x) || (r.is_negative() && !integral) {
                    bad = true;
                }
            }
        }
        Node::Ln(a) => {
            if a.as_rational().is_some_and(|r| !r.is_positive()) {
                bad = true;
            }
        }
        _ => {}
    });
    bad
}

/// Nonzero real atom built from rationals only.
fn certified_atom(b: &Expr) -> bool {
    match b.node() {
        Node::Rational(r) => !r.is_zero(),
        Node::Exp(a) => a.as_rational().is_some(),
        Node::Ln(a) => a.as_rational().is_some_and(|r| r.is_positive() && !r.is_one()),
        Node::Sin(a) | Node::Cos(a) => a.as_rational().is_some(),
        _ => false,
    }
}

fn classify(v: &Expr) -> Trial {
    if singular(v) {
        return Trial::Singular;
    }
    if let Some(r) = v.as_rational() {
        return if r.is_zero() { Trial::Zero } else { Trial::Nonzero };
    }
    let ts = terms(v);
    if ts.len() == 1 {
        let (_, fs) = decompose_term(&ts[0]);
        if fs.iter().all(|(b, _)| certified_atom(b)) {
            return Trial::Nonzero;
        }
        return Trial::Unknown;
    }
    let exp_only = ts.iter().all(|t| {
        let (_, fs) = decompose_term(t);
        fs.len() <= 1
            && fs
                .iter()
                .all(|(b, x)| x.is_one() && matches!(b.node(), Node::Exp(a) if a.as_rational().is_some()))
    });
    if exp_only {
        Trial::Nonzero
    } else {
        Trial::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse;
    use super::*;

    #[test]
    fn basic_outcomes() {
        let ux = parse("u_x").unwrap();
        let uy = parse("u_y").unwrap();
        assert_eq!(probe(&ux, &uy, 20), ProbeOutcome::NotEqual);
        let a = parse("(u_x+1)^2").unwrap();
        let b = parse("u_x^2 + 2*u_x + 1").unwrap();
        assert!(probe_equal(&a, &b, 20));
    }

    #[test]
    fn transcendental_nonzero() {
        let e = parse("exp(u) - 1").unwrap();
        assert_eq!(probe_zero(&e, 10, 1), ProbeOutcome::NotEqual);
        let e = parse("ln(u^2) - 2*ln(u)").unwrap();
        assert!(matches!(probe_zero(&e, 10, 1), ProbeOutcome::Equal | ProbeOutcome::Undecided));
    }

    #[test]
    fn opaque_functions_become_polynomials() {
        let e = parse("func F(u); F_u^2 - F*F_uu").unwrap();
        assert_eq!(probe_zero(&e, 10, 3), ProbeOutcome::NotEqual);
    }
}
