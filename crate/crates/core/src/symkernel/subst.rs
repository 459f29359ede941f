//! Simultaneous substitution.

use std::collections::{BTreeMap, BTreeSet};

use super::canon::canonicalize;
use super::derive::derive;
use super::expr::{sym, Expr, Node, Sym};
use super::integrate::integrate;
use super::SymError;

/// Function symbol declaration with an optional closed-form body.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSymbol {
    pub name: Sym,
    pub params: Vec<Sym>,
    pub body: Option<Expr>,
}

impl FunctionSymbol {
    pub fn opaque(name: &str, params: &[&str]) -> Self {
        FunctionSymbol {
            name: sym(name),
            params: params.iter().map(|p| sym(p)).collect(),
            body: None,
        }
    }

    pub fn with_body(name: &str, params: &[&str], body: Expr) -> Self {
        FunctionSymbol {
            body: Some(body),
            ..FunctionSymbol::opaque(name, params)
        }
    }

    /// Application to the declared parameters.
    pub fn apply(&self) -> Expr {
        let ps: Vec<&str> = self.params.iter().map(|p| &**p).collect();
        Expr::func(&self.name, &ps)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Bindings {
    vars: BTreeMap<Sym, Expr>,
    params: BTreeMap<Sym, Expr>,
    funcs: BTreeMap<Sym, (Vec<Sym>, Expr)>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(mut self, name: &str, value: Expr) -> Self {
        self.vars.insert(sym(name), value);
        self
    }

    pub fn param(mut self, name: &str, value: Expr) -> Self {
        self.params.insert(sym(name), value);
        self
    }

    /// Bind an opaque function to a body written in terms of `params`.
    pub fn func(mut self, name: &str, params: &[&str], body: Expr) -> Self {
        self.funcs
            .insert(sym(name), (params.iter().map(|p| sym(p)).collect(), body));
        self
    }

    pub fn symbol(self, f: &FunctionSymbol) -> Self {
        match &f.body {
            Some(b) => {
                let ps: Vec<&str> = f.params.iter().map(|p| &**p).collect();
                self.func(&f.name, &ps, b.clone())
            }
            None => self,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.params.is_empty() && self.funcs.is_empty()
    }

    fn check_acyclic(&self) -> Result<(), SymError> {
        let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let deps = |e: &Expr, skip: &[Sym]| -> BTreeSet<String> {
            let mut out = BTreeSet::new();
            for v in e.free_vars() {
                if !skip.contains(&v) {
                    out.insert(format!("v:{v}"));
                }
            }
            for p in e.free_params() {
                out.insert(format!("p:{p}"));
            }
            for (f, _) in e.functions() {
                out.insert(format!("f:{f}"));
            }
            out
        };
        for (k, v) in &self.vars {
            edges.insert(format!("v:{k}"), deps(v, &[]));
        }
        for (k, v) in &self.params {
            edges.insert(format!("p:{k}"), deps(v, &[]));
        }
        for (k, (ps, body)) in &self.funcs {
            edges.insert(format!("f:{k}"), deps(body, ps));
        }
        // colour: 1 = on stack, 2 = done
        let mut colour: BTreeMap<String, u8> = BTreeMap::new();
        fn dfs(
            n: &str,
            edges: &BTreeMap<String, BTreeSet<String>>,
            colour: &mut BTreeMap<String, u8>,
        ) -> Option<String> {
            match colour.get(n) {
                Some(1) => return Some(n.to_string()),
                Some(_) => return None,
                None => {}
            }
            colour.insert(n.to_string(), 1);
            if let Some(next) = edges.get(n) {
                for m in next {
                    if edges.contains_key(m) {
                        if let Some(c) = dfs(m, edges, colour) {
                            return Some(c);
                        }
                    }
                }
            }
            colour.insert(n.to_string(), 2);
            None
        }
        for k in edges.keys() {
            if let Some(c) = dfs(k, &edges, &mut colour) {
                return Err(SymError::CircularBinding(c[2..].to_string()));
            }
        }
        Ok(())
    }
}

/// Replace every bound symbol simultaneously, then canonicalize.
///
/// A bound function symbol also rewrites its derivative applications by
/// differentiating (or, for antiderivative slots, integrating) the body.
///
/// A binding whose value mentions its own symbol is rejected.
pub fn substitute(e: &Expr, b: &Bindings) -> Result<Expr, SymError> {
    if b.is_empty() {
        return Ok(canonicalize(e));
    }
    b.check_acyclic()?;
    let mut cache = BTreeMap::new();
    Ok(canonicalize(&go(e, b, &mut cache)?))
}

fn go(e: &Expr, b: &Bindings, cache: &mut BTreeMap<Expr, Expr>) -> Result<Expr, SymError> {
    match e.node() {
        Node::Rational(_) => return Ok(e.clone()),
        Node::Var(v) => return Ok(b.vars.get(v).cloned().unwrap_or_else(|| e.clone())),
        Node::Param(p) => return Ok(b.params.get(p).cloned().unwrap_or_else(|| e.clone())),
        _ => {}
    }
    if let Some(hit) = cache.get(e) {
        return Ok(hit.clone());
    }
    let kids = e
        .children()
        .into_iter()
        .map(|c| go(c, b, cache))
        .collect::<Result<Vec<_>, _>>()?;
    let out = match e.node() {
        Node::Func(f) if b.funcs.contains_key(&f.name) => {
            let (ps, body) = &b.funcs[&f.name];
            if ps.len() != kids.len() {
                return Err(SymError::Arity {
                    name: f.name.to_string(),
                    expected: ps.len(),
                    got: kids.len(),
                });
            }
            let mut body = canonicalize(body);
            for (k, d) in f.deriv.iter().enumerate() {
                for _ in 0..d.unsigned_abs() {
                    body = if *d > 0 {
                        derive(&body, &ps[k])
                    } else {
                        integrate(&body, &ps[k])?
                    };
                }
            }
            let mut inner = Bindings::new();
            for (p, a) in ps.iter().zip(kids) {
                inner.vars.insert(p.clone(), a);
            }
            let mut c2 = BTreeMap::new();
            go(&body, &inner, &mut c2)?
        }
        _ => e.with_children(kids),
    };
    cache.insert(e.clone(), out.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_for_opaque() {
        let u = Expr::var("u");
        let fu = derive(&Expr::func("F", &["u"]), "u");
        let b = Bindings::new().func("F", &["u"], Expr::exp(u.clone()));
        assert_eq!(substitute(&fu, &b).unwrap(), canonicalize(&Expr::exp(u)));
    }

    #[test]
    fn affine_change_of_variable() {
        let r = Expr::param("r");
        let s = Expr::param("s");
        let w = Expr::var("w");
        let target = &(&r * &w) + &s;
        let b = Bindings::new().var("u", target.clone());
        assert_eq!(substitute(&Expr::var("u"), &b).unwrap(), target);
    }

    #[test]
    fn cycle_rejected() {
        let b = Bindings::new()
            .var("x", Expr::var("y"))
            .var("y", Expr::var("x"));
        assert!(matches!(
            substitute(&Expr::var("x"), &b),
            Err(SymError::CircularBinding(_))
        ));
    }

    #[test]
    fn antiderivative_slot_integrates_body() {
        let f = Expr::func("F", &["u"]);
        let fint = super::super::derive::bump_slot(f.as_func().unwrap(), 0, -1);
        let u = Expr::var("u");
        let b = Bindings::new().func("F", &["u"], &u * &u);
        let got = substitute(&fint, &b).unwrap();
        assert_eq!(got, &u.powi(3) * &Expr::frac(1, 3));
    }
}
