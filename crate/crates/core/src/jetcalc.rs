//! Jet space over (x, y) with one dependent variable u.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{Map, Value};

use crate::symkernel::{
    derive, jet_name, parse_jet_name, substitute, sum_of, Bindings, Expr, Node, SymError,
};

/// Highest jet order any reduction may produce.
pub const MAX_JET_ORDER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetCoordinate {
    pub i: usize,
    pub j: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn var(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }
}

impl JetCoordinate {
    pub const U: JetCoordinate = JetCoordinate { i: 0, j: 0 };

    pub fn new(i: usize, j: usize) -> Self {
        JetCoordinate { i, j }
    }

    pub fn order(self) -> usize {
        self.i + self.j
    }

    pub fn name(self) -> String {
        jet_name(self.i, self.j)
    }

    pub fn var(self) -> Expr {
        Expr::var(&self.name())
    }

    pub fn from_name(name: &str) -> Option<Self> {
        parse_jet_name(name).map(|(i, j)| JetCoordinate { i, j })
    }

    pub fn shift(self, axis: Axis) -> Self {
        match axis {
            Axis::X => JetCoordinate::new(self.i + 1, self.j),
            Axis::Y => JetCoordinate::new(self.i, self.j + 1),
        }
    }

    pub fn is_mixed(self) -> bool {
        self.i >= 1 && self.j >= 1
    }
}

impl fmt::Display for JetCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("jet order {order} exceeds the maximum {max}")]
    OrderBound { order: usize, max: usize },
    #[error("vector field component {0} depends on derivatives of u")]
    NotPointField(&'static str),
    #[error("equation right-hand side {0} contains a mixed derivative")]
    MixedRhs(String),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Jet coordinates occurring in `e`, including those inside function arguments.
pub fn jets_in(e: &Expr) -> BTreeSet<JetCoordinate> {
    e.free_vars().iter().filter_map(|v| JetCoordinate::from_name(v)).collect()
}

pub fn max_order(e: &Expr) -> usize {
    jets_in(e).iter().map(|j| j.order()).max().unwrap_or(0)
}

/// `D_axis e`: explicit partial plus the chain rule through every jet.
pub fn total_derivative(e: &Expr, axis: Axis) -> Expr {
    let mut parts = vec![derive(e, axis.var())];
    for jc in jets_in(e) {
        let d = derive(e, &jc.name());
        if !d.is_zero() {
            parts.push(&d * &jc.shift(axis).var());
        }
    }
    sum_of(parts)
}

/// `D_x^i D_y^j e`.
pub fn total_derivative_n(e: &Expr, i: usize, j: usize) -> Expr {
    let mut out = e.clone();
    for _ in 0..i {
        out = total_derivative(&out, Axis::X);
    }
    for _ in 0..j {
        out = total_derivative(&out, Axis::Y);
    }
    out
}

/// `ξ ∂_x + η ∂_y + φ ∂_u` with components depending on (x, y, u) only.
#[derive(Clone, Debug, PartialEq)]
pub struct PointVectorField {
    pub xi: Expr,
    pub eta: Expr,
    pub phi: Expr,
}

impl PointVectorField {
    pub fn new(xi: Expr, eta: Expr, phi: Expr) -> Result<Self, JetError> {
        for (name, c) in [("xi", &xi), ("eta", &eta), ("phi", &phi)] {
            if max_order(c) > 0 {
                return Err(JetError::NotPointField(name));
            }
        }
        Ok(PointVectorField { xi, eta, phi })
    }

    /// Characteristic `φ - ξ u_x - η u_y`.
    pub fn characteristic(&self) -> Expr {
        let ux = JetCoordinate::new(1, 0).var();
        let uy = JetCoordinate::new(0, 1).var();
        &(&self.phi - &(&self.xi * &ux)) - &(&self.eta * &uy)
    }

    pub fn scale(&self, a: &Expr) -> PointVectorField {
        PointVectorField {
            xi: a * &self.xi,
            eta: a * &self.eta,
            phi: a * &self.phi,
        }
    }

    pub fn add(&self, o: &PointVectorField) -> PointVectorField {
        PointVectorField {
            xi: &self.xi + &o.xi,
            eta: &self.eta + &o.eta,
            phi: &self.phi + &o.phi,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "xi": self.xi.to_string(),
            "eta": self.eta.to_string(),
            "phi": self.phi.to_string(),
        })
    }
}

/// Second prolongation: coefficients for every jet of order <= 2.
#[derive(Clone, Debug, PartialEq)]
pub struct ProlongedField {
    pub base: PointVectorField,
    pub coeffs: BTreeMap<JetCoordinate, Expr>,
}

impl ProlongedField {
    pub fn coeff(&self, i: usize, j: usize) -> &Expr {
        &self.coeffs[&JetCoordinate::new(i, j)]
    }

    /// Apply the prolonged field to a differential function of order <= 2.
    pub fn apply(&self, e: &Expr) -> Expr {
        let mut parts = vec![
            &self.base.xi * &derive(e, "x"),
            &self.base.eta * &derive(e, "y"),
        ];
        for jc in jets_in(e) {
            if let Some(c) = self.coeffs.get(&jc) {
                parts.push(c * &derive(e, &jc.name()));
            }
        }
        sum_of(parts)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.coeffs {
            m.insert(k.name(), Value::String(v.to_string()));
        }
        Value::Object(m)
    }
}

/// `φ^{(i,j)} = D_x^i D_y^j W + ξ u_{(i+1,j)} + η u_{(i,j+1)}`.
pub fn prolong2(v: &PointVectorField) -> ProlongedField {
    let w = v.characteristic();
    let mut coeffs = BTreeMap::new();
    for order in 0..=2 {
        for i in 0..=order {
            let j = order - i;
            let c = if order == 0 {
                v.phi.clone()
            } else {
                let jc = JetCoordinate::new(i, j);
                sum_of([
                    total_derivative_n(&w, i, j),
                    &v.xi * &jc.shift(Axis::X).var(),
                    &v.eta * &jc.shift(Axis::Y).var(),
                ])
            };
            coeffs.insert(JetCoordinate::new(i, j), c);
        }
    }
    ProlongedField {
        base: v.clone(),
        coeffs,
    }
}

/// Euler operator with respect to u.
pub fn euler_u(e: &Expr) -> Expr {
    let mut parts = Vec::new();
    for jc in jets_in(e) {
        let d = derive(e, &jc.name());
        if d.is_zero() {
            continue;
        }
        let t = total_derivative_n(&d, jc.i, jc.j);
        parts.push(if jc.order() % 2 == 1 { -t } else { t });
    }
    sum_of(parts)
}

/// A rewrite `name_{xy} -> rhs` for a function of (x, y), applied to every
/// mixed derivative of `name`.
#[derive(Clone, Debug)]
pub struct SideRelation {
    pub name: String,
    pub rhs: Expr,
}

impl SideRelation {
    pub fn new(name: &str, rhs: Expr) -> Self {
        SideRelation {
            name: name.to_string(),
            rhs,
        }
    }

    fn apply_once(&self, e: &Expr) -> (Expr, bool) {
        let mut changed = false;
        let out = e.map_bottom_up(&mut |n| {
            if let Node::Func(f) = n.node() {
                if *f.name == *self.name && f.has_default_args() && f.params.len() == 2 {
                    let (a, b) = (f.deriv[0], f.deriv[1]);
                    if a >= 1 && b >= 1 {
                        changed = true;
                        let mut r = self.rhs.clone();
                        for _ in 1..a {
                            r = derive(&r, &f.params[0]);
                        }
                        for _ in 1..b {
                            r = derive(&r, &f.params[1]);
                        }
                        return r;
                    }
                }
            }
            n.clone()
        });
        (out.canon(), changed)
    }

    pub fn apply(&self, e: &Expr) -> Expr {
        let mut cur = e.clone();
        for _ in 0..32 {
            let (next, changed) = self.apply_once(&cur);
            cur = next;
            if !changed {
                break;
            }
        }
        cur
    }
}

/// Rewrite every mixed jet `u_{(i,j)}`, `i, j >= 1`, through `u_xy = rhs` and
/// its total derivatives. `rhs` must be free of mixed jets.
pub fn reduce_mod_equation(e: &Expr, rhs: &Expr, sides: &[SideRelation]) -> Result<Expr, JetError> {
    let mut reducer = Reducer::new(rhs)?;
    let out = reducer.reduce(e)?;
    Ok(sides.iter().fold(out, |acc, s| s.apply(&acc)))
}

/// Memoized reduction modulo `u_xy = rhs`.
pub struct Reducer {
    rhs: Expr,
    memo: BTreeMap<JetCoordinate, Expr>,
}

impl Reducer {
    pub fn new(rhs: &Expr) -> Result<Self, JetError> {
        if jets_in(rhs).iter().any(|j| j.is_mixed()) {
            return Err(JetError::MixedRhs(rhs.to_string()));
        }
        Ok(Reducer {
            rhs: rhs.canon(),
            memo: BTreeMap::new(),
        })
    }

    fn value(&mut self, jc: JetCoordinate) -> Result<Expr, JetError> {
        if jc.order() > MAX_JET_ORDER {
            return Err(JetError::OrderBound {
                order: jc.order(),
                max: MAX_JET_ORDER,
            });
        }
        if let Some(v) = self.memo.get(&jc) {
            return Ok(v.clone());
        }
        let v = if jc == JetCoordinate::new(1, 1) {
            self.rhs.clone()
        } else if jc.i > 1 {
            let prev = self.value(JetCoordinate::new(jc.i - 1, jc.j))?;
            self.reduce(&total_derivative(&prev, Axis::X))?
        } else {
            let prev = self.value(JetCoordinate::new(jc.i, jc.j - 1))?;
            self.reduce(&total_derivative(&prev, Axis::Y))?
        };
        self.memo.insert(jc, v.clone());
        Ok(v)
    }

    pub fn reduce(&mut self, e: &Expr) -> Result<Expr, JetError> {
        let jets = jets_in(e);
        if let Some(big) = jets.iter().find(|j| j.order() > MAX_JET_ORDER) {
            return Err(JetError::OrderBound {
                order: big.order(),
                max: MAX_JET_ORDER,
            });
        }
        let mixed: Vec<JetCoordinate> = jets.into_iter().filter(|j| j.is_mixed()).collect();
        if mixed.is_empty() {
            return Ok(e.canon());
        }
        let mut b = Bindings::new();
        for jc in mixed {
            let v = self.value(jc)?;
            b = b.var(&jc.name(), v);
        }
        Ok(substitute(e, &b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::{parse, product_of, Context};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn total_derivative_examples() {
        assert_eq!(total_derivative(&p("u_x^2/2"), Axis::Y), p("u_x*u_xy"));
        assert_eq!(total_derivative(&p("x*u"), Axis::X), p("u + x*u_x"));
        assert_eq!(total_derivative(&p("-u - u^3/3"), Axis::X), p("-u_x*(1 + u^2)"));
    }

    #[test]
    fn translation_and_scaling_prolong() {
        let t = PointVectorField::new(Expr::one(), Expr::zero(), Expr::zero()).unwrap();
        let pr = prolong2(&t);
        for (k, c) in &pr.coeffs {
            if k.order() > 0 {
                assert!(c.is_zero(), "{k}: {c}");
            }
        }
        let s = PointVectorField::new(Expr::zero(), Expr::zero(), p("u")).unwrap();
        assert_eq!(prolong2(&s).coeff(1, 1), &p("u_xy"));
        let d = PointVectorField::new(p("x"), Expr::zero(), Expr::zero()).unwrap();
        assert_eq!(prolong2(&d).coeff(1, 1), &p("-u_xy"));
    }

    #[test]
    fn euler_examples() {
        assert_eq!(euler_u(&p("u_x*u_y")), p("-2*u_xy"));
        let e = p("u_x*(u_xy - exp(u))");
        assert!(euler_u(&e).is_zero());
    }

    #[test]
    fn reduction_examples() {
        let rhs = p("exp(u)");
        assert!(reduce_mod_equation(&p("u_xy - exp(u)"), &rhs, &[]).unwrap().is_zero());
        assert_eq!(reduce_mod_equation(&p("u_xxy"), &rhs, &[]).unwrap(), p("exp(u)*u_x"));
        let h = Context::new().func("h", &["x", "y"]);
        let side = SideRelation::new("h", h.parse("h").unwrap());
        let e = h.parse("h_xy").unwrap();
        assert_eq!(reduce_mod_equation(&e, &p("u"), &[side]).unwrap(), h.parse("h").unwrap());
    }

    #[test]
    fn order_bound() {
        let e = p("u_xxxyyy");
        assert!(matches!(
            reduce_mod_equation(&e, &p("u"), &[]),
            Err(JetError::OrderBound { .. })
        ));
    }

    use proptest::prelude::*;

    fn term(c: i64, e: &[u32], wrap: u8) -> Expr {
        let vars = ["x", "y", "u", "u_x", "u_y", "u_xx"];
        let m = product_of(vars.iter().zip(e).map(|(v, k)| Expr::var(v).powi(*k as i64)));
        let inner = match wrap {
            0 => m,
            1 => Expr::exp(m),
            2 => Expr::sin(m),
            _ => Expr::func("G", &["u"]) * m,
        };
        &Expr::int(c) * &inner
    }

    fn random_expr() -> impl Strategy<Value = Expr> {
        proptest::collection::vec((-4i64..=4, proptest::collection::vec(0u32..3, 6), 0u8..4), 1..4)
            .prop_map(|ts| sum_of(ts.iter().map(|(c, e, w)| term(*c, e, *w))))
    }

    fn random_field() -> impl Strategy<Value = PointVectorField> {
        let base = || {
            proptest::collection::vec((-3i64..=3, proptest::collection::vec(0u32..3, 3)), 1..3).prop_map(|ts| {
                sum_of(ts.iter().map(|(c, e)| {
                    let m = product_of(["x", "y", "u"].iter().zip(e).map(|(v, k)| Expr::var(v).powi(*k as i64)));
                    &Expr::int(*c) * &m
                }))
            })
        };
        (base(), base(), base()).prop_map(|(a, b, c)| PointVectorField::new(a, b, c).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn total_derivatives_commute(e in random_expr()) {
            let xy = total_derivative(&total_derivative(&e, Axis::X), Axis::Y);
            let yx = total_derivative(&total_derivative(&e, Axis::Y), Axis::X);
            prop_assert!((xy - yx).canon().is_zero());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn prolongation_is_linear(v in random_field(), w in random_field(), c in -3i64..=3) {
            let target = p("u_xy - u_x^2*u + x*u_y");
            let sum = v.add(&w.scale(&Expr::int(c)));
            let lhs = prolong2(&sum).apply(&target);
            let rhs = prolong2(&v).apply(&target) + &Expr::int(c) * &prolong2(&w).apply(&target);
            prop_assert!((lhs - rhs).canon().is_zero());
        }
    }
}
