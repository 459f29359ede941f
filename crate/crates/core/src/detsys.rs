//! Determining equations for point symmetries of `u_xy = F`.

use std::collections::BTreeMap;

use num_traits::{One, ToPrimitive};
use serde_json::{json, Value};

use crate::jetcalc::{
    jets_in, prolong2, reduce_mod_equation, JetCoordinate, JetError, PointVectorField, SideRelation,
};
use crate::symkernel::{
    decompose_term, product_of, sum_of, terms, Context, Expr, FuncApp, Node, SymError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FMode {
    OpaqueU,
    OpaqueUx,
    ClosedForm,
}

/// The labelling function of `u_xy = F`.
#[derive(Clone, Debug)]
pub struct FSpec {
    pub mode: FMode,
    pub name: String,
    pub body: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetError {
    #[error("closed-form F may only depend on u and u_x, found {0}")]
    BadJet(String),
    #[error("coefficient still contains the jet coordinate {0}")]
    BasisIncomplete(String),
    #[error("split_system needs an opaque F")]
    NotOpaque,
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

impl FSpec {
    pub fn opaque_u() -> Self {
        FSpec {
            mode: FMode::OpaqueU,
            name: "F".into(),
            body: None,
        }
    }

    pub fn opaque_ux() -> Self {
        FSpec {
            mode: FMode::OpaqueUx,
            name: "F".into(),
            body: None,
        }
    }

    pub fn closed(body: Expr) -> Result<Self, DetError> {
        for jc in jets_in(&body) {
            if jc.order() > 1 || jc == JetCoordinate::new(0, 1) {
                return Err(DetError::BadJet(jc.name()));
            }
        }
        Ok(FSpec {
            mode: FMode::ClosedForm,
            name: "F".into(),
            body: Some(body),
        })
    }

    /// Closed form from text in the expression grammar.
    pub fn parse(text: &str) -> Result<Self, DetError> {
        Self::closed(crate::symkernel::parse(text)?)
    }

    /// The classification variable of an opaque family.
    pub fn class_var(&self) -> &'static str {
        match self.mode {
            FMode::OpaqueUx => "u_x",
            _ => "u",
        }
    }

    /// Right-hand side of the equation as an expression.
    pub fn rhs(&self) -> Expr {
        match self.mode {
            FMode::OpaqueU => Expr::func(&self.name, &["u"]),
            FMode::OpaqueUx => Expr::func(&self.name, &["u_x"]),
            FMode::ClosedForm => self.body.clone().expect("closed form has a body"),
        }
    }

    /// Parsing context that knows `F` with the right argument.
    pub fn context(&self) -> Context {
        match self.mode {
            FMode::OpaqueU => Context::new().func(&self.name, &["u"]),
            FMode::OpaqueUx => Context::new().func(&self.name, &["u_x"]),
            FMode::ClosedForm => Context::new(),
        }
    }

    pub fn depends_on_u(&self) -> bool {
        self.rhs().contains_var("u")
    }

    pub fn depends_on_ux(&self) -> bool {
        self.rhs().contains_var("u_x")
    }
}

/// `pr v (u_xy - F)` reduced on the equation.
pub fn symmetry_residual(f: &FSpec, v: &PointVectorField) -> Result<Expr, DetError> {
    symmetry_residual_with(f, v, &[])
}

pub fn symmetry_residual_with(
    f: &FSpec,
    v: &PointVectorField,
    sides: &[SideRelation],
) -> Result<Expr, DetError> {
    let rhs = f.rhs();
    let delta = &JetCoordinate::new(1, 1).var() - &rhs;
    let raw = prolong2(v).apply(&delta);
    Ok(reduce_mod_equation(&raw, &rhs, sides)?)
}

/// Exponent vector over `basis` and the coefficient of that monomial.
pub type Coefficients = BTreeMap<Vec<u32>, Expr>;

/// Collect `e` as a polynomial in the variables `basis`. Any other jet
/// coordinate in a coefficient, besides those in `allowed`, is an error.
pub fn collect(e: &Expr, basis: &[&str], allowed: &[&str]) -> Result<Coefficients, DetError> {
    let mut groups: BTreeMap<Vec<u32>, Vec<Expr>> = BTreeMap::new();
    for t in terms(e) {
        let (c, factors) = decompose_term(&t);
        let mut key = vec![0u32; basis.len()];
        let mut rest = vec![Expr::rational(c)];
        for (b, x) in factors {
            let slot = b.as_var().and_then(|v| basis.iter().position(|s| **s == **v));
            let power = x
                .as_rational()
                .filter(|r| r.denom().is_one())
                .and_then(|r| r.numer().to_u32());
            match (slot, power) {
                (Some(k), Some(n)) => key[k] += n,
                _ => {
                    for jc in jets_in(&b).into_iter().chain(jets_in(&x)) {
                        let name = jc.name();
                        if jc.order() > 0 && !allowed.contains(&name.as_str()) {
                            return Err(DetError::BasisIncomplete(name));
                        }
                    }
                    rest.push(Expr::pow(b, x));
                }
            }
        }
        groups.entry(key).or_default().push(product_of(rest));
    }
    Ok(groups
        .into_iter()
        .map(|(k, v)| (k, sum_of(v)))
        .filter(|(_, v)| !v.is_zero())
        .collect())
}

/// Rebuild `Σ coefficient · monomial`.
pub fn uncollect(c: &Coefficients, basis: &[&str]) -> Expr {
    sum_of(c.iter().map(|(k, v)| {
        let mono = product_of(
            k.iter()
                .zip(basis)
                .map(|(n, b)| Expr::var(b).powi(*n as i64)),
        );
        v * &mono
    }))
}

/// If `e` is a rational multiple of a single application of one of `names`,
/// return that application.
fn single_unknown(e: &Expr, names: &[&str]) -> Option<FuncApp> {
    let ts = terms(e);
    if ts.len() != 1 {
        return None;
    }
    let (_, fs) = decompose_term(&ts[0]);
    match fs.as_slice() {
        [(b, x)] if x.is_one() => match b.node() {
            Node::Func(f) if names.contains(&&*f.name) && f.has_default_args() => Some(f.clone()),
            _ => None,
        },
        _ => None,
    }
}

/// Replace `app` and all its further derivatives by zero.
fn kill(e: &Expr, app: &FuncApp) -> Expr {
    e.map_bottom_up(&mut |n| match n.node() {
        Node::Func(f)
            if f.name == app.name
                && f.has_default_args()
                && f.deriv.iter().zip(&app.deriv).all(|(a, b)| a >= b) =>
        {
            Expr::zero()
        }
        _ => n.clone(),
    })
    .canon()
}

/// Split `residual` over `basis` and propagate every coefficient that is a
/// lone derivative of an unknown. Returns the forced zero derivatives and the
/// residual with them removed.
pub fn propagate(
    residual: &Expr,
    basis: &[&str],
    allowed: &[&str],
    unknowns: &[&str],
) -> Result<(Vec<Expr>, Expr), DetError> {
    let mut found: Vec<FuncApp> = Vec::new();
    let mut cur = residual.clone();
    loop {
        let coeffs = collect(&cur, basis, allowed)?;
        let fresh: Vec<FuncApp> = coeffs
            .values()
            .filter_map(|c| single_unknown(c, unknowns))
            .collect();
        if fresh.is_empty() {
            break;
        }
        for app in fresh {
            if found.iter().any(|g| {
                g.name == app.name && app.deriv.iter().zip(&g.deriv).all(|(a, b)| a >= b)
            }) {
                continue;
            }
            cur = kill(&cur, &app);
            found.push(app);
        }
    }
    let mut out: Vec<Expr> = found
        .into_iter()
        .map(|f| Expr::new(Node::Func(f)).canon())
        .collect();
    out.sort();
    Ok((out, cur))
}

/// Output of [`split_system`].
#[derive(Clone, Debug)]
pub struct DeterminingSystem {
    pub family: FMode,
    /// Symbol declarations, e.g. `xi(x)`.
    pub unknowns: Vec<String>,
    /// Expressions required to vanish identically.
    pub constraints: Vec<Expr>,
    /// The reduced residual after the ansatz, with `g` constant when forced.
    pub residual: Expr,
    /// The residual before coefficient propagation, for audit.
    pub raw_residual: Expr,
    /// Coefficients of the reduced residual that are not the residual itself.
    pub leftover: Vec<Expr>,
}

impl DeterminingSystem {
    pub fn to_json(&self) -> Value {
        json!({
            "family": match self.family {
                FMode::OpaqueU => "u",
                FMode::OpaqueUx => "ux",
                FMode::ClosedForm => "closed",
            },
            "unknowns": self.unknowns,
            "constraints": self.constraints.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "residual": self.residual.to_string(),
            "raw_residual": self.raw_residual.to_string(),
        })
    }
}

/// Generate and split the determining equations for an opaque family.
pub fn split_system(f: &FSpec) -> Result<DeterminingSystem, DetError> {
    let ctx = Context::new()
        .func("xi", &["x", "y", "u"])
        .func("eta", &["x", "y", "u"])
        .func("phi", &["x", "y", "u"]);
    let p = |s: &str| ctx.parse(s).expect("fixed text");
    let (basis1, allowed): (Vec<&str>, Vec<&str>) = match f.mode {
        FMode::OpaqueU => (vec!["u_x", "u_y", "u_xx", "u_yy"], vec![]),
        FMode::OpaqueUx => (vec!["u_x", "u_y", "u_xx", "u_yy"], vec!["u_x"]),
        FMode::ClosedForm => return Err(DetError::NotOpaque),
    };
    let generic = PointVectorField::new(p("xi"), p("eta"), p("phi"))?;
    let raw = symmetry_residual(f, &generic)?;
    let (found, _) = propagate(&raw, &basis1, &allowed, &["xi", "eta", "phi"])?;

    // phi_{..u} = 0 is g_{..} = 0 once phi = g u + h
    let mut constraints = Vec::new();
    let mut on_g = Vec::new();
    for c in found {
        match c.as_func() {
            Some(f) if &*f.name == "phi" && f.deriv[2] == 1 => {
                on_g.push(Expr::new(Node::Func(FuncApp {
                    name: crate::symkernel::sym("g"),
                    params: vec![crate::symkernel::sym("x"), crate::symkernel::sym("y")].into(),
                    deriv: vec![f.deriv[0], f.deriv[1]],
                    args: vec![Expr::var("x"), Expr::var("y")],
                })))
            }
            _ => constraints.push(c),
        }
    }

    // re-express with xi(x), eta(y), phi = g u + h
    let ctx2 = f
        .context()
        .func("xi", &["x"])
        .func("eta", &["y"])
        .func("g", &["x", "y"])
        .func("h", &["x", "y"]);
    let q = |s: &str| ctx2.parse(s).expect("fixed text");
    let ansatz = PointVectorField::new(q("xi"), q("eta"), q("g*u + h"))?;
    let mut r2 = symmetry_residual(f, &ansatz)?;
    for g in &on_g {
        r2 = kill(&r2, g.as_func().expect("built as a function"));
    }
    let basis2: Vec<&str> = match f.mode {
        FMode::OpaqueU => vec!["u_x", "u_y"],
        _ => vec!["u_y"],
    };
    let (g_more, r3) = propagate(&r2, &basis2, &allowed, &["g"])?;
    on_g.extend(g_more);
    on_g.sort();
    on_g.dedup();
    constraints.extend(on_g);

    let mut unknowns = vec!["xi(x)".to_string(), "eta(y)".to_string(), "h(x, y)".to_string()];
    let residual = match f.mode {
        FMode::OpaqueU => {
            unknowns.push("A".into());
            r3.map_bottom_up(&mut |n| match n.node() {
                Node::Func(g) if &*g.name == "g" => Expr::param("A"),
                _ => n.clone(),
            })
            .canon()
        }
        _ => {
            unknowns.push("g(y)".into());
            r3.map_bottom_up(&mut |n| match n.node() {
                Node::Func(g) if &*g.name == "g" => {
                    let mut g2 = g.clone();
                    g2.params = vec![crate::symkernel::sym("y")].into();
                    g2.deriv = vec![g.deriv[1]];
                    g2.args = vec![Expr::var("y")];
                    Expr::new(Node::Func(g2))
                }
                _ => n.clone(),
            })
            .canon()
        }
    };
    let leftover: Vec<Expr> = collect(&residual, &basis2, &allowed)?
        .into_iter()
        .filter(|(k, _)| k.iter().any(|n| *n > 0))
        .map(|(_, v)| v)
        .collect();
    Ok(DeterminingSystem {
        family: f.mode,
        unknowns,
        constraints,
        residual,
        raw_residual: raw,
        leftover,
    })
}

/// The principal symmetry family admitted for every `F` of an opaque family.
pub fn arbitrary_f_symmetries(f: &FSpec) -> Result<PointVectorField, DetError> {
    let ctx = Context::new().func("P", &["y"]);
    let p = |s: &str| ctx.parse(s).expect("fixed text");
    Ok(match f.mode {
        FMode::OpaqueU => PointVectorField::new(p("k_1*x + k_2"), p("k_3 - k_1*y"), Expr::zero())?,
        FMode::OpaqueUx => PointVectorField::new(p("k_1*x + k_2"), p("k_3"), p("k_1*u + P"))?,
        FMode::ClosedForm => return Err(DetError::NotOpaque),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::{equivalent, parse};
    use proptest::prelude::*;

    fn names(d: &DeterminingSystem) -> Vec<String> {
        let mut v: Vec<String> = d.constraints.iter().map(|c| c.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn residual_examples() {
        let f = FSpec::opaque_u();
        let dx = PointVectorField::new(Expr::one(), Expr::zero(), Expr::zero()).unwrap();
        assert!(symmetry_residual(&f, &dx).unwrap().is_zero());

        let f = FSpec::parse("exp(u)").unwrap();
        let v = PointVectorField::new(parse("x").unwrap(), Expr::zero(), Expr::int(-1)).unwrap();
        assert!(symmetry_residual(&f, &v).unwrap().is_zero());
        let v = PointVectorField::new(parse("x").unwrap(), Expr::zero(), Expr::zero()).unwrap();
        assert_eq!(symmetry_residual(&f, &v).unwrap(), parse("-exp(u)").unwrap());
    }

    #[test]
    fn closed_form_jets_checked() {
        assert_eq!(FSpec::parse("u_y").unwrap_err(), DetError::BadJet("u_y".into()));
        assert!(FSpec::parse("u_x^2 + u").is_ok());
        assert!(matches!(split_system(&FSpec::parse("u").unwrap()), Err(DetError::NotOpaque)));
    }

    #[test]
    fn split_of_u() {
        let d = split_system(&FSpec::opaque_u()).unwrap();
        assert_eq!(names(&d), ["eta_u", "eta_x", "g_x", "g_y", "phi_uu", "xi_u", "xi_y"]);
        let ctx = Context::new()
            .func("F", &["u"])
            .func("xi", &["x"])
            .func("eta", &["y"])
            .func("h", &["x", "y"]);
        let printed = ctx
            .parse("-F_u*h - u*F_u*A + F*(A - eta_y - xi_x) + h_xy")
            .unwrap();
        assert!(equivalent(&d.residual, &printed));
        assert!(d.leftover.is_empty());
    }

    #[test]
    fn split_of_ux() {
        let d = split_system(&FSpec::opaque_ux()).unwrap();
        assert_eq!(names(&d), ["eta_u", "eta_x", "g_x", "phi_uu", "xi_u", "xi_y"]);
        let ctx = Context::new()
            .func("F", &["u_x"])
            .func("xi", &["x"])
            .func("eta", &["y"])
            .func("g", &["y"])
            .func("h", &["x", "y"]);
        let printed = ctx
            .parse("u_x*g_y + F*(g - eta_y - xi_x) + u_x*F_{u_x}*(xi_x - g) - F_{u_x}*h_x + h_xy")
            .unwrap();
        assert!(equivalent(&d.residual, &printed));
    }

    #[test]
    fn xi_u_forced_by_uy_uxx() {
        let ctx = Context::new()
            .func("xi", &["x", "y", "u"])
            .func("eta", &["x", "y", "u"])
            .func("phi", &["x", "y", "u"]);
        let v = PointVectorField::new(
            ctx.parse("xi").unwrap(),
            ctx.parse("eta").unwrap(),
            ctx.parse("phi").unwrap(),
        )
        .unwrap();
        let r = symmetry_residual(&FSpec::opaque_u(), &v).unwrap();
        let basis = ["u_x", "u_y", "u_xx", "u_yy"];
        let c = collect(&r, &basis, &[]).unwrap();
        assert_eq!(c[&vec![0, 1, 1, 0]], ctx.parse("-xi_u").unwrap());
    }

    #[test]
    fn round_trip_through_ansatz() {
        for (f, phi) in [(FSpec::opaque_u(), "A*u + h"), (FSpec::opaque_ux(), "g*u + h")] {
            let d = split_system(&f).unwrap();
            let ctx = f
                .context()
                .func("xi", &["x"])
                .func("eta", &["y"])
                .func("g", &["y"])
                .func("h", &["x", "y"]);
            let v = PointVectorField::new(
                ctx.parse("xi").unwrap(),
                ctx.parse("eta").unwrap(),
                ctx.parse(phi).unwrap(),
            )
            .unwrap();
            assert_eq!(symmetry_residual(&f, &v).unwrap(), d.residual);
        }
    }

    #[test]
    fn basis_incomplete() {
        let e = parse("u_x*u_y + u_xx").unwrap();
        assert_eq!(
            collect(&e, &["u_y"], &[]).unwrap_err(),
            DetError::BasisIncomplete("u_x".into())
        );
    }

    #[test]
    fn principal_algebra() {
        for f in [FSpec::opaque_u(), FSpec::opaque_ux()] {
            let v = arbitrary_f_symmetries(&f).unwrap();
            assert!(symmetry_residual(&f, &v).unwrap().is_zero());
        }
        let v = arbitrary_f_symmetries(&FSpec::opaque_u()).unwrap();
        assert_eq!(v.eta, parse("k_3 - k_1*y").unwrap());
    }

    #[test]
    fn json_shape() {
        let d = split_system(&FSpec::opaque_u()).unwrap();
        let j = d.to_json();
        assert!(j["constraints"].is_array());
        assert!(j["residual"].is_string());
        assert_eq!(j["unknowns"][0], "xi(x)");
    }

    const CLOSED: &[(&str, &str, &str, &str)] = &[
        ("exp(u)", "x", "0", "-1"),
        ("exp(u)", "0", "y", "-1"),
        ("u^3", "x", "0", "-1/2*u"),
        ("u_x^2", "0", "0", "1"),
        ("u_x^2", "x", "0", "u"),
        ("u", "x", "-y", "0"),
        ("sin(u)", "1", "0", "0"),
    ];

    proptest! {
        #[test]
        fn criterion_is_linear(k in 0..CLOSED.len(), a in -7i64..7, b in 1i64..5) {
            let (f, xi, eta, phi) = CLOSED[k];
            let f = FSpec::parse(f).unwrap();
            let v = PointVectorField::new(parse(xi).unwrap(), parse(eta).unwrap(), parse(phi).unwrap()).unwrap();
            prop_assert!(symmetry_residual(&f, &v).unwrap().is_zero());
            let s = &Expr::frac(a, b) * &Expr::param("a");
            prop_assert!(symmetry_residual(&f, &v.scale(&s)).unwrap().is_zero());
        }

        #[test]
        fn collect_reconstructs(cs in proptest::collection::vec((-4i64..4, 0u32..3, 0u32..3, 0u32..2), 1..6)) {
            let basis = ["u_x", "u_y", "u_xx"];
            let e = sum_of(cs.iter().map(|(c, i, j, k)| {
                product_of([
                    Expr::int(*c),
                    Expr::func("F", &["u"]),
                    Expr::var("u_x").powi(*i as i64),
                    Expr::var("u_y").powi(*j as i64),
                    Expr::var("u_xx").powi(*k as i64),
                ])
            }));
            let c = collect(&e, &basis, &[]).unwrap();
            prop_assert_eq!(uncollect(&c, &basis), e);
        }
    }
}
