//! Conservation laws `D_x Φ + D_y Ψ = Q·(u_xy − F)`: multipliers, fluxes,
//! the homotopy inversion of the divergence, and the T-equation attached to
//! the multipliers of `u_xy = u_x²`.

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::detsys::{collect, DetError, FSpec};
use crate::jetcalc::{
    euler_u, jets_in, prolong2, reduce_mod_equation, total_derivative, total_derivative_n, Axis,
    JetCoordinate, JetError, PointVectorField,
};
use crate::report::{field, load_catalog, CatalogError, EntryReport, Report, Status};
use crate::symkernel::{
    decompose_term, definite, derive, integrate, probe_zero, product_of, substitute, sum_of, terms,
    Bindings, Context, Expr, Node, ProbeOutcome, SymError, DEFAULT_SEED,
};

#[derive(Debug, thiserror::Error)]
pub enum ClawError {
    #[error("no closed-form flux: {0}")]
    Integration(String),
    #[error("not a multiplier, residual {0}")]
    NotMultiplier(String),
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// A flux vector `Θ = (Φ, Ψ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxVector {
    pub phi: Expr,
    pub psi: Expr,
}

impl FluxVector {
    pub fn new(phi: Expr, psi: Expr) -> Self {
        FluxVector {
            phi: phi.canon(),
            psi: psi.canon(),
        }
    }

    pub fn divergence(&self) -> Expr {
        (total_derivative(&self.phi, Axis::X) + total_derivative(&self.psi, Axis::Y)).canon()
    }

    pub fn sub(&self, o: &FluxVector) -> FluxVector {
        FluxVector::new(&self.phi - &o.phi, &self.psi - &o.psi)
    }

    pub fn to_json(&self) -> Value {
        json!({ "phi": self.phi.to_string(), "psi": self.psi.to_string() })
    }
}

fn delta(f: &FSpec) -> Expr {
    &JetCoordinate::new(1, 1).var() - &f.rhs()
}

/// `E_u(q·(u_xy − F))`; zero iff `q` is a multiplier.
pub fn multiplier_residual(q: &Expr, f: &FSpec) -> Expr {
    euler_u(&(q * &delta(f))).canon()
}

/// Zero test: canonical form first, randomized probing as fallback.
pub fn vanishes(e: &Expr) -> Option<bool> {
    let e = e.canon();
    if e.is_zero() {
        return Some(true);
    }
    match probe_zero(&e, 12, DEFAULT_SEED) {
        ProbeOutcome::Equal => Some(true),
        ProbeOutcome::NotEqual => Some(false),
        ProbeOutcome::Undecided => None,
    }
}

/// Which first-order jet the generic multiplier may depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiplierAnsatz {
    Ux,
    Uy,
}

impl MultiplierAnsatz {
    fn jet(self) -> &'static str {
        match self {
            MultiplierAnsatz::Ux => "u_x",
            MultiplierAnsatz::Uy => "u_y",
        }
    }

    /// The generic multiplier `Q(x, y, u, u_x)` or `Q(x, y, u, u_y)`.
    pub fn generic(self) -> Expr {
        Expr::func("Q", &["x", "y", "u", self.jet()])
    }

    pub fn context(self, f: &FSpec) -> Context {
        f.context().func("Q", &["x", "y", "u", self.jet()])
    }
}

/// One equation of the multiplier determining system, labelled by the jet
/// monomial it was the coefficient of.
#[derive(Clone, Debug)]
pub struct MultiplierEquation {
    pub monomial: String,
    pub equation: Expr,
}

/// Split `E_u(Q·Δ)` for a generic `Q` by monomials in the jets other than
/// `u` and the ansatz jet.
pub fn multiplier_determining_system(
    f: &FSpec,
    ansatz: MultiplierAnsatz,
) -> Result<Vec<MultiplierEquation>, ClawError> {
    let r = multiplier_residual(&ansatz.generic(), f);
    let keep = ansatz.jet();
    let names: Vec<String> = jets_in(&r)
        .into_iter()
        .filter(|j| j.order() > 0 && j.name() != keep)
        .map(|j| j.name())
        .collect();
    let basis: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let coeffs = collect(&r, &basis, &[keep])?;
    Ok(coeffs
        .into_iter()
        .map(|(exps, c)| {
            let mono: Vec<String> = exps
                .iter()
                .zip(&basis)
                .filter(|(k, _)| **k > 0)
                .map(|(k, b)| if *k == 1 { b.to_string() } else { format!("{b}^{k}") })
                .collect();
            MultiplierEquation {
                monomial: if mono.is_empty() { "1".into() } else { mono.join("*") },
                equation: c,
            }
        })
        .collect())
}

/// `D_xΦ + D_yΨ − q·(u_xy − F)`.
pub fn flux_residual(theta: &FluxVector, q: &Expr, f: &FSpec) -> Expr {
    (theta.divergence() - q * &delta(f)).canon()
}

/// True iff the divergence of `theta` vanishes identically, without using
/// the equation.
pub fn is_trivial_flux(theta: &FluxVector) -> bool {
    vanishes(&theta.divergence()) == Some(true)
}

fn binom(n: usize, k: usize) -> BigRational {
    if k > n {
        return BigRational::zero();
    }
    let mut r = BigRational::one();
    for i in 0..k {
        r = r * BigRational::from_integer((n - i).into()) / BigRational::from_integer((i + 1).into());
    }
    r
}

const LAMBDA: &str = "#lambda";

/// Substitute `u_J -> value(J)` for every jet in `e`, simultaneously.
fn substitute_jets<F: Fn(JetCoordinate) -> Expr>(e: &Expr, value: F) -> Result<Expr, SymError> {
    let jets = jets_in(e);
    let mut hop = Bindings::new();
    let mut fill = Bindings::new();
    for jc in &jets {
        let tmp = format!("#{}", jc.name());
        hop = hop.var(&jc.name(), Expr::var(&tmp));
        fill = fill.var(&tmp, value(*jc));
    }
    let e = substitute(e, &hop)?;
    substitute(&e, &fill)
}

fn singular(e: &Expr) -> bool {
    let mut bad = false;
    e.visit(&mut |n| match n.node() {
        Node::Power(b, x) => {
            if b.is_zero() && x.as_rational().is_some_and(|q| !q.is_positive()) {
                bad = true;
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

/// Raw homotopy flux of a divergence `f` along `u0 + λ(u − u0)`.
fn homotopy_at(f: &Expr, u0: &Expr) -> Result<FluxVector, ClawError> {
    let lam = Expr::var(LAMBDA);
    let base = |jc: JetCoordinate| total_derivative_n(u0, jc.i, jc.j);
    let v = |k: usize, l: usize| &JetCoordinate::new(k, l).var() - &base(JetCoordinate::new(k, l));
    let along = |e: &Expr| {
        substitute_jets(e, |jc| {
            let b = base(jc);
            &b + &(&lam * &(&jc.var() - &b))
        })
    };
    let dpow = |e: &Expr, a: usize, b: usize| {
        let sign = if (a + b) % 2 == 0 { Expr::one() } else { Expr::int(-1) };
        &sign * &total_derivative_n(e, a, b)
    };
    let (mut ix, mut iy) = (Vec::new(), Vec::new());
    for jc in jets_in(f) {
        let (i, j) = (jc.i, jc.j);
        if i + j == 0 {
            continue;
        }
        let g = derive(f, &jc.name());
        if g.is_zero() {
            continue;
        }
        if i >= 1 {
            for k in 0..i {
                for l in 0..=j {
                    let c = binom(k + l, k) * binom(i + j - k - l - 1, i - k - 1) / binom(i + j, i);
                    ix.push((&Expr::rational(c) * &v(k, l), dpow(&g, i - k - 1, j - l)));
                }
            }
        }
        if j >= 1 {
            for k in 0..=i {
                for l in 0..j {
                    let c = binom(k + l, l) * binom(i + j - k - l - 1, j - l - 1) / binom(i + j, j);
                    iy.push((&Expr::rational(c) * &v(k, l), dpow(&g, i - k, j - l - 1)));
                }
            }
        }
    }
    // only the derivative factor is evaluated along the homotopy
    let integrate_lambda = |parts: Vec<(Expr, Expr)>| -> Result<Expr, ClawError> {
        let mut e = Vec::new();
        for (w, d) in parts {
            e.push(&w * &along(&d)?);
        }
        let e = sum_of(e).canon();
        let r = definite(&e, LAMBDA, &Expr::zero(), &Expr::one())
            .map_err(|err| ClawError::Integration(err.to_string()))?;
        if singular(&r.canon()) {
            return Err(ClawError::Integration(format!("singular at the base point {u0}")));
        }
        Ok(r)
    };
    let mut phi = integrate_lambda(ix)?;
    let psi = integrate_lambda(iy)?;
    let f0 = substitute_jets(f, base)?.canon();
    if !f0.is_zero() {
        let p = integrate(&f0, "x").map_err(|err| ClawError::Integration(err.to_string()))?;
        phi = &phi + &p;
    }
    Ok(FluxVector::new(phi, psi))
}

/// Flux for the multiplier `q` by homotopy inversion of `q·(u_xy − F)`.
/// Base points `0`, `x`, `y` are tried in turn. With `pure`, trivial terms
/// are stripped by [`purify`].
pub fn homotopy_flux(q: &Expr, f: &FSpec, pure: bool) -> Result<FluxVector, ClawError> {
    let r = multiplier_residual(q, f);
    if vanishes(&r) == Some(false) {
        return Err(ClawError::NotMultiplier(r.to_string()));
    }
    let density = (q * &delta(f)).canon();
    let mut last = None;
    for u0 in [Expr::zero(), Expr::var("x"), Expr::var("y")] {
        match homotopy_at(&density, &u0) {
            Ok(theta) => return Ok(if pure { purify(&theta) } else { theta }),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one base point"))
}

fn term_key(t: &Expr) -> (String, BigRational) {
    let (c, fs) = decompose_term(t);
    let rest = product_of(fs.into_iter().map(|(b, x)| Expr::pow(b, x))).canon();
    (rest.to_string(), c)
}

/// Solve `A c = b` over the rationals, free unknowns set to zero.
fn solve(rows: &[Vec<BigRational>], rhs: &[BigRational], n: usize) -> Option<Vec<BigRational>> {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| r.iter().cloned().chain(std::iter::once(b.clone())).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for c in col..=n {
            m[row][c] = &m[row][c] * &inv;
        }
        for r in 0..m.len() {
            if r != row && !m[r][col].is_zero() {
                let k = m[r][col].clone();
                for c in col..=n {
                    let d = &k * &m[row][c];
                    m[r][c] = &m[r][c] - &d;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if m[row..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    let mut out = vec![BigRational::zero(); n];
    for (r, &c) in pivots.iter().enumerate() {
        out[c] = m[r][n].clone();
    }
    Some(out)
}

/// Remove the largest trivial part of `theta`: every term carrying a jet of
/// order two or more, and every term with vanishing divergence, together
/// with whatever lower-order terms make the removed part divergence-free.
/// Returns `theta` unchanged when no such combination exists.
pub fn purify(theta: &FluxVector) -> FluxVector {
    let mut items: Vec<(bool, Expr)> = Vec::new();
    for t in terms(&theta.phi) {
        items.push((true, t));
    }
    for t in terms(&theta.psi) {
        items.push((false, t));
    }
    let divs: Vec<Expr> = items
        .iter()
        .map(|(is_phi, t)| total_derivative(t, if *is_phi { Axis::X } else { Axis::Y }).canon())
        .collect();
    let high = |t: &Expr| jets_in(t).iter().any(|j| j.order() >= 2);
    let forced: Vec<bool> = items
        .iter()
        .zip(&divs)
        .map(|((_, t), d)| high(t) || d.is_zero())
        .collect();
    let free: Vec<usize> = (0..items.len()).filter(|&k| !forced[k]).collect();
    let coef = match trivial_coefficients(&divs, &forced, &free) {
        Some(c) => c,
        None => return theta.clone(),
    };
    let (mut phi, mut psi, mut gone) = (Vec::new(), Vec::new(), Vec::new());
    for ((is_phi, t), c) in items.into_iter().zip(coef) {
        gone.push(if is_phi {
            FluxVector::new(&Expr::rational(c.clone()) * &t, Expr::zero())
        } else {
            FluxVector::new(Expr::zero(), &Expr::rational(c.clone()) * &t)
        });
        let keep = BigRational::one() - c;
        if keep.is_zero() {
            continue;
        }
        let t = &Expr::rational(keep) * &t;
        if is_phi {
            phi.push(t);
        } else {
            psi.push(t);
        }
    }
    let removed = FluxVector::new(
        sum_of(gone.iter().map(|g| g.phi.clone())),
        sum_of(gone.iter().map(|g| g.psi.clone())),
    );
    if !is_trivial_flux(&removed) {
        return theta.clone();
    }
    FluxVector::new(sum_of(phi), sum_of(psi))
}

/// Coefficients `c` with `c = 1` on the forced terms and `Σ c_t div_t = 0`,
/// found from exact evaluations at random rational jet points. Numbers that
/// stay transcendental after evaluation (`ln 3`, `exp(2)`, ...) are treated
/// as independent.
fn trivial_coefficients(divs: &[Expr], forced: &[bool], free: &[usize]) -> Option<Vec<BigRational>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let all = sum_of(divs.iter().cloned());
    let mut fixed = Bindings::new();
    for p in all.free_params() {
        fixed = fixed.param(&p, Expr::int(rng.gen_range(2..=7)));
    }
    for (name, ps) in all.functions() {
        let names: Vec<&str> = ps.iter().map(|p| &**p).collect();
        let mut body = vec![Expr::int(rng.gen_range(1..=5))];
        for n in &names {
            body.push(&Expr::int(rng.gen_range(-4..=4)) * &Expr::var(n));
            body.push(&Expr::int(rng.gen_range(-4..=4)) * &Expr::var(n).powi(2));
        }
        fixed = fixed.func(&name, &names, sum_of(body));
    }
    let divs: Vec<Expr> = divs.iter().map(|d| substitute(d, &fixed)).collect::<Result<_, _>>().ok()?;
    let vars: Vec<String> = all.free_vars().iter().map(|v| v.to_string()).collect();
    let (mut rows, mut rhs) = (Vec::new(), Vec::new());
    let want = free.len() + 6;
    let mut points = 0;
    for _ in 0..want * 4 {
        if points == want {
            break;
        }
        let mut b = Bindings::new();
        for v in &vars {
            b = b.var(v, Expr::frac(rng.gen_range(1..=19), rng.gen_range(1..=7)));
        }
        let vals: Vec<Expr> = match divs.iter().map(|d| substitute(d, &b).map(|e| e.canon())).collect() {
            Ok(v) => v,
            Err(_) => continue,
        };
        if vals.iter().any(singular) {
            continue;
        }
        points += 1;
        let mut table: BTreeMap<String, Vec<BigRational>> = BTreeMap::new();
        for (k, val) in vals.iter().enumerate() {
            for t in terms(val) {
                let (key, c) = term_key(&t);
                let row = table
                    .entry(key)
                    .or_insert_with(|| vec![BigRational::zero(); divs.len()]);
                row[k] = &row[k] + c;
            }
        }
        for row in table.into_values() {
            rhs.push(-(0..divs.len()).filter(|&k| forced[k]).map(|k| row[k].clone()).sum::<BigRational>());
            rows.push(free.iter().map(|&k| row[k].clone()).collect());
        }
    }
    let c = solve(&rows, &rhs, free.len())?;
    let mut coef = vec![BigRational::one(); divs.len()];
    for (slot, &k) in free.iter().enumerate() {
        coef[k] = c[slot].clone();
    }
    Some(coef)
}

/// Parsing context for T-functions: variables `z`, `y` and `T`.
pub fn t_context() -> Context {
    Context::new().var("z").var("T")
}

/// `2T + 4z T_z + z² T_zz + T_zy` for `T = T(z, y)`.
pub fn t_equation_residual(t: &Expr) -> Expr {
    let z = Expr::var("z");
    let tz = derive(t, "z");
    sum_of([
        &Expr::int(2) * t,
        product_of([Expr::int(4), z.clone(), tz.clone()]),
        product_of([z.powi(2), derive(&tz, "z")]),
        derive(&tz, "y"),
    ])
    .canon()
}

/// The T-equation as `u_xy = rhs` after renaming `z -> x`, `T -> u`.
fn t_equation_rhs() -> Expr {
    crate::symkernel::parse("-2*u - 4*x*u_x - x^2*u_xx").expect("fixed text")
}

/// A vector field `dy ∂_y + dz ∂_z + dT ∂_T` on `(y, z, T)`.
#[derive(Clone, Debug)]
pub struct TField {
    pub dy: Expr,
    pub dz: Expr,
    pub dt: Expr,
}

/// Residual of the symmetry criterion for the T-equation under `v`.
pub fn t_symmetry_residual(v: &TField) -> Result<Expr, ClawError> {
    let rename = |e: &Expr| {
        substitute(
            e,
            &Bindings::new().var("z", Expr::var("x")).var("T", Expr::var("u")),
        )
    };
    let field = PointVectorField::new(rename(&v.dz)?, rename(&v.dy)?, rename(&v.dt)?)?;
    let rhs = t_equation_rhs();
    let raw = prolong2(&field).apply(&(&JetCoordinate::new(1, 1).var() - &rhs));
    let r = reduce_mod_equation(&raw, &rhs, &[])?;
    Ok(substitute(
        &r,
        &Bindings::new().var("x", Expr::var("z")).var("u", Expr::var("T")),
    )?
    .canon())
}

/// True iff `v` generates a point symmetry of the T-equation.
pub fn verify_t_symmetry(v: &TField) -> Result<bool, ClawError> {
    Ok(t_symmetry_residual(v)?.is_zero())
}

const CLAWS: &str = "claws.json";

/// A catalog multiplier with its flux.
#[derive(Clone, Debug)]
pub struct ClawEntry {
    pub label: String,
    pub f: FSpec,
    pub q: Expr,
    pub theta: FluxVector,
    /// The printed form is known to fail.
    pub expect_fail: bool,
    pub notes: String,
}

fn parse_in(ctx: &Context, decls: &str, text: &str) -> Result<Expr, ClawError> {
    Ok(ctx.parse(&format!("{decls} {text}"))?)
}

pub fn claw_catalog() -> Result<Vec<ClawEntry>, ClawError> {
    let v = load_catalog(CLAWS)?;
    let mut out = Vec::new();
    for p in v["pairs"].as_array().into_iter().flatten() {
        let decls = p["decls"].as_str().unwrap_or("");
        let ctx = Context::new();
        let f_text = field(p, "f", CLAWS)?;
        let f = if f_text == "F" {
            FSpec::opaque_u()
        } else {
            FSpec::closed(parse_in(&ctx, decls, f_text)?)?
        };
        let ctx = f.context();
        out.push(ClawEntry {
            label: field(p, "label", CLAWS)?.to_string(),
            q: parse_in(&ctx, decls, field(p, "q", CLAWS)?)?,
            theta: FluxVector::new(
                parse_in(&ctx, decls, field(p, "phi", CLAWS)?)?,
                parse_in(&ctx, decls, field(p, "psi", CLAWS)?)?,
            ),
            f,
            expect_fail: p["expect"].as_str() == Some("fail"),
            notes: p["notes"].as_str().unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

/// Named solutions of the T-equation.
pub fn t_catalog() -> Result<Vec<(String, Expr)>, ClawError> {
    let v = load_catalog(CLAWS)?;
    let ctx = t_context();
    let mut out = Vec::new();
    for t in v["t_functions"].as_array().into_iter().flatten() {
        out.push((field(t, "label", CLAWS)?.to_string(), ctx.parse(field(t, "t", CLAWS)?)?));
    }
    Ok(out)
}

/// Catalog symmetries of the T-equation and whether each is expected to hold.
pub fn t_field_catalog() -> Result<Vec<(String, TField, bool)>, ClawError> {
    let v = load_catalog(CLAWS)?;
    let ctx = t_context();
    let mut out = Vec::new();
    for t in v["t_symmetries"].as_array().into_iter().flatten() {
        let fld = TField {
            dy: ctx.parse(field(t, "dy", CLAWS)?)?,
            dz: ctx.parse(field(t, "dz", CLAWS)?)?,
            dt: ctx.parse(field(t, "dT", CLAWS)?)?,
        };
        out.push((field(t, "label", CLAWS)?.to_string(), fld, t["expect"].as_str() != Some("fail")));
    }
    Ok(out)
}

/// The printed multiplier determining system for `Q(x, y, u, u_x)`.
pub fn printed_multiplier_system() -> Result<Vec<Expr>, ClawError> {
    let v = load_catalog(CLAWS)?;
    let ctx = MultiplierAnsatz::Ux.context(&FSpec::opaque_u());
    v["multiplier_system"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|e| {
            let text = e.as_str().ok_or_else(|| CatalogError::Format {
                file: CLAWS.into(),
                message: "multiplier_system entries must be strings".into(),
            })?;
            Ok(ctx.parse(text)?)
        })
        .collect()
}

fn status(zero: Option<bool>, expect_fail: bool) -> Status {
    match (zero, expect_fail) {
        (None, _) => Status::Undecided,
        (Some(true), false) => Status::Pass,
        (Some(false), true) => Status::ExpectedFail,
        _ => Status::Fail,
    }
}

fn check_pair(e: &ClawEntry) -> Vec<EntryReport> {
    let mut out = Vec::new();
    let t0 = Instant::now();
    let m = multiplier_residual(&e.q, &e.f);
    out.push(EntryReport {
        table: "multiplier".into(),
        label: e.label.clone(),
        status: status(vanishes(&m), false),
        residual: m.to_string(),
        millis: t0.elapsed().as_secs_f64() * 1e3,
        notes: String::new(),
    });
    let t0 = Instant::now();
    let r = flux_residual(&e.theta, &e.q, &e.f);
    out.push(EntryReport {
        table: "flux".into(),
        label: e.label.clone(),
        status: status(vanishes(&r), e.expect_fail),
        residual: r.to_string(),
        millis: t0.elapsed().as_secs_f64() * 1e3,
        notes: e.notes.clone(),
    });
    out
}

/// Check every catalog multiplier, flux, T-function and T-symmetry.
pub fn verify_claw_catalog() -> Result<Report, ClawError> {
    let pairs = claw_catalog()?;
    let mut report = Report::default();
    let chunks: Vec<Vec<EntryReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs.iter().map(|e| s.spawn(move || check_pair(e))).collect();
        handles.into_iter().map(|h| h.join().expect("catalog worker")).collect()
    });
    report.entries.extend(chunks.into_iter().flatten());
    for (label, t) in t_catalog()? {
        let t0 = Instant::now();
        let r = t_equation_residual(&t);
        report.entries.push(EntryReport {
            table: "t_equation".into(),
            label,
            status: status(vanishes(&r), false),
            residual: r.to_string(),
            millis: t0.elapsed().as_secs_f64() * 1e3,
            notes: String::new(),
        });
    }
    for (label, fld, holds) in t_field_catalog()? {
        let t0 = Instant::now();
        let r = t_symmetry_residual(&fld)?;
        report.entries.push(EntryReport {
            table: "t_symmetry".into(),
            label,
            status: status(Some(r.is_zero()), !holds),
            residual: r.to_string(),
            millis: t0.elapsed().as_secs_f64() * 1e3,
            notes: if holds { String::new() } else { "as printed".into() },
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::parse;
    use proptest::prelude::*;

    fn flux(ctx: &Context, phi: &str, psi: &str) -> FluxVector {
        FluxVector::new(ctx.parse(phi).unwrap(), ctx.parse(psi).unwrap())
    }

    #[test]
    fn multiplier_examples() {
        let f = FSpec::opaque_u();
        assert!(multiplier_residual(&parse("u_x").unwrap(), &f).is_zero());
        let liouville = FSpec::parse("exp(u)").unwrap();
        let q = parse("func p(x); p_x + p*u_x").unwrap();
        assert!(multiplier_residual(&q, &liouville).is_zero());
        // E_u(u u_xy - u e^u) = u_xy - e^u - u e^u + D_x D_y(u)
        let r = multiplier_residual(&parse("u").unwrap(), &liouville);
        let oracle = parse("2*u_xy - exp(u) - u*exp(u)").unwrap();
        assert!((r - oracle).canon().is_zero());
    }

    #[test]
    fn determining_system_matches_printed() {
        let f = FSpec::opaque_u();
        let sys = multiplier_determining_system(&f, MultiplierAnsatz::Ux).unwrap();
        let printed = printed_multiplier_system().unwrap();
        assert_eq!(printed.len(), 3);
        let proportional = |a: &Expr| {
            sys.iter()
                .any(|e| crate::classify::proportionality(a, &e.equation).is_some())
        };
        assert!(proportional(&printed[0]));
        for p in &printed[1..] {
            assert!(sys.iter().any(|e| (&e.equation - p).canon().is_zero()), "{p}");
        }
        let b = Bindings::new().func("Q", &["x", "y", "u", "u_x"], parse("param alpha; alpha*u_x").unwrap());
        for e in &sys {
            assert!(substitute(&e.equation, &b).unwrap().canon().is_zero(), "{}", e.monomial);
        }
    }

    #[test]
    fn uy_ansatz_mirrors() {
        let sys = multiplier_determining_system(&FSpec::opaque_u(), MultiplierAnsatz::Uy).unwrap();
        let b = Bindings::new().func("Q", &["x", "y", "u", "u_y"], parse("u_y").unwrap());
        assert!(sys.iter().all(|e| substitute(&e.equation, &b).unwrap().canon().is_zero()));
        let b = Bindings::new().func("Q", &["x", "y", "u", "u_y"], parse("u_y^2").unwrap());
        assert!(!sys.iter().all(|e| substitute(&e.equation, &b).unwrap().canon().is_zero()));
    }

    #[test]
    fn flux_examples() {
        let ctx = Context::new();
        let f = FSpec::parse("u^2 + 1").unwrap();
        let ux = parse("u_x").unwrap();
        assert!(flux_residual(&flux(&ctx, "-u - u^3/3", "u_x^2/2"), &ux, &f).is_zero());

        let liouville = FSpec::parse("exp(u)").unwrap();
        let c = Context::new().func("p", &["x"]);
        let q = c.parse("p_x + p*u_x").unwrap();
        let th = flux(&c, "-exp(u)*p + p_x*u_y", "-u*p_xx + p*u_x^2/2");
        assert!(flux_residual(&th, &q, &liouville).is_zero());

        let fo = FSpec::opaque_u();
        let c = fo.context();
        let printed = flux_residual(&flux(&c, "-F", "u_x^2/2"), &ux, &fo);
        assert!((printed - c.parse("u_x*F - u_x*F_u").unwrap()).canon().is_zero());
        assert!(flux_residual(&flux(&c, "-Fint", "u_x^2/2"), &ux, &fo).is_zero());
    }

    #[test]
    fn trivial_flux_examples() {
        let r = parse("x*y*u^2 + x^2*u").unwrap();
        let s = parse("x^2*y").unwrap();
        let p = parse("x^3").unwrap();
        let ry = integrate(&derive(&r, "y"), "u").unwrap();
        let rx = integrate(&derive(&r, "x"), "u").unwrap();
        let sx = integrate(&derive(&s, "x"), "y").unwrap();
        let phi = sum_of([&parse("u_y").unwrap() * &r, ry, s]);
        let psi = sum_of([-sx, -rx, p, -(&parse("u_x").unwrap() * &r)]);
        assert!(is_trivial_flux(&FluxVector::new(phi, psi)));
        assert!(!is_trivial_flux(&flux(&Context::new(), "-u - u^3/3", "u_x^2/2")));
    }

    #[test]
    fn homotopy_recovers_catalog_fluxes() {
        let f = FSpec::parse("u^2 + 1").unwrap();
        let ux = parse("u_x").unwrap();
        let th = homotopy_flux(&ux, &f, true).unwrap();
        assert_eq!(th, flux(&Context::new(), "-u - u^3/3", "u_x^2/2"));
        let raw = homotopy_flux(&ux, &f, false).unwrap();
        assert!(flux_residual(&raw, &ux, &f).is_zero());
        assert!(is_trivial_flux(&raw.sub(&th)));

        let fo = FSpec::opaque_u();
        let th = homotopy_flux(&parse("u_y").unwrap(), &fo, true).unwrap();
        assert_eq!(th, flux(&fo.context(), "u_y^2/2", "-Fint"));
    }

    #[test]
    fn homotopy_for_u_x_squared() {
        let f = FSpec::parse("u_x^2").unwrap();
        let q = parse("1/u_x").unwrap();
        let th = homotopy_flux(&q, &f, true).unwrap();
        assert!(flux_residual(&th, &q, &f).is_zero());
        // Θ1 with β1 = 0, α1 = -2
        let expect = flux(&Context::new(), "-u", "ln(u_x)");
        assert_eq!(th.phi, expect.phi);
        assert!(is_trivial_flux(&th.sub(&expect)));
    }

    #[test]
    fn homotopy_rejects_non_multipliers() {
        let f = FSpec::parse("exp(u)").unwrap();
        assert!(matches!(
            homotopy_flux(&parse("u").unwrap(), &f, false),
            Err(ClawError::NotMultiplier(_))
        ));
    }

    #[test]
    fn t_equation_examples() {
        for (label, t) in t_catalog().unwrap() {
            assert!(t_equation_residual(&t).is_zero(), "{label}");
        }
        assert_eq!(t_equation_residual(&Expr::one()), Expr::int(2));
    }

    #[test]
    fn t_symmetries() {
        for (label, v, holds) in t_field_catalog().unwrap() {
            assert_eq!(verify_t_symmetry(&v).unwrap(), holds, "{label}");
        }
        let d = |dy: i64, dz: i64| TField {
            dy: Expr::int(dy),
            dz: Expr::int(dz),
            dt: Expr::zero(),
        };
        assert!(!verify_t_symmetry(&d(0, 1)).unwrap());
        assert!(verify_t_symmetry(&d(1, 0)).unwrap());
    }

    #[test]
    fn catalog_verifies() {
        let r = verify_claw_catalog().unwrap();
        for e in &r.entries {
            assert!(e.status.ok(), "{} {}: {}", e.table, e.label, e.residual);
        }
        assert!(r.entries.iter().any(|e| e.status == Status::ExpectedFail));
    }

    #[test]
    fn v_family_is_identically_a_multiplier() {
        let f = FSpec::parse("u_x^2").unwrap();
        let q = parse("func V(x, p); x/u_x^2*V(x, -(1+u_x*y)/u_x)").unwrap();
        assert!(multiplier_residual(&q, &f).is_zero());
    }

    fn poly(cs: &[(i64, [u32; 5])]) -> Expr {
        let vars = ["x", "y", "u", "u_x", "u_y"];
        sum_of(cs.iter().map(|(c, e)| {
            product_of(
                std::iter::once(Expr::int(*c))
                    .chain(vars.iter().zip(e).map(|(v, k)| Expr::var(v).powi(*k as i64))),
            )
        }))
    }

    fn coeffs() -> impl Strategy<Value = Vec<(i64, [u32; 5])>> {
        proptest::collection::vec((-5i64..=5, proptest::array::uniform5(0u32..3)), 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn euler_annihilates_divergence(a in coeffs(), b in coeffs()) {
            let th = FluxVector::new(poly(&a), poly(&b));
            prop_assert!(euler_u(&th.divergence()).canon().is_zero());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn curl_flux_is_trivial(s in coeffs()) {
            let s = poly(&s);
            let th = FluxVector::new(total_derivative(&s, Axis::Y), -total_derivative(&s, Axis::X));
            prop_assert!(is_trivial_flux(&th));
        }

        #[test]
        fn homotopy_inverts_divergence(a in coeffs(), b in coeffs()) {
            let th = FluxVector::new(poly(&a), poly(&b));
            let div = th.divergence();
            let got = homotopy_at(&div, &Expr::zero()).unwrap();
            prop_assert!(is_trivial_flux(&got.sub(&th)));
        }

        #[test]
        fn t_equation_is_linear(a in -4i64..4, b in -4i64..4, c in coeffs(), d in coeffs()) {
            let sub = |e: Expr| substitute(&e, &Bindings::new().var("x", Expr::var("z"))).unwrap();
            let (t1, t2) = (sub(poly(&c)), sub(poly(&d)));
            let lhs = t_equation_residual(&(&(&Expr::int(a) * &t1) + &(&Expr::int(b) * &t2)));
            let rhs = &(&Expr::int(a) * &t_equation_residual(&t1)) + &(&Expr::int(b) * &t_equation_residual(&t2));
            prop_assert!((lhs - rhs).canon().is_zero());
        }

        #[test]
        fn v_family_holds_for_polynomial_v(k in proptest::collection::vec(-3i64..=3, 6)) {
            let f = FSpec::parse("u_x^2").unwrap();
            let v = Context::new()
                .var("p")
                .parse(&format!("{}+{}*x+{}*p+{}*x*p+{}*p^2+{}*x^2", k[0], k[1], k[2], k[3], k[4], k[5]))
                .unwrap();
            let q = parse("func V(x, p); x/u_x^2*V(x, -(1+u_x*y)/u_x)").unwrap();
            let q = substitute(&q, &Bindings::new().func("V", &["x", "p"], v)).unwrap();
            prop_assert!(multiplier_residual(&q, &f).is_zero());
        }
    }
}
