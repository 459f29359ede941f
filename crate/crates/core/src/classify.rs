//! Group classification: indeterminates, Wronskian case conditions, candidate
//! checks, equivalence transformations and class-table verification.

use std::collections::HashMap;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::detsys::{split_system, symmetry_residual_with, DetError, FMode, FSpec};
use crate::jetcalc::{PointVectorField, SideRelation};
use crate::report::{field, load_catalog, CatalogError, EntryReport, Report, Status};
use crate::symkernel::{
    decompose_term, derive, probe_zero, product_of, substitute, sum_of, terms, Bindings,
    Expr, Node, ProbeOutcome, SymError, DEFAULT_SEED,
};

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("{0} must be nonzero")]
    ZeroScale(&'static str),
    #[error("subset index {0} out of range")]
    BadSubset(usize),
    #[error("subset size {m} outside 2..={n}")]
    BadSize { m: usize, n: usize },
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Factors of a residual that depend only on the classification variable.
#[derive(Clone, Debug, PartialEq)]
pub struct IndeterminateSet {
    pub var: String,
    pub items: Vec<Expr>,
}

impl IndeterminateSet {
    /// The same elements in the order given by `order`, if they agree as sets.
    pub fn reordered(&self, order: &[Expr]) -> Option<IndeterminateSet> {
        if order.len() != self.items.len() || !order.iter().all(|e| self.items.contains(e)) {
            return None;
        }
        Some(IndeterminateSet {
            var: self.var.clone(),
            items: order.to_vec(),
        })
    }
}

pub fn extract_indeterminates(residual: &Expr, var: &str) -> IndeterminateSet {
    let mut items: Vec<Expr> = Vec::new();
    for t in terms(residual) {
        let (_, fs) = decompose_term(&t);
        let ind = product_of(
            fs.into_iter()
                .filter(|(b, _)| b.contains_var(var))
                .map(|(b, x)| Expr::pow(b, x)),
        );
        if !items.contains(&ind) {
            items.push(ind);
        }
    }
    IndeterminateSet {
        var: var.to_string(),
        items,
    }
}

/// Indeterminates of the reduced determining equation of an opaque family,
/// in the order `F_u, u F_u, F, 1` resp. `u_x, F, u_x F', F', 1`.
pub fn standard_indeterminates(mode: FMode) -> Result<IndeterminateSet, ClassifyError> {
    let f = match mode {
        FMode::OpaqueU => FSpec::opaque_u(),
        FMode::OpaqueUx => FSpec::opaque_ux(),
        FMode::ClosedForm => return Err(DetError::NotOpaque.into()),
    };
    let ctx = f.context();
    let order: &[&str] = match mode {
        FMode::OpaqueU => &["F_u", "u*F_u", "F", "1"],
        _ => &["u_x", "F", "u_x*F_{u_x}", "F_{u_x}", "1"],
    };
    let order: Vec<Expr> = order.iter().map(|s| ctx.parse(s)).collect::<Result<_, _>>()?;
    let d = split_system(&f)?;
    let s = extract_indeterminates(&d.residual, f.class_var());
    Ok(s.reordered(&order).expect("indeterminates of the reduced equation"))
}

/// Determinant of `[d^k e_i / d var^k]`, by cofactor expansion with memoised minors.
pub fn wronskian(exprs: &[Expr], var: &str) -> Expr {
    let n = exprs.len();
    let mut rows: Vec<Vec<Expr>> = vec![exprs.to_vec()];
    for k in 1..n {
        let next = rows[k - 1].iter().map(|e| derive(e, var)).collect();
        rows.push(next);
    }
    let mut memo: HashMap<u32, Expr> = HashMap::new();
    minor(&rows, 0, (1u32 << n) - 1, &mut memo)
}

fn minor(rows: &[Vec<Expr>], r: usize, cols: u32, memo: &mut HashMap<u32, Expr>) -> Expr {
    if cols == 0 {
        return Expr::one();
    }
    if let Some(e) = memo.get(&cols) {
        return e.clone();
    }
    let mut parts = Vec::new();
    let mut sign = 1;
    for j in 0..rows[r].len() {
        if cols & (1 << j) == 0 {
            continue;
        }
        let a = &rows[r][j];
        if !a.is_zero() {
            let m = minor(rows, r + 1, cols & !(1 << j), memo);
            parts.push(product_of([Expr::int(sign), a.clone(), m]));
        }
        sign = -sign;
    }
    let out = sum_of(parts);
    memo.insert(cols, out.clone());
    out
}

/// `Some(c)` with `a = c·b` for a nonzero rational `c`.
pub fn proportionality(a: &Expr, b: &Expr) -> Option<BigRational> {
    if a.is_zero() || b.is_zero() {
        return None;
    }
    let ta = terms(a);
    let (ca, fa) = decompose_term(&ta[0]);
    let cb = terms(b).into_iter().find_map(|t| {
        let (c, f) = decompose_term(&t);
        (f == fa).then_some(c)
    })?;
    let c = ca / cb;
    (a - &(&Expr::rational(c.clone()) * b)).is_zero().then_some(c)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConditionFlag {
    IdenticallyZero,
    /// A nonzero constant: no `F` satisfies it.
    Inconsistent,
    /// Only satisfied by constant `F`.
    ForcesConstant,
    Duplicate { of: usize, factor: BigRational },
}

#[derive(Clone, Debug)]
pub struct CaseCondition {
    pub m: usize,
    pub subset: Vec<usize>,
    pub elements: Vec<Expr>,
    pub ode: Expr,
    pub flags: Vec<ConditionFlag>,
}

impl CaseCondition {
    pub fn to_json(&self) -> Value {
        let flags: Vec<Value> = self
            .flags
            .iter()
            .map(|f| match f {
                ConditionFlag::IdenticallyZero => json!("identically_zero"),
                ConditionFlag::Inconsistent => json!("inconsistent"),
                ConditionFlag::ForcesConstant => json!("forces_constant"),
                ConditionFlag::Duplicate { of, factor } => {
                    json!({"duplicate_of": of, "factor": factor.to_string()})
                }
            })
            .collect();
        json!({
            "m": self.m,
            "subset": self.elements.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            "ode": self.ode.to_string(),
            "flags": flags,
        })
    }
}

fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut Vec::new(), &mut out);
    out
}

fn forces_constant(ode: &Expr, var: &str) -> bool {
    let ts = terms(ode);
    if ts.len() != 1 {
        return false;
    }
    let (_, fs) = decompose_term(&ts[0]);
    let fs: Vec<_> = fs.into_iter().filter(|(b, _)| b.contains_var(var)).collect();
    !fs.is_empty()
        && fs.iter().all(|(b, _)| match b.node() {
            Node::Func(f) => f.args.iter().any(|a| a.contains_var(var)) && f.order() <= 1,
            _ => false,
        })
}

/// One Wronskian condition per `m`-subset, in lexicographic subset order.
pub fn enumerate_case_conditions(
    s: &IndeterminateSet,
    m: usize,
) -> Result<Vec<CaseCondition>, ClassifyError> {
    let n = s.items.len();
    if m < 2 || m > n {
        return Err(ClassifyError::BadSize { m, n });
    }
    let mut out: Vec<CaseCondition> = Vec::new();
    for subset in subsets(n, m) {
        let elements: Vec<Expr> = subset.iter().map(|&i| s.items[i].clone()).collect();
        let ode = wronskian(&elements, &s.var);
        let mut flags = Vec::new();
        if ode.is_zero() {
            flags.push(ConditionFlag::IdenticallyZero);
        } else if ode.as_rational().is_some() {
            flags.push(ConditionFlag::Inconsistent);
        } else if forces_constant(&ode, &s.var) {
            flags.push(ConditionFlag::ForcesConstant);
        }
        if let Some((of, factor)) = out
            .iter()
            .enumerate()
            .find_map(|(k, c)| proportionality(&ode, &c.ode).map(|f| (k, f)))
        {
            flags.push(ConditionFlag::Duplicate { of, factor });
        }
        out.push(CaseCondition {
            m,
            subset,
            elements,
            ode,
            flags,
        });
    }
    Ok(out)
}

/// `Σ coeff_i · s[subset_i]`.
pub fn linear_combination_condition(
    s: &IndeterminateSet,
    subset: &[usize],
    coeffs: &[&str],
) -> Result<Expr, ClassifyError> {
    let mut parts = Vec::new();
    for (k, &i) in subset.iter().enumerate() {
        let e = s.items.get(i).ok_or(ClassifyError::BadSubset(i))?;
        let c = coeffs.get(k).ok_or(ClassifyError::BadSubset(i))?;
        parts.push(&Expr::param(c) * e);
    }
    Ok(sum_of(parts))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Solves,
    DoesNotSolve,
    Undecided,
}

/// Substitute `name(var) := f` into `ode` and decide whether it vanishes.
pub fn check_ode_solution(ode: &Expr, name: &str, var: &str, f: &Expr) -> Result<Verdict, ClassifyError> {
    let e = substitute(ode, &Bindings::new().func(name, &[var], f.clone()))?;
    if e.is_zero() {
        return Ok(Verdict::Solves);
    }
    Ok(match probe_zero(&e, 12, DEFAULT_SEED) {
        ProbeOutcome::Equal => Verdict::Solves,
        ProbeOutcome::NotEqual => Verdict::DoesNotSolve,
        ProbeOutcome::Undecided => Verdict::Undecided,
    })
}

pub fn check_condition_solution(f: &Expr, c: &CaseCondition, var: &str) -> Result<Verdict, ClassifyError> {
    check_ode_solution(&c.ode, "F", var, f)
}

/// Parameters of a linear equivalence transformation. For the `F(u)` family
/// `u = r w + shift` with constant shift; for `F(u_x)` the shift is `S(z)`.
#[derive(Clone, Debug)]
pub struct EquivParams {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub d: Expr,
    pub r: Expr,
    pub shift: Expr,
}

impl EquivParams {
    pub fn identity() -> Self {
        EquivParams {
            a: Expr::one(),
            b: Expr::zero(),
            c: Expr::one(),
            d: Expr::zero(),
            r: Expr::one(),
            shift: Expr::zero(),
        }
    }

    /// Apply `self` then `q`.
    pub fn then(&self, q: &EquivParams) -> EquivParams {
        let z = Expr::var("z");
        let moved = rescale(&self.shift, "z", &(&q.c * &z) + &q.d).expect("variable substitution");
        EquivParams {
            a: &self.a * &q.a,
            b: &(&self.a * &q.b) + &self.b,
            c: &self.c * &q.c,
            d: &(&self.c * &q.d) + &self.d,
            r: &self.r * &q.r,
            shift: &(&self.r * &q.shift) + &moved,
        }
    }
}

/// The transformed labelling function `H`, written again in `u` or `u_x`.
pub fn equivalence_transform(f: &Expr, family: FMode, p: &EquivParams) -> Result<Expr, ClassifyError> {
    for (e, name) in [(&p.a, "a"), (&p.c, "c"), (&p.r, "r")] {
        if e.is_zero() {
            return Err(ClassifyError::ZeroScale(name));
        }
    }
    let scale = &(&p.a * &p.c) / &p.r;
    let inner = match family {
        FMode::OpaqueUx => {
            let ux = Expr::var("u_x");
            rescale(f, "u_x", &(&p.r * &ux) / &p.a)?
        }
        _ => {
            let u = Expr::var("u");
            rescale(f, "u", &(&p.r * &u) + &p.shift)?
        }
    };
    Ok(&scale * &inner)
}

/// `e[v := value]` where `value` may itself mention `v`.
fn rescale(e: &Expr, v: &str, value: Expr) -> Result<Expr, SymError> {
    // a binding may not mention itself, so go through a fresh name
    let fresh = "#";
    let value = substitute(&value, &Bindings::new().var(v, Expr::var(fresh)))?;
    let out = substitute(e, &Bindings::new().var(v, value))?;
    substitute(&out, &Bindings::new().var(fresh, Expr::var(v)))
}

/// One row of the class catalog.
#[derive(Clone, Debug)]
pub struct ClassEntry {
    pub table: String,
    pub label: String,
    pub f: FSpec,
    pub vector: PointVectorField,
    pub sides: Vec<SideRelation>,
    pub constraints: Vec<String>,
    pub notes: String,
    pub printed: Option<PointVectorField>,
}

const CLASSES: &str = "classes.json";

fn parse_entry(v: &Value) -> Result<ClassEntry, ClassifyError> {
    let fam = field(v, "family", CLASSES)?;
    let decls = v["decls"].as_str().unwrap_or("");
    let f = match (fam, v["f"].as_str()) {
        ("u", None) => FSpec::opaque_u(),
        (_, None) => FSpec::opaque_ux(),
        (_, Some(t)) => FSpec::parse(t)?,
    };
    let ctx = f.context();
    let p = |key: &str| -> Result<Expr, ClassifyError> {
        Ok(ctx.parse(&format!("{decls} {}", field(v, key, CLASSES)?))?)
    };
    let vector = PointVectorField::new(p("xi")?, p("eta")?, p("phi")?).map_err(DetError::from)?;
    let printed = match v["printed_phi"].as_str() {
        Some(_) => Some(
            PointVectorField::new(p("xi")?, p("eta")?, p("printed_phi")?).map_err(DetError::from)?,
        ),
        None => None,
    };
    let mut sides = Vec::new();
    for s in v["sides"].as_array().into_iter().flatten() {
        let rhs = ctx.parse(&format!("{decls} {}", field(s, "rhs", CLASSES)?))?;
        sides.push(SideRelation::new(field(s, "name", CLASSES)?, rhs));
    }
    let strings = |key: &str| -> Vec<String> {
        v[key]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|s| s.as_str().map(String::from))
            .collect()
    };
    Ok(ClassEntry {
        table: field(v, "table", CLASSES)?.to_string(),
        label: field(v, "label", CLASSES)?.to_string(),
        f,
        vector,
        sides,
        constraints: strings("constraints"),
        notes: v["notes"].as_str().unwrap_or("").to_string(),
        printed,
    })
}

/// All entries of the class catalog.
pub fn class_catalog() -> Result<Vec<ClassEntry>, ClassifyError> {
    let v = load_catalog(CLASSES)?;
    v["entries"]
        .as_array()
        .ok_or_else(|| CatalogError::Format {
            file: CLASSES.into(),
            message: "missing entries".into(),
        })?
        .iter()
        .map(parse_entry)
        .collect()
}

pub const TABLES: [&str; 4] = ["thm22", "table1", "table2", "extra"];

/// Check every entry of `table` (or all tables for `"all"`).
pub fn verify_class_table(table: &str, entry: Option<&str>) -> Result<Report, ClassifyError> {
    if table != "all" && !TABLES.contains(&table) {
        return Err(ClassifyError::UnknownTable(table.to_string()));
    }
    let mut report = Report::default();
    for e in class_catalog()? {
        if (table != "all" && e.table != table) || entry.is_some_and(|l| l != e.label) {
            continue;
        }
        let t0 = Instant::now();
        let r = symmetry_residual_with(&e.f, &e.vector, &e.sides)?;
        report.entries.push(EntryReport {
            table: e.table.clone(),
            label: e.label.clone(),
            status: if r.is_zero() { Status::Pass } else { Status::Fail },
            residual: r.to_string(),
            millis: t0.elapsed().as_secs_f64() * 1e3,
            notes: e.notes.clone(),
        });
        if let Some(pv) = &e.printed {
            let t0 = Instant::now();
            let r = symmetry_residual_with(&e.f, pv, &e.sides)?;
            report.entries.push(EntryReport {
                table: e.table.clone(),
                label: format!("{} (printed)", e.label),
                status: if r.is_zero() { Status::Fail } else { Status::ExpectedFail },
                residual: r.to_string(),
                millis: t0.elapsed().as_secs_f64() * 1e3,
                notes: "as printed".into(),
            });
        }
    }
    Ok(report)
}

/// A printed case condition from the condition catalog.
#[derive(Clone, Debug)]
pub struct PrintedCondition {
    pub label: String,
    pub m: usize,
    pub ode: Expr,
    pub notes: String,
}

pub fn printed_conditions(mode: FMode) -> Result<Vec<PrintedCondition>, ClassifyError> {
    let file = "conditions.json";
    let v = load_catalog(file)?;
    let (key, ctx) = match mode {
        FMode::OpaqueUx => ("ux", FSpec::opaque_ux().context()),
        _ => ("u", FSpec::opaque_u().context()),
    };
    let mut out = Vec::new();
    for c in v[key].as_array().into_iter().flatten() {
        out.push(PrintedCondition {
            label: field(c, "label", file)?.to_string(),
            m: c["m"].as_u64().unwrap_or(0) as usize,
            ode: ctx.parse(field(c, "ode", file)?)?,
            notes: c["notes"].as_str().unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

/// Match each printed condition to a generated one up to a constant factor.
pub fn match_printed(mode: FMode) -> Result<Vec<(PrintedCondition, Option<(Vec<Expr>, BigRational)>)>, ClassifyError> {
    let s = standard_indeterminates(mode)?;
    let mut by_m: HashMap<usize, Vec<CaseCondition>> = HashMap::new();
    let mut out = Vec::new();
    for p in printed_conditions(mode)? {
        if p.m < 2 || p.m > s.items.len() {
            out.push((p, None));
            continue;
        }
        if !by_m.contains_key(&p.m) {
            by_m.insert(p.m, enumerate_case_conditions(&s, p.m)?);
        }
        let hit = by_m[&p.m]
            .iter()
            .find_map(|c| proportionality(&p.ode, &c.ode).map(|k| (c.elements.clone(), k)));
        out.push((p, hit));
    }
    Ok(out)
}

pub fn is_unit(c: &BigRational) -> bool {
    c.is_one() || (-c).is_one() || c.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::{integrate, parse, Context};
    use proptest::prelude::*;

    fn fu() -> Context {
        FSpec::opaque_u().context()
    }

    /// Leibniz formula over all permutations.
    fn leibniz(exprs: &[Expr], var: &str) -> Expr {
        let n = exprs.len();
        let mut m = vec![exprs.to_vec()];
        for k in 1..n {
            let next = m[k - 1].iter().map(|e| derive(e, var)).collect();
            m.push(next);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut acc = Vec::new();
        fn heap(k: usize, perm: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == 1 {
                out.push(perm.clone());
                return;
            }
            for i in 0..k {
                heap(k - 1, perm, out);
                if k % 2 == 0 {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
        }
        let mut all = Vec::new();
        heap(n, &mut perm, &mut all);
        for p in all {
            let inversions = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
            let sign = if inversions % 2 == 0 { 1 } else { -1 };
            let mut f = vec![Expr::int(sign)];
            for (row, &col) in p.iter().enumerate() {
                f.push(m[row][col].clone());
            }
            acc.push(product_of(f));
        }
        sum_of(acc)
    }

    #[test]
    fn indeterminates_of_both_families() {
        let u = standard_indeterminates(FMode::OpaqueU).unwrap();
        assert_eq!(u.items.len(), 4);
        let ux = standard_indeterminates(FMode::OpaqueUx).unwrap();
        assert_eq!(ux.items.len(), 5);
        assert!(extract_indeterminates(&Expr::zero(), "u").items.is_empty());
    }

    #[test]
    fn wronskian_examples() {
        let c = fu();
        let w = wronskian(&[c.parse("F").unwrap(), c.parse("F_u").unwrap()], "u");
        assert_eq!(w, c.parse("F*F_uu - F_u^2").unwrap());
        assert_eq!(wronskian(&[Expr::one(), Expr::var("u")], "u"), Expr::one());
        let s = standard_indeterminates(FMode::OpaqueU).unwrap();
        let w4 = wronskian(&s.items, "u");
        assert_eq!(w4, leibniz(&s.items, "u"));
        let printed = c.parse("F_uu^2*F_uuu - 2*F_u*F_uuu^2 + F_u*F_uu*F_uuuu").unwrap();
        assert!(proportionality(&w4, &printed).is_some_and(|k| is_unit(&k)));
    }

    #[test]
    fn five_by_five_matches_leibniz() {
        let s = standard_indeterminates(FMode::OpaqueUx).unwrap();
        assert_eq!(wronskian(&s.items, "u_x"), leibniz(&s.items, "u_x"));
    }

    #[test]
    fn flags() {
        let s = standard_indeterminates(FMode::OpaqueU).unwrap();
        let cs = enumerate_case_conditions(&s, 2).unwrap();
        assert_eq!(cs.len(), 6);
        assert_eq!(cs[0].flags, [ConditionFlag::ForcesConstant]);
        assert_eq!(cs[5].flags, [ConditionFlag::ForcesConstant]);
        assert_eq!(enumerate_case_conditions(&s, 4).unwrap().len(), 1);
        let ux = standard_indeterminates(FMode::OpaqueUx).unwrap();
        let cs = enumerate_case_conditions(&ux, 2).unwrap();
        // W(u_x, 1) = -1
        assert!(cs.iter().any(|c| c.flags.contains(&ConditionFlag::Inconsistent)));
        let rep = IndeterminateSet {
            var: "u".into(),
            items: vec![c_f(), c_f(), Expr::one()],
        };
        let cs = enumerate_case_conditions(&rep, 2).unwrap();
        assert_eq!(cs[0].flags, [ConditionFlag::IdenticallyZero]);
        assert!(matches!(cs[2].flags[..], [ConditionFlag::ForcesConstant, ConditionFlag::Duplicate { of: 1, .. }]));
        assert!(enumerate_case_conditions(&rep, 1).is_err());
    }

    fn c_f() -> Expr {
        fu().parse("F").unwrap()
    }

    #[test]
    fn printed_conditions_all_match() {
        for mode in [FMode::OpaqueU, FMode::OpaqueUx] {
            for (p, hit) in match_printed(mode).unwrap() {
                let (_, k) = hit.unwrap_or_else(|| panic!("{} unmatched", p.label));
                assert!(is_unit(&k), "{} factor {k}", p.label);
            }
        }
    }

    #[test]
    fn linear_combinations() {
        let s = standard_indeterminates(FMode::OpaqueUx).unwrap();
        let c = FSpec::opaque_ux().context();
        let e = linear_combination_condition(&s, &[0, 1, 3], &["alpha", "beta", "sigma"]).unwrap();
        assert_eq!(e, c.parse("alpha*u_x + beta*F + sigma*F_{u_x}").unwrap());
        let e = linear_combination_condition(&s, &[0, 1, 2], &["alpha", "beta", "sigma"]).unwrap();
        assert_eq!(e, c.parse("alpha*u_x + beta*F + sigma*u_x*F_{u_x}").unwrap());
        let e = linear_combination_condition(&s, &[1], &["alpha"]).unwrap();
        assert!(forces_constant(&e, "u_x"));
    }

    #[test]
    fn condition_solutions() {
        let s = standard_indeterminates(FMode::OpaqueU).unwrap();
        let m3 = enumerate_case_conditions(&s, 3).unwrap();
        let f = parse("a_3*(u + a_1)^a_2").unwrap();
        assert_eq!(check_condition_solution(&f, &m3[0], "u").unwrap(), Verdict::Solves);
        let m2 = enumerate_case_conditions(&s, 2).unwrap();
        let e = parse("exp(u)").unwrap();
        assert_eq!(check_condition_solution(&e, &m2[0], "u").unwrap(), Verdict::DoesNotSolve);

        let ux = FSpec::opaque_ux().context();
        let lc = ux.parse("alpha*u_x + beta*F + sigma*F_{u_x}").unwrap();
        let f = parse("delta*exp(-beta*u_x/sigma) - alpha*(-sigma + beta*u_x)/beta^2").unwrap();
        assert_eq!(check_ode_solution(&lc, "F", "u_x", &f).unwrap(), Verdict::Solves);
        let lc = ux.parse("alpha*u_x + beta*F + sigma*u_x*F_{u_x}").unwrap();
        let f = parse("delta*u_x^(-beta/sigma) - alpha*u_x/(beta + sigma)").unwrap();
        assert_eq!(check_ode_solution(&lc, "F", "u_x", &f).unwrap(), Verdict::Solves);

        let w = Context::new().func("w", &["u"]);
        let ode = w.parse("2*w_uu^2 - w_u*w_uuu").unwrap();
        let sol = parse("b_2*ln(u + b_1) + b_3").unwrap();
        assert_eq!(check_ode_solution(&ode, "w", "u", &sol).unwrap(), Verdict::Solves);
    }

    #[test]
    fn double_antiderivative_solves_m5() {
        let s = standard_indeterminates(FMode::OpaqueUx).unwrap();
        let c = &enumerate_case_conditions(&s, 5).unwrap()[0];
        let g = parse("exp(c_3 + c_2*ln(u_x + c_1))").unwrap();
        let f = integrate(&integrate(&g, "u_x").unwrap(), "u_x").unwrap();
        assert_eq!(check_condition_solution(&f, c, "u_x").unwrap(), Verdict::Solves);
    }

    #[test]
    fn equivalence_examples() {
        let mut p = EquivParams::identity();
        p.shift = Expr::param("s");
        let h = equivalence_transform(&parse("exp(u)").unwrap(), FMode::OpaqueU, &p).unwrap();
        assert_eq!(h, parse("exp(s)*exp(u)").unwrap());
        let q = EquivParams {
            a: Expr::param("a"),
            b: Expr::param("b"),
            c: Expr::param("c"),
            d: Expr::param("d"),
            r: Expr::param("r"),
            shift: parse("S(z)").unwrap(),
        };
        let h = equivalence_transform(&parse("u_x").unwrap(), FMode::OpaqueUx, &q).unwrap();
        assert_eq!(h, parse("c*u_x").unwrap());
        let f = parse("u^3 + sin(u)").unwrap();
        assert_eq!(equivalence_transform(&f, FMode::OpaqueU, &EquivParams::identity()).unwrap(), f);
        let mut z = EquivParams::identity();
        z.r = Expr::zero();
        assert!(matches!(equivalence_transform(&f, FMode::OpaqueU, &z), Err(ClassifyError::ZeroScale("r"))));
    }

    #[test]
    fn class_tables_verify() {
        let r = verify_class_table("all", None).unwrap();
        for e in &r.entries {
            assert!(e.status.ok(), "{} {}: {}", e.table, e.label, e.residual);
        }
        assert_eq!(r.entries.iter().filter(|e| e.table != "extra" && !e.label.contains("printed")).count(), 15);
        assert!(verify_class_table("table9", None).is_err());
    }

    fn pick(n: usize) -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(0..n, 2..4)
    }

    const POOL: &[&str] = &["F", "F_u", "u*F_u", "1", "u", "u^2", "exp(u)", "u*F"];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn swap_flips_sign(idx in pick(POOL.len()), i in 0usize..3, j in 0usize..3) {
            let c = fu();
            let es: Vec<Expr> = idx.iter().map(|&k| c.parse(POOL[k]).unwrap()).collect();
            let (i, j) = (i % es.len(), j % es.len());
            prop_assume!(i != j);
            let mut sw = es.clone();
            sw.swap(i, j);
            prop_assert_eq!(wronskian(&sw, "u"), wronskian(&es, "u").neg());
            let mut rep = es.clone();
            rep[j] = rep[i].clone();
            prop_assert!(wronskian(&rep, "u").is_zero());
        }

        #[test]
        fn span_satisfies_condition(a in -5i64..5, b in -5i64..5, c in 1i64..4) {
            let es = [parse("u").unwrap(), parse("exp(u)").unwrap(), parse("u^3").unwrap()];
            let w = wronskian(&[Expr::func("F", &["u"]), es[0].clone(), es[1].clone(), es[2].clone()], "u");
            let f = sum_of([
                &Expr::int(a) * &es[0],
                &Expr::frac(b, c) * &es[1],
                &Expr::int(c) * &es[2],
            ]);
            prop_assert_eq!(check_ode_solution(&w, "F", "u", &f).unwrap(), Verdict::Solves);
        }

        #[test]
        fn transforms_compose(r1 in 1i64..4, s1 in -3i64..3, r2 in 1i64..4, s2 in -3i64..3, a in 1i64..3) {
            let p = EquivParams { a: Expr::int(a), b: Expr::int(1), c: Expr::int(2), d: Expr::zero(), r: Expr::int(r1), shift: Expr::int(s1) };
            let q = EquivParams { a: Expr::int(3), b: Expr::zero(), c: Expr::frac(1, a), d: Expr::int(1), r: Expr::frac(1, r2), shift: Expr::int(s2) };
            let f = parse("u^3 + exp(u)").unwrap();
            for mode in [FMode::OpaqueU, FMode::OpaqueUx] {
                let f = if mode == FMode::OpaqueU { f.clone() } else { parse("u_x^3 + exp(u_x)").unwrap() };
                let step = equivalence_transform(&equivalence_transform(&f, mode, &p).unwrap(), mode, &q).unwrap();
                let once = equivalence_transform(&f, mode, &p.then(&q)).unwrap();
                prop_assert_eq!(step, once);
            }
        }
    }
}
