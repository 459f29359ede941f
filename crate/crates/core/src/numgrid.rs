//! Numerical companion: Goursat problems for `u_xy = F` on rectangles and
//! finite-difference conservation residuals.
//!
//! The marching scheme for the cell with lower-left node `(i-1, j-1)` and
//! corner values `a = u[i-1][j-1]`, `b = u[i][j-1]`, `c = u[i-1][j]` is
//!
//! ```text
//! m(d)  = (xm, ym, (a+b+c+d)/4, ((b-a)+(d-c))/(2hx), ((c-a)+(d-b))/(2hy))
//! d1    = b + c - a + hx*hy*F(m(b + c - a))
//! u[i][j] = b + c - a + hx*hy*F(m(d1))
//! ```
//!
//! with `xm`, `ym` the cell centre: a predictor followed by one fixed-point
//! correction.

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::ToPrimitive;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::claws::FluxVector;
use crate::detsys::{DetError, FSpec};
use crate::jetcalc::JetCoordinate;
use crate::symkernel::{parse, Expr, Node, SymError};

/// Values beyond this magnitude are treated as blow-up.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("unbound symbol {0}")]
    Unbound(String),
    #[error("cannot evaluate the opaque function {0}")]
    Opaque(String),
    #[error("non-finite value")]
    Domain,
    #[error("solution exceeds {OVERFLOW_GUARD:e} at node ({i}, {j})")]
    Divergence { i: usize, j: usize },
    #[error("boundary data disagree at the corner: {0} vs {1}")]
    Incompatible(f64, f64),
    #[error("grid needs at least 4 cells per side, got {0}")]
    GridTooSmall(usize),
    #[error("flux may only use jets of order at most one, found {0}")]
    HighOrderFlux(String),
    #[error("bad problem file: {0}")]
    Problem(String),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Det(#[from] DetError),
}

/// Floating-point value of `e` with variables and parameters looked up in `env`.
pub fn eval(e: &Expr, env: &[(&str, f64)]) -> Result<f64, NumError> {
    let v = match e.node() {
        Node::Rational(r) => r.to_f64().ok_or(NumError::Domain)?,
        Node::Var(s) | Node::Param(s) => env
            .iter()
            .find(|(n, _)| *n == &**s)
            .map(|(_, v)| *v)
            .ok_or_else(|| NumError::Unbound(s.to_string()))?,
        Node::Func(f) => return Err(NumError::Opaque(f.name.to_string())),
        Node::Sum(ts) => ts.iter().map(|t| eval(t, env)).sum::<Result<f64, _>>()?,
        Node::Product(fs) => fs.iter().map(|t| eval(t, env)).product::<Result<f64, _>>()?,
        Node::Power(b, x) => {
            let base = eval(b, env)?;
            match x.as_rational() {
                Some(q) if q.is_integer() && q.numer().to_i32().is_some() => {
                    base.powi(q.numer().to_i32().unwrap_or(0))
                }
                _ => base.powf(eval(x, env)?),
            }
        }
        Node::Exp(a) => eval(a, env)?.exp(),
        Node::Ln(a) => eval(a, env)?.ln(),
        Node::Sin(a) => eval(a, env)?.sin(),
        Node::Cos(a) => eval(a, env)?.cos(),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumError::Domain)
    }
}

/// A Goursat problem `u_xy = F`, `u(x, y0) = bx(x)`, `u(x0, y) = by(y)`.
#[derive(Clone, Debug)]
pub struct GoursatProblem {
    pub f: FSpec,
    pub bx: Expr,
    pub by: Expr,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
    /// Closed-form solution, when known.
    pub exact: Option<Expr>,
    /// Values for parameters appearing in `F`, the data or the flux.
    pub params: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct ProblemFile {
    f: String,
    boundary_x: String,
    boundary_y: String,
    domain: [f64; 4],
    #[serde(default)]
    exact: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default = "default_n")]
    n: usize,
}

fn default_n() -> usize {
    32
}

impl GoursatProblem {
    /// Problem on `[x0, x1] × [y0, y1]` with an `n × n` grid, all texts in
    /// the expression grammar.
    pub fn new(f: &str, bx: &str, by: &str, domain: [f64; 4], n: usize) -> Result<Self, NumError> {
        Ok(GoursatProblem {
            f: FSpec::parse(f)?,
            bx: parse(bx)?,
            by: parse(by)?,
            x0: domain[0],
            x1: domain[1],
            y0: domain[2],
            y1: domain[3],
            nx: n,
            ny: n,
            exact: None,
            params: BTreeMap::new(),
        })
    }

    pub fn with_exact(mut self, u: &str) -> Result<Self, NumError> {
        self.exact = Some(parse(u)?);
        Ok(self)
    }

    pub fn with_grid(&self, n: usize) -> Self {
        GoursatProblem {
            nx: n,
            ny: n,
            ..self.clone()
        }
    }

    pub fn from_json(v: &Value) -> Result<Self, NumError> {
        let p: ProblemFile = serde_json::from_value(v.clone()).map_err(|e| NumError::Problem(e.to_string()))?;
        let mut out = GoursatProblem::new(&p.f, &p.boundary_x, &p.boundary_y, p.domain, p.n)?;
        if let Some(u) = &p.exact {
            out = out.with_exact(u)?;
        }
        out.params = p.params;
        Ok(out)
    }

    fn env<'a>(&'a self, extra: &[(&'a str, f64)]) -> Vec<(&'a str, f64)> {
        let mut env: Vec<(&str, f64)> = extra.to_vec();
        env.extend(self.params.iter().map(|(k, v)| (k.as_str(), *v)));
        env
    }

    fn spacing(&self) -> (f64, f64) {
        ((self.x1 - self.x0) / self.nx as f64, (self.y1 - self.y0) / self.ny as f64)
    }
}

/// Node values of a grid solution, `u[i * (ny + 1) + j]` at `(x0 + i hx, y0 + j hy)`.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    pub u: Vec<f64>,
}

impl GridSolution {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[i * (self.ny + 1) + j]
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    /// Central differences at an interior node.
    pub fn u_x(&self, i: usize, j: usize) -> f64 {
        (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * self.hx)
    }

    pub fn u_y(&self, i: usize, j: usize) -> f64 {
        (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * self.hy)
    }

    pub fn u_xy(&self, i: usize, j: usize) -> f64 {
        (self.at(i + 1, j + 1) - self.at(i + 1, j - 1) - self.at(i - 1, j + 1) + self.at(i - 1, j - 1))
            / (4.0 * self.hx * self.hy)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,u")?;
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                writeln!(w, "{},{},{}", self.x(i), self.y(j), self.at(i, j))?;
            }
        }
        Ok(())
    }
}

/// March the midpoint scheme over the grid.
pub fn solve_goursat(p: &GoursatProblem) -> Result<GridSolution, NumError> {
    if p.nx.min(p.ny) < 4 {
        return Err(NumError::GridTooSmall(p.nx.min(p.ny)));
    }
    let (hx, hy) = p.spacing();
    let fx = eval(&p.bx, &p.env(&[("x", p.x0)]))?;
    let gy = eval(&p.by, &p.env(&[("y", p.y0)]))?;
    if (fx - gy).abs() > 1e-12 {
        return Err(NumError::Incompatible(fx, gy));
    }
    let rhs = p.f.rhs();
    let w = p.ny + 1;
    let mut u = vec![0.0; (p.nx + 1) * w];
    for i in 0..=p.nx {
        u[i * w] = eval(&p.bx, &p.env(&[("x", p.x0 + i as f64 * hx)]))?;
    }
    for j in 1..=p.ny {
        u[j] = eval(&p.by, &p.env(&[("y", p.y0 + j as f64 * hy)]))?;
    }
    let rhs_at = |xm: f64, ym: f64, a: f64, b: f64, c: f64, d: f64| {
        let env = p.env(&[
            ("x", xm),
            ("y", ym),
            ("u", (a + b + c + d) / 4.0),
            ("u_x", ((b - a) + (d - c)) / (2.0 * hx)),
            ("u_y", ((c - a) + (d - b)) / (2.0 * hy)),
        ]);
        eval(&rhs, &env)
    };
    for i in 1..=p.nx {
        for j in 1..=p.ny {
            let (a, b, c) = (u[(i - 1) * w + j - 1], u[i * w + j - 1], u[(i - 1) * w + j]);
            let xm = p.x0 + (i as f64 - 0.5) * hx;
            let ym = p.y0 + (j as f64 - 0.5) * hy;
            let d0 = b + c - a;
            let step = |d: f64| rhs_at(xm, ym, a, b, c, d).map_err(|_| NumError::Divergence { i, j });
            let d1 = d0 + hx * hy * step(d0)?;
            let d = d0 + hx * hy * step(d1)?;
            if !d.is_finite() || d.abs() > OVERFLOW_GUARD {
                return Err(NumError::Divergence { i, j });
            }
            u[i * w + j] = d;
        }
    }
    Ok(GridSolution {
        x0: p.x0,
        y0: p.y0,
        hx,
        hy,
        nx: p.nx,
        ny: p.ny,
        u,
    })
}

/// Max-norm error against the exact solution over all nodes.
pub fn max_error(sol: &GridSolution, p: &GoursatProblem) -> Result<Option<f64>, NumError> {
    let Some(exact) = &p.exact else {
        return Ok(None);
    };
    let mut worst: f64 = 0.0;
    for i in 0..=sol.nx {
        for j in 0..=sol.ny {
            let v = eval(exact, &p.env(&[("x", sol.x(i)), ("y", sol.y(j))]))?;
            worst = worst.max((v - sol.at(i, j)).abs());
        }
    }
    Ok(Some(worst))
}

/// Discrete divergence norm of a flux on a grid solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationResidual {
    pub norm: f64,
    /// Fraction of interior nodes where the flux could not be evaluated.
    pub masked_fraction: f64,
}

fn check_flux_order(theta: &FluxVector) -> Result<(), NumError> {
    for e in [&theta.phi, &theta.psi] {
        for jc in crate::jetcalc::jets_in(e) {
            if jc.order() > 1 {
                return Err(NumError::HighOrderFlux(jc.name()));
            }
        }
    }
    Ok(())
}

/// Max over nodes `2..=n-2` of `|D_xΦ + D_yΨ|` by central differences, with
/// `Φ`, `Ψ` evaluated on central-difference jets.
pub fn conservation_residual(
    sol: &GridSolution,
    theta: &FluxVector,
    params: &BTreeMap<String, f64>,
) -> Result<ConservationResidual, NumError> {
    check_flux_order(theta)?;
    let (ux, uy) = (JetCoordinate::new(1, 0).name(), JetCoordinate::new(0, 1).name());
    let w = sol.ny + 1;
    let mut phi = vec![None; (sol.nx + 1) * w];
    let mut psi = vec![None; (sol.nx + 1) * w];
    for i in 1..sol.nx {
        for j in 1..sol.ny {
            let mut env: Vec<(&str, f64)> = vec![
                ("x", sol.x(i)),
                ("y", sol.y(j)),
                ("u", sol.at(i, j)),
                (&ux, sol.u_x(i, j)),
                (&uy, sol.u_y(i, j)),
            ];
            env.extend(params.iter().map(|(k, v)| (k.as_str(), *v)));
            phi[i * w + j] = eval(&theta.phi, &env).ok();
            psi[i * w + j] = eval(&theta.psi, &env).ok();
        }
    }
    let (mut norm, mut masked, mut total) = (0.0f64, 0usize, 0usize);
    for i in 2..sol.nx - 1 {
        for j in 2..sol.ny - 1 {
            total += 1;
            let vals = (phi[(i + 1) * w + j], phi[(i - 1) * w + j], psi[i * w + j + 1], psi[i * w + j - 1]);
            match vals {
                (Some(pe), Some(pw), Some(qn), Some(qs)) => {
                    let r = (pe - pw) / (2.0 * sol.hx) + (qn - qs) / (2.0 * sol.hy);
                    norm = norm.max(r.abs());
                }
                _ => masked += 1,
            }
        }
    }
    Ok(ConservationResidual {
        norm,
        masked_fraction: if total == 0 { 0.0 } else { masked as f64 / total as f64 },
    })
}

/// Observed order from errors on grids `na < nb`.
pub fn observed_order(ea: f64, eb: f64, na: usize, nb: usize) -> f64 {
    (ea / eb).ln() / (nb as f64 / na as f64).ln()
}

/// Errors and residuals over a sequence of grid sizes.
#[derive(Clone, Debug)]
pub struct Study {
    pub grids: Vec<usize>,
    /// Max error against the exact solution, or the self-convergence
    /// difference `|u_N − u_2N|` on common nodes when there is none (one
    /// entry fewer).
    pub solution_errors: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub masked_fraction: f64,
}

impl Study {
    fn finest_order(v: &[f64], grids: &[usize]) -> Option<f64> {
        let k = v.len();
        (k >= 2).then(|| observed_order(v[k - 2], v[k - 1], grids[k - 2], grids[k - 1]))
    }

    pub fn solution_order(&self) -> Option<f64> {
        Self::finest_order(&self.solution_errors, &self.grids)
    }

    pub fn residual_order(&self) -> Option<f64> {
        Self::finest_order(&self.residual_norms, &self.grids)
    }

    pub fn to_json(&self) -> Value {
        let dec = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>();
        let ord = |o: Option<f64>| o.map(|x| format!("{x:.4}"));
        json!({
            "grids": self.grids,
            "solution_errors": dec(&self.solution_errors),
            "residual_norms": dec(&self.residual_norms),
            "solution_order": ord(self.solution_order()),
            "order": ord(self.residual_order()),
            "masked_fraction": format!("{:.4}", self.masked_fraction),
        })
    }
}

/// Solve on every grid (in parallel) and measure errors and, when a flux
/// is given, its conservation residual.
pub fn refinement_study(
    p: &GoursatProblem,
    theta: Option<&FluxVector>,
    grids: &[usize],
) -> Result<Study, NumError> {
    let sols: Vec<Result<GridSolution, NumError>> = std::thread::scope(|s| {
        let hs: Vec<_> = grids.iter().map(|&n| s.spawn(move || solve_goursat(&p.with_grid(n)))).collect();
        hs.into_iter().map(|h| h.join().expect("grid worker")).collect()
    });
    let sols: Vec<GridSolution> = sols.into_iter().collect::<Result<_, _>>()?;
    let mut solution_errors = Vec::new();
    if p.exact.is_some() {
        for s in &sols {
            solution_errors.extend(max_error(s, p)?);
        }
    } else {
        for pair in sols.windows(2) {
            solution_errors.push(self_difference(&pair[0], &pair[1]));
        }
    }
    let (mut residual_norms, mut masked) = (Vec::new(), 0.0f64);
    if let Some(theta) = theta {
        for s in &sols {
            let r = conservation_residual(s, theta, &p.params)?;
            residual_norms.push(r.norm);
            masked = masked.max(r.masked_fraction);
        }
    }
    Ok(Study {
        grids: grids.to_vec(),
        solution_errors,
        residual_norms,
        masked_fraction: masked,
    })
}

/// Max difference between a coarse solution and a finer one on the coarse nodes.
fn self_difference(coarse: &GridSolution, fine: &GridSolution) -> f64 {
    let (rx, ry) = (fine.nx / coarse.nx, fine.ny / coarse.ny);
    let mut worst: f64 = 0.0;
    for i in 0..=coarse.nx {
        for j in 0..=coarse.ny {
            worst = worst.max((coarse.at(i, j) - fine.at(i * rx, j * ry)).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::Context;
    use proptest::prelude::*;

    fn liouville() -> GoursatProblem {
        GoursatProblem::new("exp(u)", "ln(2) - 2*ln(x+1)", "ln(2) - 2*ln(1+y)", [1.0, 2.0, 1.0, 2.0], 32)
            .unwrap()
            .with_exact("ln(2) - 2*ln(x+y)")
            .unwrap()
    }

    fn flux(phi: &str, psi: &str) -> FluxVector {
        FluxVector::new(parse(phi).unwrap(), parse(psi).unwrap())
    }

    #[test]
    fn evaluator() {
        let e = parse("exp(u)*x^2 - ln(y) + u_x^(-1)").unwrap();
        let v = eval(&e, &[("u", 0.0), ("x", 3.0), ("y", 1.0), ("u_x", 2.0)]).unwrap();
        assert!((v - 9.5).abs() < 1e-14);
        assert!(matches!(eval(&parse("ln(u)").unwrap(), &[("u", -1.0)]), Err(NumError::Domain)));
        assert!(matches!(eval(&parse("u").unwrap(), &[]), Err(NumError::Unbound(_))));
        let f = Context::new().func("G", &["u"]).parse("G").unwrap();
        assert!(matches!(eval(&f, &[("u", 1.0)]), Err(NumError::Opaque(_))));
        // integer powers of negative numbers
        assert_eq!(eval(&parse("u^3").unwrap(), &[("u", -2.0)]).unwrap(), -8.0);
    }

    #[test]
    fn liouville_converges_at_second_order() {
        let th = flux("-exp(u)*x + u_y", "x*u_x^2/2");
        let s = refinement_study(&liouville(), Some(&th), &[32, 64, 128]).unwrap();
        assert!(s.solution_order().unwrap() >= 1.8, "{:?}", s);
        assert!(s.residual_order().unwrap() >= 1.8, "{:?}", s);
        assert!(s.residual_norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn u_x_squared_converges() {
        let p = GoursatProblem::new("u_x^2", "-ln(x+1)", "-ln(1+y)", [1.0, 2.0, 1.0, 2.0], 32)
            .unwrap()
            .with_exact("-ln(x+y)")
            .unwrap();
        let s = refinement_study(&p, None, &[16, 32, 64]).unwrap();
        assert!(s.solution_order().unwrap() >= 1.8, "{:?}", s);

        // u_x > 0 here, so ln(u_x) is defined
        let p = GoursatProblem::new("u_x^2", "-ln(5-x)", "-ln(5-y)", [1.0, 2.0, 1.0, 2.0], 32)
            .unwrap()
            .with_exact("-ln(6-x-y)")
            .unwrap();
        let s = refinement_study(&p, Some(&flux("-u", "ln(u_x)")), &[32, 64, 128]).unwrap();
        assert!(s.solution_order().unwrap() >= 1.8, "{:?}", s);
        assert!(s.residual_order().unwrap() >= 1.8, "{:?}", s);
        assert_eq!(s.masked_fraction, 0.0);
    }

    #[test]
    fn printed_flux_does_not_converge() {
        let p = GoursatProblem::new("u^2 + 1", "0", "0", [1.0, 2.0, 1.0, 2.0], 32).unwrap();
        let good = refinement_study(&p, Some(&flux("-u - u^3/3", "u_x^2/2")), &[32, 64, 128]).unwrap();
        assert!(good.residual_order().unwrap() >= 1.8);
        assert!(good.solution_order().unwrap() >= 1.8);
        let bad = refinement_study(&p, Some(&flux("-(u^2 + 1)", "u_x^2/2")), &[32, 64, 128]).unwrap();
        assert!(bad.residual_order().unwrap() < 0.5, "{:?}", bad);
        assert!(bad.residual_norms[2] > 0.1);
    }

    #[test]
    fn constant_flux_has_zero_residual() {
        let sol = solve_goursat(&liouville()).unwrap();
        let r = conservation_residual(&sol, &flux("1", "1"), &BTreeMap::new()).unwrap();
        assert_eq!(r.norm, 0.0);
        assert_eq!(r.masked_fraction, 0.0);
    }

    #[test]
    fn masking_and_errors() {
        let sol = solve_goursat(&liouville()).unwrap();
        // u_x < 0 everywhere for this solution
        let r = conservation_residual(&sol, &flux("0", "ln(u_x)"), &BTreeMap::new()).unwrap();
        assert_eq!(r.masked_fraction, 1.0);
        assert!(matches!(
            conservation_residual(&sol, &flux("u_xx", "0"), &BTreeMap::new()),
            Err(NumError::HighOrderFlux(_))
        ));
        let bad = GoursatProblem::new("u", "1", "0", [0.0, 1.0, 0.0, 1.0], 8).unwrap();
        assert!(matches!(solve_goursat(&bad), Err(NumError::Incompatible(..))));
        let blow = GoursatProblem::new("u^3", "1", "1", [0.0, 10.0, 0.0, 10.0], 8).unwrap();
        assert!(matches!(solve_goursat(&blow), Err(NumError::Divergence { .. })));
        assert!(matches!(solve_goursat(&liouville().with_grid(3)), Err(NumError::GridTooSmall(3))));
    }

    #[test]
    fn problem_json_and_csv() {
        let v = serde_json::json!({
            "f": "u_x^2", "boundary_x": "-ln(x+1)", "boundary_y": "-ln(1+y)",
            "domain": [1.0, 2.0, 1.0, 2.0], "exact": "-ln(x+y)", "n": 8
        });
        let p = GoursatProblem::from_json(&v).unwrap();
        let sol = solve_goursat(&p).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 81);
        assert!(GoursatProblem::from_json(&serde_json::json!({"f": "u"})).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn boundary_data_reproduced(a in -20i64..20, b in -20i64..20, n in 4usize..20) {
            let p = GoursatProblem::new(
                "u_x + u/4",
                &format!("{a}/10*(x - 1) + {b}/10"),
                &format!("{b}/10 + sin(y - 1)"),
                [1.0, 2.0, 1.0, 2.0],
                n,
            ).unwrap();
            let sol = solve_goursat(&p).unwrap();
            for i in 0..=n {
                let want = eval(&p.bx, &[("x", sol.x(i))]).unwrap();
                prop_assert_eq!(sol.at(i, 0), want);
            }
            for j in 1..=n {
                let want = eval(&p.by, &[("y", sol.y(j))]).unwrap();
                prop_assert_eq!(sol.at(0, j), want);
            }
        }

        #[test]
        fn deterministic(n in 4usize..24) {
            let p = liouville().with_grid(n);
            prop_assert_eq!(solve_goursat(&p).unwrap().u, solve_goursat(&p).unwrap().u);
        }
    }
}
