//! Command-line front end. Exit codes: 0 success, 1 a verification failed
//! (the report is still printed), 2 bad input or usage.

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::classify::{
    check_ode_solution, enumerate_case_conditions, printed_conditions, standard_indeterminates,
    verify_class_table, ClassifyError, Verdict,
};
use crate::claws::{
    flux_residual, homotopy_flux, multiplier_residual, t_context, t_equation_residual, t_field_catalog,
    t_symmetry_residual, vanishes, verify_claw_catalog, ClawError, FluxVector,
};
use crate::detsys::{split_system, DetError, FMode, FSpec};
use crate::numgrid::{refinement_study, GoursatProblem, NumError};
use crate::report::{Report, SCHEMA_VERSION};
use crate::symkernel::{render_with_header, Context, Expr, SymError};

#[derive(Parser, Debug)]
#[command(name = "hypsym", version, about = "Symmetries and conservation laws of u_xy = F(u, u_x)")]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    U,
    Ux,
}

impl Family {
    fn spec(self) -> FSpec {
        match self {
            Family::U => FSpec::opaque_u(),
            Family::Ux => FSpec::opaque_ux(),
        }
    }

    fn mode(self) -> FMode {
        self.spec().mode
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and canonicalize an expression.
    Parse {
        #[arg(allow_hyphen_values = true)]
        expr: String,
    },
    /// Split the symmetry determining equations of an opaque family.
    Detsys {
        #[arg(long, value_enum)]
        family: Family,
    },
    /// Wronskian case conditions for m-subsets of the indeterminates.
    Cases {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        m: usize,
    },
    /// Check a closed-form F against a case condition (a printed label such
    /// as 9a, or M:K for the K-th generated condition of size M).
    CheckF {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        condition: String,
    },
    /// Verify catalog symmetry classes.
    VerifyClass {
        #[arg(long, default_value = "all")]
        table: String,
        #[arg(long)]
        entry: Option<String>,
    },
    /// Conservation laws.
    #[command(subcommand)]
    Claw(ClawCommand),
    /// Residual of the T-equation, or check of its catalog symmetries.
    TEq {
        #[arg(long, allow_hyphen_values = true)]
        t: Option<String>,
        #[arg(long)]
        symmetries: bool,
    },
    /// Goursat refinement study with a conservation residual.
    Numcheck {
        #[arg(long)]
        problem: std::path::PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        phi: String,
        #[arg(long, allow_hyphen_values = true)]
        psi: String,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        grids: Vec<usize>,
        /// Minimum observed order for a pass.
        #[arg(long, default_value_t = 1.8)]
        min_order: f64,
        /// Write the finest grid solution as CSV.
        #[arg(long)]
        csv: Option<std::path::PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ClawInput {
    /// Right-hand side F; the bare name F means an opaque F(u).
    #[arg(long, allow_hyphen_values = true)]
    f: String,
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Declarations prefixed to every expression, e.g. "func p(x);".
    #[arg(long, default_value = "")]
    decls: String,
}

#[derive(Subcommand, Debug)]
enum ClawCommand {
    /// Check a multiplier and optionally a flux.
    Verify {
        #[command(flatten)]
        input: ClawInput,
        #[arg(long, requires = "psi", allow_hyphen_values = true)]
        phi: Option<String>,
        #[arg(long, requires = "phi", allow_hyphen_values = true)]
        psi: Option<String>,
    },
    /// Derive a flux by homotopy inversion.
    Derive {
        #[command(flatten)]
        input: ClawInput,
        /// Keep the raw homotopy flux instead of the pure one.
        #[arg(long)]
        raw: bool,
    },
    /// Verify the built-in conservation-law catalog.
    Catalog,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Claw(#[from] ClawError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Sym(SymError::Syntax { .. }) => "syntax",
            CliError::Sym(_) => "symbolic",
            CliError::Det(_) => "determining_system",
            CliError::Classify(ClassifyError::Catalog(_)) | CliError::Claw(ClawError::Catalog(_)) => "catalog",
            CliError::Classify(_) => "classify",
            CliError::Claw(ClawError::Integration(_)) => "integration",
            CliError::Claw(_) => "conservation_law",
            CliError::Num(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }
}

/// What a command produced: a JSON document, its text rendering, and
/// whether every verification passed.
struct Outcome {
    json: Value,
    text: String,
    ok: bool,
}

fn show(e: &Expr) -> String {
    render_with_header(e)
}

fn report_outcome(r: &Report) -> Outcome {
    let mut text = String::new();
    for e in &r.entries {
        text.push_str(&format!("{:<11} {:<16} {:?}", e.table, e.label, e.status));
        if !e.status.ok() || e.residual != "0" {
            text.push_str(&format!("  residual: {}", e.residual));
        }
        text.push('\n');
    }
    text.push_str(&format!("{}/{} ok\n", r.passed(), r.entries.len()));
    Outcome {
        json: r.to_json(),
        text,
        ok: r.all_ok(),
    }
}

fn claw_spec(input: &ClawInput) -> Result<(FSpec, Context), CliError> {
    let f = if input.f.trim() == "F" {
        FSpec::opaque_u()
    } else {
        FSpec::closed(Context::new().parse(&format!("{} {}", input.decls, input.f))?)?
    };
    let ctx = f.context();
    Ok((f, ctx))
}

fn parse_in(ctx: &Context, decls: &str, text: &str) -> Result<Expr, CliError> {
    Ok(ctx.parse(&format!("{decls} {text}"))?)
}

fn execute(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Parse { expr } => {
            let e = crate::symkernel::parse(&expr)?;
            Ok(Outcome {
                text: format!("{}\n", show(&e)),
                json: json!({ "input": expr, "canonical": show(&e), "tree": crate::symkernel::to_json(&e) }),
                ok: true,
            })
        }
        Command::Detsys { family } => {
            let s = split_system(&family.spec())?;
            let mut text = String::from("constraints:\n");
            for c in &s.constraints {
                text.push_str(&format!("  {c} = 0\n"));
            }
            text.push_str(&format!("residual:\n  {}\n", s.residual));
            Ok(Outcome {
                json: s.to_json(),
                text,
                ok: true,
            })
        }
        Command::Cases { family, m } => {
            let s = standard_indeterminates(family.mode())?;
            let cs = enumerate_case_conditions(&s, m)?;
            let mut text = String::new();
            for (k, c) in cs.iter().enumerate() {
                let names: Vec<String> = c.elements.iter().map(|e| e.to_string()).collect();
                text.push_str(&format!("{m}:{k} [{}]  {} = 0", names.join(", "), c.ode));
                if !c.flags.is_empty() {
                    text.push_str(&format!("  {:?}", c.flags));
                }
                text.push('\n');
            }
            Ok(Outcome {
                json: json!({
                    "indeterminates": s.items.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                    "conditions": cs.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
                }),
                text,
                ok: true,
            })
        }
        Command::CheckF { family, f, condition } => {
            let spec = family.spec();
            let var = spec.class_var();
            let body = Context::new().parse(&f)?;
            let (label, ode) = if let Some((m, k)) = condition.split_once(':') {
                let m: usize = m.parse().map_err(|_| CliError::Usage(format!("bad condition {condition}")))?;
                let k: usize = k.parse().map_err(|_| CliError::Usage(format!("bad condition {condition}")))?;
                let cs = enumerate_case_conditions(&standard_indeterminates(family.mode())?, m)?;
                let c = cs
                    .get(k)
                    .ok_or_else(|| CliError::Usage(format!("only {} conditions of size {m}", cs.len())))?;
                (condition.clone(), c.ode.clone())
            } else {
                let p = printed_conditions(family.mode())?
                    .into_iter()
                    .find(|p| p.label == condition)
                    .ok_or_else(|| CliError::Usage(format!("no printed condition {condition}")))?;
                (p.label, p.ode)
            };
            let verdict = check_ode_solution(&ode, "F", var, &body)?;
            Ok(Outcome {
                text: format!("{label}: {} -> {verdict:?}\n", ode),
                json: json!({ "condition": label, "ode": show(&ode), "f": show(&body), "verdict": verdict }),
                ok: verdict == Verdict::Solves,
            })
        }
        Command::VerifyClass { table, entry } => Ok(report_outcome(&verify_class_table(&table, entry.as_deref())?)),
        Command::Claw(ClawCommand::Catalog) => Ok(report_outcome(&verify_claw_catalog()?)),
        Command::Claw(ClawCommand::Verify { input, phi, psi }) => {
            let (f, ctx) = claw_spec(&input)?;
            let q = parse_in(&ctx, &input.decls, &input.q)?;
            let m = multiplier_residual(&q, &f);
            let m_ok = vanishes(&m) == Some(true);
            let mut text = format!("multiplier residual: {m}\n");
            let mut out = json!({ "multiplier_residual": show(&m), "multiplier": m_ok });
            let mut ok = m_ok;
            if let (Some(phi), Some(psi)) = (phi, psi) {
                let th = FluxVector::new(parse_in(&ctx, &input.decls, &phi)?, parse_in(&ctx, &input.decls, &psi)?);
                let r = flux_residual(&th, &q, &f);
                let r_ok = vanishes(&r) == Some(true);
                text.push_str(&format!("flux residual: {r}\n"));
                out["flux_residual"] = json!(show(&r));
                out["flux"] = json!(r_ok);
                ok &= r_ok;
            }
            Ok(Outcome { json: out, text, ok })
        }
        Command::Claw(ClawCommand::Derive { input, raw }) => {
            let (f, ctx) = claw_spec(&input)?;
            let q = parse_in(&ctx, &input.decls, &input.q)?;
            let th = homotopy_flux(&q, &f, !raw)?;
            let r = flux_residual(&th, &q, &f);
            Ok(Outcome {
                text: format!("Phi = {}\nPsi = {}\nresidual: {r}\n", th.phi, th.psi),
                json: json!({ "phi": show(&th.phi), "psi": show(&th.psi), "residual": show(&r) }),
                ok: r.is_zero(),
            })
        }
        Command::TEq { t, symmetries } => {
            if t.is_none() && !symmetries {
                return Err(CliError::Usage("give --t EXPR or --symmetries".into()));
            }
            let mut text = String::new();
            let mut out = json!({});
            let mut ok = true;
            if let Some(t) = t {
                let r = t_equation_residual(&t_context().parse(&t)?);
                ok &= r.is_zero();
                text.push_str(&format!("residual: {r}\n"));
                out["residual"] = json!(show(&r));
            }
            if symmetries {
                let mut rows = Vec::new();
                for (label, v, holds) in t_field_catalog()? {
                    let r = t_symmetry_residual(&v)?;
                    let pass = r.is_zero() == holds;
                    ok &= pass;
                    text.push_str(&format!("{label:<14} symmetry={} expected={holds}\n", r.is_zero()));
                    rows.push(json!({ "label": label, "symmetry": r.is_zero(), "expected": holds, "residual": show(&r) }));
                }
                out["symmetries"] = json!(rows);
            }
            Ok(Outcome { json: out, text, ok })
        }
        Command::Numcheck {
            problem,
            phi,
            psi,
            grids,
            min_order,
            csv,
        } => {
            if grids.len() < 2 {
                return Err(CliError::Usage("need at least two grids".into()));
            }
            let text = std::fs::read_to_string(&problem)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", problem.display())))?;
            let p = GoursatProblem::from_json(&v)?;
            let th = FluxVector::new(crate::symkernel::parse(&phi)?, crate::symkernel::parse(&psi)?);
            let s = refinement_study(&p, Some(&th), &grids)?;
            if let Some(path) = csv {
                let finest = *grids.iter().max().unwrap_or(&p.nx);
                let sol = crate::numgrid::solve_goursat(&p.with_grid(finest))?;
                sol.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
            }
            let ro = s.residual_order().unwrap_or(f64::NAN);
            let so = s.solution_order();
            let ok = ro >= min_order && so.is_none_or(|o| o >= min_order);
            let mut text = format!("grids: {:?}\nresidual norms: {:?}\nresidual order: {ro:.3}\n", s.grids, s.residual_norms);
            if let Some(o) = so {
                text.push_str(&format!("solution errors: {:?}\nsolution order: {o:.3}\n", s.solution_errors));
            }
            text.push_str(&format!("masked fraction: {:.4}\n", s.masked_fraction));
            Ok(Outcome {
                json: s.to_json(),
                text,
                ok,
            })
        }
    }
}

/// Run the command line `argv` (including the program name).
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let json_mode = argv.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            emit_error(json_mode, "usage", &e.to_string(), out, err);
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(o) => {
            if cli.json {
                let mut doc = o.json;
                if let Value::Object(map) = &mut doc {
                    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
                    map.insert("ok".into(), json!(o.ok));
                }
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            } else {
                let _ = write!(out, "{}", o.text);
            }
            if o.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            emit_error(cli.json, e.code(), &e.to_string(), out, err);
            2
        }
    }
}

fn emit_error(json_mode: bool, code: &str, message: &str, out: &mut dyn Write, err: &mut dyn Write) {
    if json_mode {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": code, "message": message.trim_end() },
        });
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
    } else {
        let _ = writeln!(err, "error[{code}]: {}", message.trim_end());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("hypsym").chain(args.iter().copied()), &mut out, &mut err);
        let mut s = String::from_utf8(out).unwrap();
        s.push_str(&String::from_utf8(err).unwrap());
        (code, s)
    }

    fn call_json(args: &[&str]) -> (i32, Value) {
        let mut a = args.to_vec();
        a.push("--json");
        let (code, s) = call(&a);
        (code, serde_json::from_str(&s).unwrap())
    }

    #[test]
    fn parse_and_syntax_error() {
        let (code, s) = call(&["parse", "(u_x+1)^2 - u_x^2"]);
        assert_eq!(code, 0);
        assert_eq!(s.trim(), "1 + 2*u_x");
        let (code, v) = call_json(&["parse", "u_x^^2"]);
        assert_eq!(code, 2);
        assert_eq!(v["error"]["code"], "syntax");
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["bogus"]).0, 2);
        assert_eq!(call(&["cases", "--family", "u", "--m", "2", "--frobnicate"]).0, 2);
        assert_eq!(call(&["t-eq"]).0, 2);
        let (code, v) = call_json(&["cases", "--family", "w", "--m", "2"]);
        assert_eq!(code, 2);
        assert_eq!(v["error"]["code"], "usage");
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn cases_for_m_two() {
        let (code, v) = call_json(&["cases", "--family", "u", "--m", "2"]);
        assert_eq!(code, 0);
        assert_eq!(v["conditions"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn verify_class_table_two() {
        let (code, v) = call_json(&["verify-class", "--table", "table2"]);
        assert_eq!(code, 0);
        let passes = v["entries"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["status"] == "pass")
            .count();
        assert_eq!(passes, 5);
        assert_eq!(call(&["verify-class", "--table", "table9"]).0, 2);
    }

    #[test]
    fn check_f_exit_codes() {
        let ok = call(&["check-f", "--family", "u", "--f", "param a1; param a2; param a3; a3*(u+a1)^a2", "--condition", "9a"]);
        assert_eq!(ok.0, 0, "{}", ok.1);
        assert_eq!(call(&["check-f", "--family", "u", "--f", "exp(u)", "--condition", "7a"]).0, 1);
        assert_eq!(call(&["check-f", "--family", "u", "--f", "u", "--condition", "2:2"]).0, 0);
        assert_eq!(call(&["check-f", "--family", "u", "--f", "u", "--condition", "zz"]).0, 2);
    }

    #[test]
    fn claw_commands() {
        let (code, v) = call_json(&[
            "claw", "verify", "--f", "u^2+1", "--q", "u_x", "--phi", "-u-u^3/3", "--psi", "u_x^2/2",
        ]);
        assert_eq!(code, 0);
        assert_eq!(v["flux"], true);
        let (code, _) = call(&["claw", "verify", "--f", "F", "--q", "u_x", "--phi", "-F", "--psi", "u_x^2/2"]);
        assert_eq!(code, 1);
        let (code, v) = call_json(&["claw", "derive", "--f", "u^2+1", "--q", "u_x"]);
        assert_eq!(code, 0);
        assert_eq!(v["psi"], "1/2*u_x^2");
        assert_eq!(call(&["claw", "catalog"]).0, 0);
        assert_eq!(call(&["claw", "derive", "--f", "exp(u)", "--q", "u"]).0, 2);
    }

    #[test]
    fn t_equation_commands() {
        assert_eq!(call(&["t-eq", "--t", "param a; param b; b/(4*z^2) - a/(2*z)"]).0, 0);
        let (code, v) = call_json(&["t-eq", "--t", "1"]);
        assert_eq!(code, 1);
        assert_eq!(v["residual"], "2");
        assert_eq!(call(&["t-eq", "--symmetries"]).0, 0);
    }

    #[test]
    fn json_expressions_round_trip() {
        let (_, v) = call_json(&["claw", "derive", "--f", "F", "--q", "u_y", "--raw"]);
        for key in ["phi", "psi"] {
            let text = v[key].as_str().unwrap();
            let e = crate::symkernel::parse(text).unwrap();
            assert_eq!(show(&e), text);
        }
    }

    #[test]
    fn numcheck_runs() {
        let dir = std::env::temp_dir().join(format!("hypsym-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("liouville.json");
        std::fs::write(
            &path,
            r#"{"f": "exp(u)", "boundary_x": "ln(2) - 2*ln(x+1)", "boundary_y": "ln(2) - 2*ln(1+y)",
                "domain": [1, 2, 1, 2], "exact": "ln(2) - 2*ln(x+y)"}"#,
        )
        .unwrap();
        let csv = dir.join("u.csv");
        let p = path.to_str().unwrap();
        let (code, v) = call_json(&[
            "numcheck", "--problem", p, "--phi", "-exp(u)*x + u_y", "--psi", "x*u_x^2/2", "--grids", "16,32,64",
            "--csv", csv.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{v}");
        assert!(std::fs::read_to_string(&csv).unwrap().starts_with("x,y,u"));
        let (code, _) = call(&["numcheck", "--problem", p, "--phi", "-exp(u)", "--psi", "0", "--grids", "16,32"]);
        assert_eq!(code, 1);
        assert_eq!(call(&["numcheck", "--problem", "/nonexistent.json", "--phi", "0", "--psi", "0"]).0, 2);
    }
}
