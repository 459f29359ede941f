//! Stable JSON tree: `{"kind": .., "value": .., "children": [..]}`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use super::canon::canonicalize;
use super::expr::{sym, Expr, FuncApp, Node, Sym};
use super::SymError;

pub fn to_json(e: &Expr) -> Value {
    let kids: Vec<Value> = e.children().into_iter().map(to_json).collect();
    match e.node() {
        Node::Rational(r) => json!({"kind": "RationalConst", "value": r.to_string()}),
        Node::Param(s) => json!({"kind": "Parameter", "value": &**s}),
        Node::Var(s) => json!({"kind": "Var", "value": &**s}),
        Node::Func(f) => json!({
            "kind": "FuncApp",
            "value": {
                "name": &*f.name,
                "params": f.params.iter().map(|p| &**p).collect::<Vec<_>>(),
                "deriv": f.deriv,
            },
            "children": kids,
        }),
        other => {
            let kind = match other {
                Node::Sum(_) => "Sum",
                Node::Product(_) => "Product",
                Node::Power(_, _) => "Power",
                Node::Exp(_) => "Exp",
                Node::Ln(_) => "Ln",
                Node::Sin(_) => "Sin",
                _ => "Cos",
            };
            json!({"kind": kind, "children": kids})
        }
    }
}

fn bad(msg: &str) -> SymError {
    SymError::Json(msg.to_string())
}

fn parse_rational(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.trim().parse().ok()?;
            if d == BigInt::from(0) {
                return None;
            }
            Some(BigRational::new(n.trim().parse().ok()?, d))
        }
        None => Some(BigRational::from_integer(s.trim().parse().ok()?)),
    }
}

/// Inverse of [`to_json`]; the result is canonicalized.
pub fn from_json(v: &Value) -> Result<Expr, SymError> {
    Ok(canonicalize(&raw(v)?))
}

fn raw(v: &Value) -> Result<Expr, SymError> {
    let kind = v["kind"].as_str().ok_or_else(|| bad("missing kind"))?;
    let kids = || -> Result<Vec<Expr>, SymError> {
        v["children"]
            .as_array()
            .map(|a| a.iter().map(raw).collect())
            .unwrap_or_else(|| Ok(vec![]))
    };
    let text = || v["value"].as_str().ok_or_else(|| bad("missing value"));
    let one = |k: Vec<Expr>| -> Result<Expr, SymError> {
        k.into_iter().next().ok_or_else(|| bad("missing child"))
    };
    Ok(match kind {
        "RationalConst" => Expr::rational(parse_rational(text()?).ok_or_else(|| bad("bad rational"))?),
        "Parameter" => Expr::param(text()?),
        "Var" => Expr::var(text()?),
        "FuncApp" => {
            let meta = &v["value"];
            let name = meta["name"].as_str().ok_or_else(|| bad("missing name"))?;
            let params: Arc<[Sym]> = meta["params"]
                .as_array()
                .ok_or_else(|| bad("missing params"))?
                .iter()
                .map(|p| p.as_str().map(sym).ok_or_else(|| bad("bad param")))
                .collect::<Result<Vec<_>, _>>()?
                .into();
            let deriv: Vec<i32> = meta["deriv"]
                .as_array()
                .ok_or_else(|| bad("missing deriv"))?
                .iter()
                .map(|d| d.as_i64().map(|d| d as i32).ok_or_else(|| bad("bad deriv")))
                .collect::<Result<_, _>>()?;
            let args = kids()?;
            if deriv.len() != params.len() || args.len() != params.len() {
                return Err(SymError::Arity {
                    name: name.to_string(),
                    expected: params.len(),
                    got: args.len(),
                });
            }
            Expr::new(Node::Func(FuncApp {
                name: sym(name),
                params,
                deriv,
                args,
            }))
        }
        "Sum" => Expr::sum(kids()?),
        "Product" => Expr::product(kids()?),
        "Power" => {
            let mut k = kids()?;
            if k.len() != 2 {
                return Err(bad("power needs two children"));
            }
            let x = k.pop().unwrap();
            Expr::pow(k.pop().unwrap(), x)
        }
        "Exp" => Expr::exp(one(kids()?)?),
        "Ln" => Expr::ln(one(kids()?)?),
        "Sin" => Expr::sin(one(kids()?)?),
        "Cos" => Expr::cos(one(kids()?)?),
        other => return Err(bad(&format!("unknown kind {other}"))),
    })
}
