//! Expression grammar.
//!
//! ```text
//! input   := decl* expr
//! decl    := "func" NAME "(" [NAME ("," NAME)*] ")" ";"
//!          | "param" NAME ("," NAME)* ";"
//!          | "var" NAME ("," NAME)* ";"
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := atom ["^" unary]
//! atom    := NUMBER | "(" expr ")" | call | NAME
//! ```
//!
//! `x`, `y`, `u` and the jets of `u` (`u_x`, `u_xy`, ...) are variables by
//! default. Declared functions take derivative suffixes: `F_u`, `h_xy`,
//! `F_{u_x,u_x}`, and `F_{int:u}` (also written `Fint`) for an antiderivative.
//! Undeclared names become parameters, or functions when followed by `(`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::canon::canonicalize;
use super::expr::{sym, Expr, FuncApp, Node, Sym};
use super::SymError;

const BUILTINS: [&str; 6] = ["exp", "ln", "log", "sin", "cos", "sqrt"];
const KEYWORDS: [&str; 3] = ["func", "param", "var"];

/// Symbol declarations used while parsing.
#[derive(Clone, Debug, Default)]
pub struct Context {
    funcs: BTreeMap<Sym, Arc<[Sym]>>,
    vars: BTreeSet<Sym>,
    params: BTreeSet<Sym>,
}

/// Jet coordinate name for `u` differentiated `i` times in x and `j` in y.
pub fn jet_name(i: usize, j: usize) -> String {
    if i + j == 0 {
        "u".to_string()
    } else {
        format!("u_{}{}", "x".repeat(i), "y".repeat(j))
    }
}

/// Inverse of [`jet_name`].
pub fn parse_jet_name(name: &str) -> Option<(usize, usize)> {
    if name == "u" {
        return Some((0, 0));
    }
    let rest = name.strip_prefix("u_")?;
    if rest.is_empty() || !rest.chars().all(|c| c == 'x' || c == 'y') {
        return None;
    }
    let i = rest.chars().filter(|c| *c == 'x').count();
    Some((i, rest.len() - i))
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn func(mut self, name: &str, params: &[&str]) -> Self {
        self.funcs
            .insert(sym(name), params.iter().map(|p| sym(p)).collect());
        self
    }

    pub fn var(mut self, name: &str) -> Self {
        self.vars.insert(sym(name));
        self
    }

    pub fn param(mut self, name: &str) -> Self {
        self.params.insert(sym(name));
        self
    }

    pub fn function_params(&self, name: &str) -> Option<&Arc<[Sym]>> {
        self.funcs.get(name)
    }

    /// Would `name` parse as a variable under this context?
    pub fn is_var(&self, name: &str) -> bool {
        !self.params.contains(name)
            && (self.vars.contains(name) || matches!(name, "x" | "y") || parse_jet_name(name).is_some())
    }

    /// Parse and canonicalize `text`. Declarations in the text extend a copy
    /// of this context.
    pub fn parse(&self, text: &str) -> Result<Expr, SymError> {
        Ok(canonicalize(&self.parse_raw(text)?.0))
    }

    /// Parse without canonicalizing; also returns the extended context.
    pub fn parse_raw(&self, text: &str) -> Result<(Expr, Context), SymError> {
        let mut p = Parser {
            src: text,
            pos: 0,
            ctx: self.clone(),
        };
        p.header()?;
        let e = p.expr()?;
        p.ws();
        if p.pos < text.len() {
            return Err(p.err("unexpected input"));
        }
        Ok((e, p.ctx))
    }
}

/// Parse with the default context.
pub fn parse(text: &str) -> Result<Expr, SymError> {
    Context::new().parse(text)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    ctx: Context,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric()
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> SymError {
        SymError::Syntax {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(k)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SymError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn word(&mut self) -> Option<String> {
        self.ws();
        let start = self.pos;
        if !self.peek().is_some_and(is_ident_start) {
            return None;
        }
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
        Some(self.src[start..self.pos].to_string())
    }

    /// Name with `_`-joined alphanumeric groups, e.g. `k_1`, `u_x`.
    fn long_name(&mut self) -> Result<String, SymError> {
        let mut name = self.word().ok_or_else(|| self.err("expected a name"))?;
        while self.peek() == Some('_') && self.peek_at(1).is_some_and(is_ident_char) {
            self.bump();
            name.push('_');
            while self.peek().is_some_and(is_ident_char) {
                name.push(self.bump().unwrap());
            }
        }
        Ok(name)
    }

    fn header(&mut self) -> Result<(), SymError> {
        loop {
            self.ws();
            let save = self.pos;
            let Some(w) = self.word() else { return Ok(()) };
            if !KEYWORDS.contains(&w.as_str()) || !self.peek().is_some_and(char::is_whitespace) {
                self.pos = save;
                return Ok(());
            }
            match w.as_str() {
                "func" => {
                    let name = self.long_name()?;
                    self.expect('(')?;
                    let mut params = Vec::new();
                    if !self.eat(')') {
                        loop {
                            self.ws();
                            params.push(sym(&self.long_name()?));
                            if self.eat(')') {
                                break;
                            }
                            self.expect(',')?;
                        }
                    }
                    self.ctx.funcs.insert(sym(&name), params.into());
                }
                kind => loop {
                    let name = sym(&self.long_name()?);
                    if kind == "var" {
                        self.ctx.params.remove(&name);
                        self.ctx.vars.insert(name);
                    } else {
                        self.ctx.vars.remove(&name);
                        self.ctx.params.insert(name);
                    }
                    if !self.eat(',') {
                        break;
                    }
                },
            }
            self.expect(';')?;
        }
    }

    fn expr(&mut self) -> Result<Expr, SymError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(Expr::product(vec![Expr::int(-1), self.term()?]));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::sum(terms) })
    }

    fn term(&mut self) -> Result<Expr, SymError> {
        let mut fs = vec![self.unary()?];
        loop {
            if self.eat('*') {
                fs.push(self.unary()?);
            } else if self.eat('/') {
                fs.push(Expr::pow(self.unary()?, Expr::int(-1)));
            } else {
                break;
            }
        }
        Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Expr::product(fs) })
    }

    fn unary(&mut self) -> Result<Expr, SymError> {
        if self.eat('-') {
            let e = self.unary()?;
            return Ok(match e.as_rational() {
                Some(r) => Expr::rational(-r),
                None => Expr::product(vec![Expr::int(-1), e]),
            });
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SymError> {
        let base = self.atom()?;
        if self.eat('^') {
            let x = self.unary()?;
            return Ok(Expr::pow(base, x));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<Expr, SymError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let int_part = &self.src[start..self.pos];
        let mut value: BigRational = BigRational::from_integer(int_part.parse::<BigInt>().unwrap());
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            let fs = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            let digits = &self.src[fs..self.pos];
            let num: BigInt = digits.parse().unwrap();
            let den = num_traits::pow(BigInt::from(10), digits.len());
            value += BigRational::new(num, den);
        }
        Ok(Expr::rational(value))
    }

    fn atom(&mut self) -> Result<Expr, SymError> {
        self.ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if is_ident_start(c) => self.name_atom(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, SymError> {
        let mut args = Vec::new();
        if self.eat(')') {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(')') {
                return Ok(args);
            }
            self.expect(',')?;
        }
    }

    fn next_is_paren(&mut self) -> bool {
        let save = self.pos;
        self.ws();
        let hit = self.peek() == Some('(');
        self.pos = save;
        hit
    }

    fn name_atom(&mut self) -> Result<Expr, SymError> {
        let start = self.pos;
        let w = self.word().unwrap();
        if self.ctx.funcs.contains_key(w.as_str()) {
            return self.func_atom(&w, None);
        }
        if let Some(base) = w.strip_suffix("int") {
            if let Some(ps) = self.ctx.funcs.get(base) {
                if ps.len() == 1 && !self.ctx.is_var(&w) {
                    return self.func_atom(base, Some(vec![-1]));
                }
            }
        }
        if BUILTINS.contains(&w.as_str()) && self.next_is_paren() {
            self.expect('(')?;
            let args = self.args()?;
            if args.len() != 1 {
                return Err(SymError::Arity {
                    name: w,
                    expected: 1,
                    got: args.len(),
                });
            }
            let a = args.into_iter().next().unwrap();
            return Ok(match w.as_str() {
                "exp" => Expr::exp(a),
                "ln" | "log" => Expr::ln(a),
                "sin" => Expr::sin(a),
                "cos" => Expr::cos(a),
                _ => Expr::pow(a, Expr::frac(1, 2)),
            });
        }
        // plain or underscore-joined name
        self.pos = start;
        let name = self.long_name()?;
        if name.starts_with("u_") && parse_jet_name(&name).is_none() && !self.ctx.params.contains(name.as_str()) {
            return Err(SymError::Syntax {
                offset: start,
                message: format!("bad jet coordinate {name}"),
            });
        }
        if let Some((i, j)) = parse_jet_name(&name) {
            if !self.ctx.params.contains(name.as_str()) {
                return Ok(Expr::var(&jet_name(i, j)));
            }
        }
        if self.ctx.is_var(&name) {
            return Ok(Expr::var(&name));
        }
        if self.ctx.params.contains(name.as_str()) || !self.next_is_paren() {
            return Ok(Expr::param(&name));
        }
        // auto-declare a function from its first use
        self.expect('(')?;
        let args = self.args()?;
        let mut params: Vec<Sym> = Vec::new();
        for (k, a) in args.iter().enumerate() {
            match a.as_var() {
                Some(v) if !params.contains(v) => params.push(v.clone()),
                _ => params.push(sym(&format!("s{}", k + 1))),
            }
        }
        let params: Arc<[Sym]> = params.into();
        self.ctx.funcs.insert(sym(&name), params.clone());
        Ok(Expr::new(Node::Func(FuncApp {
            name: sym(&name),
            deriv: vec![0; params.len()],
            params,
            args,
        })))
    }

    fn func_atom(&mut self, name: &str, preset: Option<Vec<i32>>) -> Result<Expr, SymError> {
        let params = self.ctx.funcs[name].clone();
        let mut deriv = preset.unwrap_or_else(|| vec![0; params.len()]);
        if self.peek() == Some('_') {
            self.bump();
            let slot = |p: &str, deriv: &mut Vec<i32>, by: i32, this: &Self| -> Result<(), SymError> {
                match params.iter().position(|q| &**q == p) {
                    Some(k) => {
                        deriv[k] += by;
                        Ok(())
                    }
                    None => Err(this.err(&format!("{name} has no argument {p}"))),
                }
            };
            if self.peek() == Some('{') {
                self.bump();
                loop {
                    self.ws();
                    let item_start = self.pos;
                    while self.peek().is_some_and(|c| !matches!(c, ',' | '}') && !c.is_whitespace()) {
                        self.bump();
                    }
                    let item = &self.src[item_start..self.pos];
                    if item.is_empty() {
                        return Err(self.err("empty derivative item"));
                    }
                    match item.strip_prefix("int:") {
                        Some(p) => slot(p, &mut deriv, -1, self)?,
                        None => slot(item, &mut deriv, 1, self)?,
                    }
                    self.ws();
                    if self.peek() == Some('}') {
                        self.bump();
                        break;
                    }
                    if self.peek() == Some(',') {
                        self.bump();
                    }
                }
            } else {
                let mut any = false;
                while let Some(c) = self.peek().filter(|c| is_ident_char(*c)) {
                    slot(&c.to_string(), &mut deriv, 1, self)?;
                    self.bump();
                    any = true;
                }
                if !any {
                    return Err(self.err("expected derivative variables"));
                }
            }
        }
        let args = if self.next_is_paren() {
            self.expect('(')?;
            let args = self.args()?;
            if args.len() != params.len() {
                return Err(SymError::Arity {
                    name: name.to_string(),
                    expected: params.len(),
                    got: args.len(),
                });
            }
            args
        } else {
            params.iter().map(|p| Expr::new(Node::Var(p.clone()))).collect()
        };
        Ok(Expr::new(Node::Func(FuncApp {
            name: sym(name),
            params,
            deriv,
            args,
        })))
    }
}
