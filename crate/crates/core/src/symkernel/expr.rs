//! Expression tree.
//!
//! `Expr` is an immutable, reference-counted tree. Constructors in this
//! module build raw nodes; [`canonicalize`](super::canonicalize) turns any
//! tree into its canonical form. The arithmetic operator impls at the bottom
//! of the file always return canonical results.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::canon::canonicalize;

/// Interned-ish symbol name.
pub type Sym = Arc<str>;

pub fn sym(name: &str) -> Sym {
    Arc::from(name)
}

/// An application of a function symbol, possibly differentiated.
///
/// `deriv[k]` counts derivatives with respect to argument slot `k`; the
/// value `-1` denotes an antiderivative in that slot (the `Fint` symbol).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncApp {
    pub name: Sym,
    pub params: Arc<[Sym]>,
    pub deriv: Vec<i32>,
    pub args: Vec<Expr>,
}

impl FuncApp {
    /// True when the application is to the declared parameter variables.
    pub fn has_default_args(&self) -> bool {
        self.args.len() == self.params.len()
            && self
                .args
                .iter()
                .zip(self.params.iter())
                .all(|(a, p)| a.as_var() == Some(p))
    }

    pub fn order(&self) -> i32 {
        self.deriv.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Rational(BigRational),
    Param(Sym),
    Var(Sym),
    Func(FuncApp),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, Expr),
    Exp(Expr),
    Ln(Expr),
    Sin(Expr),
    Cos(Expr),
}

struct Inner {
    node: Node,
    canon: bool,
}

/// Equality, ordering and hashing look at the node only; the canonical flag
/// is a cache marker set by the canonicalizer.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.node == other.0.node
    }
}

impl Eq for Expr {}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return std::cmp::Ordering::Equal;
        }
        self.0.node.cmp(&other.0.node)
    }
}

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.node.hash(state)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Expr {
    pub fn new(node: Node) -> Self {
        let canon = matches!(node, Node::Rational(_) | Node::Param(_) | Node::Var(_));
        Expr(Arc::new(Inner { node, canon }))
    }

    pub(crate) fn new_canonical(node: Node) -> Self {
        Expr(Arc::new(Inner { node, canon: true }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// True when this tree came out of the canonicalizer.
    pub fn is_canonical(&self) -> bool {
        self.0.canon
    }

    pub fn rational(r: BigRational) -> Self {
        Expr::new(Node::Rational(r))
    }

    pub fn int(n: i64) -> Self {
        Expr::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Expr::rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn var(name: &str) -> Self {
        Expr::new(Node::Var(sym(name)))
    }

    pub fn param(name: &str) -> Self {
        Expr::new(Node::Param(sym(name)))
    }

    /// Opaque function applied to its declared parameter variables.
    pub fn func(name: &str, params: &[&str]) -> Self {
        let params: Arc<[Sym]> = params.iter().map(|p| sym(p)).collect();
        let args = params.iter().map(|p| Expr::new(Node::Var(p.clone()))).collect();
        Expr::new(Node::Func(FuncApp {
            name: sym(name),
            deriv: vec![0; params.len()],
            params,
            args,
        }))
    }

    /// Opaque function applied to explicit arguments.
    pub fn func_app(name: &str, params: &[&str], args: Vec<Expr>) -> Self {
        assert_eq!(params.len(), args.len(), "arity mismatch for {name}");
        let params: Arc<[Sym]> = params.iter().map(|p| sym(p)).collect();
        Expr::new(Node::Func(FuncApp {
            name: sym(name),
            deriv: vec![0; params.len()],
            params,
            args,
        }))
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        Expr::new(Node::Sum(terms))
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        Expr::new(Node::Product(factors))
    }

    pub fn pow(base: Expr, exp: Expr) -> Self {
        Expr::new(Node::Power(base, exp))
    }

    pub fn exp(arg: Expr) -> Self {
        Expr::new(Node::Exp(arg))
    }

    pub fn ln(arg: Expr) -> Self {
        Expr::new(Node::Ln(arg))
    }

    pub fn sin(arg: Expr) -> Self {
        Expr::new(Node::Sin(arg))
    }

    pub fn cos(arg: Expr) -> Self {
        Expr::new(Node::Cos(arg))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&Sym> {
        match self.node() {
            Node::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_func(&self) -> Option<&FuncApp> {
        match self.node() {
            Node::Func(f) => Some(f),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Rational(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Rational(r) if r.is_one())
    }

    pub fn is_negative_rational(&self) -> bool {
        matches!(self.node(), Node::Rational(r) if r.is_negative())
    }

    /// Direct children, in storage order. Function arguments count as children.
    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Rational(_) | Node::Param(_) | Node::Var(_) => vec![],
            Node::Func(f) => f.args.iter().collect(),
            Node::Sum(v) | Node::Product(v) => v.iter().collect(),
            Node::Power(b, e) => vec![b, e],
            Node::Exp(a) | Node::Ln(a) | Node::Sin(a) | Node::Cos(a) => vec![a],
        }
    }

    /// Rebuild this node with new children (same arity as `children()`).
    pub fn with_children(&self, kids: Vec<Expr>) -> Expr {
        let mut kids = kids.into_iter();
        let mut next = || kids.next().expect("child count");
        match self.node() {
            Node::Rational(_) | Node::Param(_) | Node::Var(_) => self.clone(),
            Node::Func(f) => {
                let args = (0..f.args.len()).map(|_| next()).collect();
                Expr::new(Node::Func(FuncApp { args, ..f.clone() }))
            }
            Node::Sum(v) => Expr::sum((0..v.len()).map(|_| next()).collect()),
            Node::Product(v) => Expr::product((0..v.len()).map(|_| next()).collect()),
            Node::Power(_, _) => {
                let b = next();
                Expr::pow(b, next())
            }
            Node::Exp(_) => Expr::exp(next()),
            Node::Ln(_) => Expr::ln(next()),
            Node::Sin(_) => Expr::sin(next()),
            Node::Cos(_) => Expr::cos(next()),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Var(v) = e.node() {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn free_params(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Param(v) = e.node() {
                out.insert(v.clone());
            }
        });
        out
    }

    /// Function symbols used, with their declared parameter lists.
    pub fn functions(&self) -> BTreeSet<(Sym, Arc<[Sym]>)> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Func(f) = e.node() {
                out.insert((f.name.clone(), f.params.clone()));
            }
        });
        out
    }

    pub fn contains_var(&self, name: &str) -> bool {
        let mut hit = false;
        self.visit_until(&mut |e| {
            if let Node::Var(v) = e.node() {
                if &**v == name {
                    hit = true;
                }
            }
            hit
        });
        hit
    }

    pub fn contains_func(&self, name: &str) -> bool {
        let mut hit = false;
        self.visit_until(&mut |e| {
            if let Node::Func(f) = e.node() {
                if &*f.name == name {
                    hit = true;
                }
            }
            hit
        });
        hit
    }

    /// Pre-order traversal.
    pub fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    fn visit_until<F: FnMut(&Expr) -> bool>(&self, f: &mut F) -> bool {
        if f(self) {
            return true;
        }
        self.children().into_iter().any(|c| c.visit_until(f))
    }

    /// Bottom-up rewrite; `f` sees nodes whose children are already rewritten.
    pub fn map_bottom_up<F: FnMut(&Expr) -> Expr>(&self, f: &mut F) -> Expr {
        let kids: Vec<Expr> = self.children().into_iter().map(|c| c.map_bottom_up(f)).collect();
        let rebuilt = if kids.is_empty() { self.clone() } else { self.with_children(kids) };
        f(&rebuilt)
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Shorthand for [`canonicalize`](super::canonicalize).
    pub fn canon(&self) -> Expr {
        canonicalize(self)
    }

    /// Canonical negation.
    pub fn neg(&self) -> Expr {
        canonicalize(&Expr::product(vec![Expr::int(-1), self.clone()]))
    }

    pub fn powi(&self, n: i64) -> Expr {
        canonicalize(&Expr::pow(self.clone(), Expr::int(n)))
    }

    pub fn powe(&self, e: &Expr) -> Expr {
        canonicalize(&Expr::pow(self.clone(), e.clone()))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }
}

pub fn is_integer(r: &BigRational) -> bool {
    r.denom().is_one()
}

macro_rules! canon_binop {
    ($trait:ident, $method:ident, $build:expr) => {
        impl std::ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let build: fn(Expr, Expr) -> Expr = $build;
                canonicalize(&build(self.clone(), rhs.clone()))
            }
        }
        impl std::ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$method(&rhs)
            }
        }
        impl std::ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl std::ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
    };
}

canon_binop!(Add, add, |a, b| Expr::sum(vec![a, b]));
canon_binop!(Sub, sub, |a, b| Expr::sum(vec![
    a,
    Expr::product(vec![Expr::int(-1), b])
]));
canon_binop!(Mul, mul, |a, b| Expr::product(vec![a, b]));
canon_binop!(Div, div, |a, b| Expr::product(vec![
    a,
    Expr::pow(b, Expr::int(-1))
]));

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<BigRational> for Expr {
    fn from(r: BigRational) -> Self {
        Expr::rational(r)
    }
}

/// Canonical sum of many expressions.
pub fn sum_of<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
    canonicalize(&Expr::sum(items.into_iter().collect()))
}

/// Canonical product of many expressions.
pub fn product_of<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
    canonicalize(&Expr::product(items.into_iter().collect()))
}
