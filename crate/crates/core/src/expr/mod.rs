//! Immutable symbolic expressions over exact rationals.
//!
//! An [`Expr`] is a cheaply clonable handle to a shared [`Node`]. Trees built
//! with the operator overloads are *raw*: they are only flattened, never
//! simplified. [`Expr::normalize`] produces the canonical form used for
//! structural comparison (expanded sums of monomials, sorted by the derived
//! node order, with exact rational coefficients).

mod calculus;
pub(crate) mod poly;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use calculus::{
    collect_by_monomials, derive_with, diff_raw, func_chain, series_coefficients, taylor_coefficient,
    truncate_series, FunctionDef,
};
pub use poly::{clear_denominators, is_zero, primitive};

/// Interned-ish identifier. Cloning is a reference-count bump.
pub type Name = Arc<str>;

/// Exact rational constant.
pub type Rational = BigRational;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("cannot differentiate with respect to `{0}`: not a symbol or jet coordinate")]
    NotDifferentiable(String),
    #[error("small parameter `{0}` appears non-polynomially")]
    NonPolynomialSmall(String),
    #[error("expression is not polynomial in `{0}`")]
    NonPolynomial(String),
    #[error("function `{0}` applied with {1} arguments, definition takes {2}")]
    Arity(String, usize, usize),
}

/// Derivative counts per independent variable, kept sorted by variable name
/// with no zero entries. The empty index denotes the dependent variable
/// itself.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<(Name, u32)>);

impl MultiIndex {
    pub fn new() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn from_counts<'a>(counts: impl IntoIterator<Item = (&'a str, u32)>) -> Self {
        let mut m = MultiIndex::new();
        for (v, c) in counts {
            for _ in 0..c {
                m = m.with(&name(v));
            }
        }
        m
    }

    /// `self + e_var`.
    pub fn with(&self, var: &Name) -> Self {
        let mut v = self.0.clone();
        match v.binary_search_by(|(n, _)| n.as_ref().cmp(var.as_ref())) {
            Ok(i) => v[i].1 += 1,
            Err(i) => v.insert(i, (var.clone(), 1)),
        }
        MultiIndex(v)
    }

    /// `self - e_var`, if that count is positive.
    pub fn without(&self, var: &str) -> Option<Self> {
        let mut v = self.0.clone();
        let i = v.iter().position(|(n, _)| n.as_ref() == var)?;
        if v[i].1 == 1 {
            v.remove(i);
        } else {
            v[i].1 -= 1;
        }
        Some(MultiIndex(v))
    }

    pub fn count(&self, var: &str) -> u32 {
        self.0
            .iter()
            .find(|(n, _)| n.as_ref() == var)
            .map(|(_, c)| *c)
            .unwrap_or(0)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn entries(&self) -> &[(Name, u32)] {
        &self.0
    }

    /// Variable names repeated by multiplicity, e.g. `[t, x, x]`.
    pub fn expanded(&self) -> Vec<Name> {
        self.0
            .iter()
            .flat_map(|(n, c)| std::iter::repeat_n(n.clone(), *c as usize))
            .collect()
    }

    /// Componentwise `self >= other`.
    pub fn covers(&self, other: &MultiIndex) -> bool {
        other.0.iter().all(|(n, c)| self.count(n) >= *c)
    }

    /// Componentwise difference; caller guarantees `self.covers(other)`.
    pub fn minus(&self, other: &MultiIndex) -> MultiIndex {
        let mut out = self.clone();
        for v in other.expanded() {
            out = out.without(&v).expect("covers");
        }
        out
    }
}

/// A jet coordinate `u_{alpha, s}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Jet {
    pub dep: Name,
    pub index: MultiIndex,
}

impl Jet {
    pub fn new(dep: &str, index: MultiIndex) -> Self {
        Jet { dep: name(dep), index }
    }

    pub fn order(&self) -> u32 {
        self.index.order()
    }

    pub fn derive(&self, var: &Name) -> Jet {
        Jet { dep: self.dep.clone(), index: self.index.with(var) }
    }
}

/// Application of an unknown function. `derivs[j]` counts formal partial
/// derivatives with respect to argument slot `j`. `order` tags members of a
/// perturbation family (`xi_(k)`); plain unknown functions carry `None`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncApp {
    pub name: Name,
    pub order: Option<u32>,
    pub derivs: Vec<u32>,
    pub args: Vec<Expr>,
}

impl FuncApp {
    pub fn total_derivs(&self) -> u32 {
        self.derivs.iter().sum()
    }
}

/// Node kinds. The derived `Ord` (kind first, then payload) is the canonical
/// ordering used for sorting sums and products.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(Rational),
    Param(Name),
    Var(Name),
    Jet(Jet),
    Func(FuncApp),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Rational),
    Exp(Expr),
    Sin(Expr),
    Cos(Expr),
    Dawson(Expr),
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
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
        self.0.cmp(&other.0)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::render_plain(self))
    }
}

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn zero() -> Self {
        Expr::new(Node::Num(Rational::zero()))
    }

    pub fn one() -> Self {
        Expr::new(Node::Num(Rational::one()))
    }

    pub fn int(n: i64) -> Self {
        Expr::new(Node::Num(int(n)))
    }

    pub fn rat(n: i64, d: i64) -> Self {
        Expr::new(Node::Num(rat(n, d)))
    }

    pub fn num(q: Rational) -> Self {
        Expr::new(Node::Num(q))
    }

    pub fn param(n: &str) -> Self {
        Expr::new(Node::Param(name(n)))
    }

    pub fn var(n: &str) -> Self {
        Expr::new(Node::Var(name(n)))
    }

    /// `jet("u", &["x", "x"])` is `u_xx`.
    pub fn jet(dep: &str, vars: &[&str]) -> Self {
        let mut idx = MultiIndex::new();
        for v in vars {
            idx = idx.with(&name(v));
        }
        Expr::new(Node::Jet(Jet::new(dep, idx)))
    }

    pub fn from_jet(j: Jet) -> Self {
        Expr::new(Node::Jet(j))
    }

    pub fn func(n: &str, args: Vec<Expr>) -> Self {
        let derivs = vec![0; args.len()];
        Expr::new(Node::Func(FuncApp { name: name(n), order: None, derivs, args }))
    }

    pub fn from_func(app: FuncApp) -> Self {
        Expr::new(Node::Func(app))
    }

    pub fn add(terms: Vec<Expr>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t.node() {
                Node::Add(inner) => flat.extend(inner.iter().cloned()),
                Node::Num(q) if q.is_zero() => {}
                _ => flat.push(t),
            }
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::new(Node::Add(flat)),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Self {
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            match f.node() {
                Node::Mul(inner) => flat.extend(inner.iter().cloned()),
                Node::Num(q) if q.is_one() => {}
                Node::Num(q) if q.is_zero() => return Expr::zero(),
                _ => flat.push(f),
            }
        }
        match flat.len() {
            0 => Expr::one(),
            1 => flat.pop().unwrap(),
            _ => Expr::new(Node::Mul(flat)),
        }
    }

    pub fn pow(&self, q: Rational) -> Self {
        if q.is_zero() {
            return Expr::one();
        }
        if q.is_one() {
            return self.clone();
        }
        Expr::new(Node::Pow(self.clone(), q))
    }

    pub fn powi(&self, n: i64) -> Self {
        self.pow(int(n))
    }

    pub fn sqrt(&self) -> Self {
        self.pow(rat(1, 2))
    }

    pub fn recip(&self) -> Self {
        self.pow(int(-1))
    }

    pub fn exp(&self) -> Self {
        Expr::new(Node::Exp(self.clone()))
    }

    pub fn sin(&self) -> Self {
        Expr::new(Node::Sin(self.clone()))
    }

    pub fn cos(&self) -> Self {
        Expr::new(Node::Cos(self.clone()))
    }

    pub fn dawson(&self) -> Self {
        Expr::new(Node::Dawson(self.clone()))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_num_zero(&self) -> bool {
        matches!(self.node(), Node::Num(q) if q.is_zero())
    }

    pub fn is_num_one(&self) -> bool {
        matches!(self.node(), Node::Num(q) if q.is_one())
    }

    pub fn as_jet(&self) -> Option<&Jet> {
        match self.node() {
            Node::Jet(j) => Some(j),
            _ => None,
        }
    }

    /// True for nodes usable as substitution keys and differentiation targets.
    pub fn is_symbol(&self) -> bool {
        matches!(self.node(), Node::Param(_) | Node::Var(_) | Node::Jet(_))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Num(_) | Node::Param(_) | Node::Var(_) | Node::Jet(_) => vec![],
            Node::Func(f) => f.args.iter().collect(),
            Node::Add(v) | Node::Mul(v) => v.iter().collect(),
            Node::Pow(b, _) => vec![b],
            Node::Exp(a) | Node::Sin(a) | Node::Cos(a) | Node::Dawson(a) => vec![a],
        }
    }

    /// Pre-order visit of every node.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn contains(&self, target: &Expr) -> bool {
        if self == target {
            return true;
        }
        self.children().iter().any(|c| c.contains(target))
    }

    pub fn any(&self, pred: &impl Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        self.children().iter().any(|c| c.any(pred))
    }

    pub fn jets(&self) -> BTreeSet<Jet> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Jet(j) = e.node() {
                out.insert(j.clone());
            }
        });
        out
    }

    pub fn params(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Param(p) = e.node() {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Var(p) = e.node() {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn funcs(&self) -> BTreeSet<FuncApp> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Func(f) = e.node() {
                out.insert(f.clone());
            }
        });
        out
    }

    /// Highest jet order present, 0 when there are no derivatives.
    pub fn max_jet_order(&self) -> u32 {
        self.jets().iter().map(Jet::order).max().unwrap_or(0)
    }

    /// Rebuild bottom-up, letting `f` replace any node. `f` sees children
    /// already mapped.
    pub fn map_bottom_up(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self.node() {
            Node::Num(_) | Node::Param(_) | Node::Var(_) | Node::Jet(_) => self.clone(),
            Node::Func(app) => {
                let args = app.args.iter().map(|a| a.map_bottom_up(f)).collect();
                Expr::from_func(FuncApp { args, ..app.clone() })
            }
            Node::Add(v) => Expr::new(Node::Add(v.iter().map(|c| c.map_bottom_up(f)).collect())),
            Node::Mul(v) => Expr::new(Node::Mul(v.iter().map(|c| c.map_bottom_up(f)).collect())),
            Node::Pow(b, q) => Expr::new(Node::Pow(b.map_bottom_up(f), q.clone())),
            Node::Exp(a) => Expr::new(Node::Exp(a.map_bottom_up(f))),
            Node::Sin(a) => Expr::new(Node::Sin(a.map_bottom_up(f))),
            Node::Cos(a) => Expr::new(Node::Cos(a.map_bottom_up(f))),
            Node::Dawson(a) => Expr::new(Node::Dawson(a.map_bottom_up(f))),
        };
        f(rebuilt)
    }

    /// Node count, used to bound work in tests and diagnostics.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn normalize(&self) -> Expr {
        poly::normalize(self)
    }
}

/// Convenience: rational to f64 (lossy).
pub fn rational_to_f64(q: &Rational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Scale down huge numerators/denominators before dividing.
            let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000);
            let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

pub(crate) fn is_integer(q: &Rational) -> bool {
    q.denom().is_one()
}

pub(crate) fn is_nonneg_integer(q: &Rational) -> bool {
    is_integer(q) && !q.is_negative()
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, rhs])
    }
}

impl ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(vec![self.clone(), rhs.clone()])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, -rhs])
    }
}

impl ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::add(vec![self.clone(), -rhs.clone()])
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs])
    }
}

impl ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(vec![self.clone(), rhs.clone()])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs.recip()])
    }
}

impl ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::mul(vec![self.clone(), rhs.recip()])
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Num(q) => Expr::num(-q.clone()),
            _ => Expr::mul(vec![Expr::int(-1), self]),
        }
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}
