//! Differentiation, substitution, function instantiation, series truncation
//! and monomial collection.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, ToPrimitive};

use super::poly::{from_poly, mono_expr, to_poly, Mono, Poly};
use super::{int, Expr, ExprError, FuncApp, Name, Node, Rational};

/// Apply a derivation: linear, Leibniz, chain rule through the elementary
/// functions. `leaf` supplies the derivative of symbols and function
/// applications. The result is raw (not normalized).
pub fn derive_with<E>(
    e: &Expr,
    leaf: &mut impl FnMut(&Expr) -> Result<Expr, E>,
) -> Result<Expr, E> {
    Ok(match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Param(_) | Node::Var(_) | Node::Jet(_) | Node::Func(_) => leaf(e)?,
        Node::Add(v) => {
            let mut out = Vec::with_capacity(v.len());
            for c in v {
                out.push(derive_with(c, leaf)?);
            }
            Expr::add(out)
        }
        Node::Mul(v) => {
            let mut terms = Vec::new();
            for i in 0..v.len() {
                let d = derive_with(&v[i], leaf)?;
                if d.is_num_zero() {
                    continue;
                }
                let mut fs: Vec<Expr> = v.clone();
                fs[i] = d;
                terms.push(Expr::mul(fs));
            }
            Expr::add(terms)
        }
        Node::Pow(b, q) => {
            let d = derive_with(b, leaf)?;
            if d.is_num_zero() {
                return Ok(Expr::zero());
            }
            Expr::mul(vec![Expr::num(q.clone()), b.pow(q - Rational::one()), d])
        }
        Node::Exp(a) => {
            let d = derive_with(a, leaf)?;
            Expr::mul(vec![e.clone(), d])
        }
        Node::Sin(a) => {
            let d = derive_with(a, leaf)?;
            Expr::mul(vec![a.cos(), d])
        }
        Node::Cos(a) => {
            let d = derive_with(a, leaf)?;
            Expr::mul(vec![Expr::int(-1), a.sin(), d])
        }
        Node::Dawson(a) => {
            // D'(y) = 1 - 2 y D(y)
            let d = derive_with(a, leaf)?;
            let inner = Expr::add(vec![Expr::one(), Expr::mul(vec![Expr::int(-2), a.clone(), e.clone()])]);
            Expr::mul(vec![inner, d])
        }
    })
}

/// Chain rule for a function application given derivatives of its arguments.
pub fn func_chain<E>(
    app: &FuncApp,
    d_arg: &mut impl FnMut(&Expr) -> Result<Expr, E>,
) -> Result<Expr, E> {
    let mut terms = Vec::new();
    for (j, a) in app.args.iter().enumerate() {
        let d = d_arg(a)?;
        if d.is_num_zero() {
            continue;
        }
        let mut derivs = app.derivs.clone();
        derivs[j] += 1;
        let f = Expr::from_func(FuncApp { derivs, ..app.clone() });
        terms.push(Expr::mul(vec![f, d]));
    }
    Ok(Expr::add(terms))
}

/// Partial derivative without normalization.
pub fn diff_raw(e: &Expr, v: &Expr) -> Result<Expr, ExprError> {
    if !v.is_symbol() {
        return Err(ExprError::NotDifferentiable(v.to_string()));
    }
    fn go(e: &Expr, v: &Expr) -> Expr {
        let mut leaf = |a: &Expr| -> Result<Expr, ()> {
            Ok(match a.node() {
                Node::Func(app) => func_chain(app, &mut |x: &Expr| Ok::<_, ()>(go(x, v)))?,
                _ if a == v => Expr::one(),
                _ => Expr::zero(),
            })
        };
        derive_with(e, &mut leaf).unwrap_or_else(|_| Expr::zero())
    }
    Ok(go(e, v))
}

impl Expr {
    /// Partial derivative treating every other symbol as constant.
    pub fn diff(&self, v: &Expr) -> Result<Expr, ExprError> {
        Ok(diff_raw(self, v)?.normalize())
    }

    /// Simultaneous replacement of nodes, without normalization.
    pub fn substitute_raw(&self, map: &BTreeMap<Expr, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        fn go(e: &Expr, map: &BTreeMap<Expr, Expr>) -> Expr {
            if let Some(r) = map.get(e) {
                return r.clone();
            }
            match e.node() {
                Node::Num(_) | Node::Param(_) | Node::Var(_) | Node::Jet(_) => e.clone(),
                Node::Func(app) => Expr::from_func(FuncApp {
                    args: app.args.iter().map(|a| go(a, map)).collect(),
                    ..app.clone()
                }),
                Node::Add(v) => Expr::add(v.iter().map(|c| go(c, map)).collect()),
                Node::Mul(v) => Expr::mul(v.iter().map(|c| go(c, map)).collect()),
                Node::Pow(b, q) => go(b, map).pow(q.clone()),
                Node::Exp(a) => go(a, map).exp(),
                Node::Sin(a) => go(a, map).sin(),
                Node::Cos(a) => go(a, map).cos(),
                Node::Dawson(a) => go(a, map).dawson(),
            }
        }
        go(self, map)
    }

    /// Simultaneous (non-recursive) replacement, then normalize.
    pub fn substitute(&self, map: &BTreeMap<Expr, Expr>) -> Expr {
        self.substitute_raw(map).normalize()
    }

    pub fn subs(&self, pairs: &[(Expr, Expr)]) -> Expr {
        let map: BTreeMap<Expr, Expr> = pairs.iter().cloned().collect();
        self.substitute(&map)
    }

    /// Replace every application of `def.name` (any derivative) by the
    /// correspondingly differentiated body. Raw result.
    pub fn instantiate_raw(&self, def: &FunctionDef) -> Result<Expr, ExprError> {
        let mut cache: HashMap<Vec<u32>, Expr> = HashMap::new();
        let mut err = None;
        let out = self.map_bottom_up(&mut |e: Expr| {
            if let Node::Func(app) = e.node() {
                if app.name == def.name && app.order == def.order {
                    if app.args.len() != def.params.len() {
                        err = Some(ExprError::Arity(
                            def.name.to_string(),
                            app.args.len(),
                            def.params.len(),
                        ));
                        return e;
                    }
                    let body = cache
                        .entry(app.derivs.clone())
                        .or_insert_with(|| def.derivative(&app.derivs))
                        .clone();
                    let map: BTreeMap<Expr, Expr> = def
                        .params
                        .iter()
                        .cloned()
                        .zip(app.args.iter().cloned())
                        .collect();
                    return body.substitute_raw(&map);
                }
            }
            e
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    pub fn instantiate(&self, def: &FunctionDef) -> Result<Expr, ExprError> {
        Ok(self.instantiate_raw(def)?.normalize())
    }
}

/// A closed form `name(params...) = body` for an unknown function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: Name,
    pub order: Option<u32>,
    /// Formal parameters as symbols (independent variables or jets).
    pub params: Vec<Expr>,
    pub body: Expr,
}

impl FunctionDef {
    /// Closed form in independent variables `params`.
    pub fn new(name: &str, params: &[&str], body: Expr) -> Self {
        FunctionDef {
            name: super::name(name),
            order: None,
            params: params.iter().map(|p| Expr::var(p)).collect(),
            body,
        }
    }

    pub fn with_symbols(name: &str, params: Vec<Expr>, body: Expr) -> Self {
        FunctionDef { name: super::name(name), order: None, params, body }
    }

    /// Body differentiated `derivs[j]` times in parameter `j`.
    pub fn derivative(&self, derivs: &[u32]) -> Expr {
        let mut b = self.body.clone();
        for (j, &n) in derivs.iter().enumerate() {
            for _ in 0..n {
                b = diff_raw(&b, &self.params[j]).expect("params are symbols").normalize();
            }
        }
        b
    }
}

fn eps_degree(m: &Mono, eps: &Expr) -> Result<Option<u32>, ()> {
    if m.exp.terms.keys().any(|mm| mono_mentions(mm, eps)) {
        return Err(());
    }
    let mut deg = None;
    for (b, q) in &m.factors {
        if b == eps {
            if !(q.is_integer() && !q.is_negative()) {
                return Err(());
            }
            deg = q.to_integer().to_u32();
        } else if b.contains(eps) {
            return Err(());
        }
    }
    Ok(deg)
}

fn mono_mentions(m: &Mono, s: &Expr) -> bool {
    m.factors.keys().any(|b| b.contains(s)) || m.exp.terms.keys().any(|mm| mono_mentions(mm, s))
}

/// Coefficients of `eps^0 .. eps^p` of a polynomial in `eps`.
pub fn series_coefficients(e: &Expr, eps: &str, p: u32) -> Result<Vec<Expr>, ExprError> {
    let sym = Expr::param(eps);
    let poly = to_poly(e);
    let mut parts: Vec<Poly> = vec![Poly::zero(); p as usize + 1];
    for (m, c) in poly.terms {
        let deg = eps_degree(&m, &sym).map_err(|_| ExprError::NonPolynomialSmall(eps.into()))?;
        let k = deg.unwrap_or(0);
        if k > p {
            continue;
        }
        let mut m = m;
        m.factors.remove(&sym);
        parts[k as usize].add_term(m, c);
    }
    Ok(parts.iter().map(from_poly).collect())
}

/// Drop all monomials of degree greater than `p` in `eps`.
pub fn truncate_series(e: &Expr, eps: &str, p: u32) -> Result<Expr, ExprError> {
    let sym = Expr::param(eps);
    let coeffs = series_coefficients(e, eps, p)?;
    let mut terms = Vec::new();
    for (k, c) in coeffs.into_iter().enumerate() {
        terms.push(Expr::mul(vec![sym.powi(k as i64), c]));
    }
    Ok(Expr::add(terms).normalize())
}

/// Split `e` as `sum monomial * coefficient` with monomials in `vars`.
/// Keys are the canonical monomials (`1` for the constant part).
pub fn collect_by_monomials(
    e: &Expr,
    vars: &[Expr],
) -> Result<BTreeMap<Expr, Expr>, ExprError> {
    let poly = to_poly(e);
    let mut buckets: BTreeMap<Mono, Poly> = BTreeMap::new();
    for (m, c) in poly.terms {
        let mut key = Mono::one();
        let mut rest = Mono { factors: BTreeMap::new(), exp: m.exp.clone() };
        for v in vars {
            if m.exp.terms.keys().any(|mm| mono_mentions(mm, v)) {
                return Err(ExprError::NonPolynomial(v.to_string()));
            }
        }
        for (b, q) in m.factors {
            if vars.contains(&b) {
                if !(q.is_integer() && q.is_positive()) {
                    return Err(ExprError::NonPolynomial(b.to_string()));
                }
                key.factors.insert(b, q);
            } else {
                if let Some(v) = vars.iter().find(|v| b.contains(v)) {
                    return Err(ExprError::NonPolynomial(v.to_string()));
                }
                rest.factors.insert(b, q);
            }
        }
        buckets.entry(key).or_default().add_term(rest, c);
    }
    Ok(buckets
        .into_iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(k, p)| (mono_expr(&k), from_poly(&p)))
        .collect())
}

/// `k`-th Taylor coefficient in `eps` at zero: `(1/k!) d^k e / d eps^k |_0`.
pub fn taylor_coefficient(e: &Expr, eps: &str, k: u32) -> Expr {
    let sym = Expr::param(eps);
    let mut d = e.clone();
    let mut fact = int(1);
    for i in 1..=k {
        d = diff_raw(&d, &sym).expect("symbol").normalize();
        fact *= int(i as i64);
    }
    let at0 = d.subs(&[(sym, Expr::zero())]);
    (Expr::num(fact.recip()) * at0).normalize()
}
