//! Canonical form: expressions are converted to a sum of monomials over
//! atoms and converted back with every list sorted.
//!
//! Atoms are symbols, function applications, `sin`/`cos`/`dawson` of a
//! canonical argument, fractional powers of positive rationals, and powers of
//! compound bases (sums that cannot be expanded because the exponent is
//! negative or fractional). Exponentials are folded into one `exp` factor per
//! monomial whose argument is itself a canonical sum.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{int, is_integer, is_nonneg_integer, Expr, FuncApp, Node, Rational};

type Q = Rational;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub(crate) struct Mono {
    pub factors: BTreeMap<Expr, Q>,
    pub exp: Poly,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub(crate) struct Poly {
    pub terms: BTreeMap<Mono, Q>,
}

impl Mono {
    pub fn one() -> Self {
        Mono::default()
    }

    pub fn atom(base: Expr, q: Q) -> Self {
        let mut factors = BTreeMap::new();
        factors.insert(base, q);
        Mono { factors, exp: Poly::zero() }
    }

    fn is_one(&self) -> bool {
        self.factors.is_empty() && self.exp.is_zero()
    }
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(q: Q) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), q);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: Mono, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_poly(&mut self, other: Poly) {
        for (m, c) in other.terms {
            self.add_term(m, c);
        }
    }

    pub fn scale(&self, q: &Q) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let (m, needs_settle) = mono_mul(ma, mb);
                let c = ca * cb;
                if needs_settle {
                    out.add_poly(settle(m, c));
                } else {
                    out.add_term(m, c);
                }
            }
        }
        out
    }

    fn powi(&self, mut n: u64) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::constant(Q::one());
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

fn is_compound(e: &Expr) -> bool {
    matches!(e.node(), Node::Add(_) | Node::Mul(_))
}

/// Product of two monomials; the flag says whether settling may change it.
fn mono_mul(a: &Mono, b: &Mono) -> (Mono, bool) {
    let mut factors = a.factors.clone();
    let mut needs = false;
    for (base, q) in &b.factors {
        match factors.get_mut(base) {
            Some(e) => {
                *e += q;
                needs = true;
            }
            None => {
                factors.insert(base.clone(), q.clone());
            }
        }
    }
    let mut exp = a.exp.clone();
    exp.add_poly(b.exp.clone());
    let m = Mono { factors, exp };
    let needs = needs || m.factors.iter().any(|(b, q)| unsettled(b, q));
    (m, needs)
}

fn unsettled(base: &Expr, q: &Q) -> bool {
    match base.node() {
        Node::Num(_) => is_integer(q) || *q >= Q::one() || q.is_negative(),
        Node::Sin(_) => is_integer(q) && *q >= int(2),
        _ => q.is_zero() || (is_compound(base) && *q >= Q::one()),
    }
}

/// Apply the atom rewrite rules to `c * m` after exponents changed.
fn settle(m: Mono, mut c: Q) -> Poly {
    let mut kept = BTreeMap::new();
    let mut extra: Vec<Poly> = Vec::new();
    for (base, q) in m.factors {
        if q.is_zero() {
            continue;
        }
        match base.node() {
            Node::Num(r) if !r.is_zero() => {
                let k = q.floor();
                let frac = &q - &k;
                let kk = k.to_integer().to_i64().unwrap_or(0);
                c *= rat_powi(r, kk);
                if !frac.is_zero() {
                    kept.insert(base, frac);
                }
            }
            _ if is_compound(&base) && q >= Q::one() => {
                let k = q.floor();
                let frac = &q - &k;
                let kk = k.to_integer().to_u64().unwrap_or(0);
                extra.push(to_poly(&base).powi(kk));
                if !frac.is_zero() {
                    kept.insert(base, frac);
                }
            }
            Node::Sin(arg) if is_integer(&q) && q >= int(2) => {
                // sin^n -> sin^(n-2) (1 - cos^2)
                let rest = &q - int(2);
                if !rest.is_zero() {
                    kept.insert(base.clone(), rest);
                }
                let mut p = Poly::constant(Q::one());
                p.add_term(Mono::atom(arg.cos_canonical(), int(2)), -Q::one());
                extra.push(p);
            }
            _ => {
                kept.insert(base, q);
            }
        }
    }
    let mut out = Poly::zero();
    out.add_term(Mono { factors: kept, exp: m.exp }, c);
    for p in extra {
        out = out.mul(&p);
    }
    out
}

fn rat_powi(r: &Q, k: i64) -> Q {
    if k >= 0 {
        num_traits::pow(r.clone(), k as usize)
    } else {
        num_traits::pow(r.recip(), (-k) as usize)
    }
}

fn int_root(n: &BigInt, b: u32) -> Option<BigInt> {
    if n.is_negative() {
        if b.is_multiple_of(2) {
            return None;
        }
        return int_root(&-n, b).map(|r| -r);
    }
    let r = n.nth_root(b);
    (num_traits::pow(r.clone(), b as usize) == *n).then_some(r)
}

/// `r^q` for a nonzero rational `r`: returns the rational part and an
/// optional leftover atom `r'^f` with `f` in (0,1).
fn rat_pow(r: &Q, q: &Q) -> (Q, Option<(Q, Q)>) {
    let k = q.floor();
    let frac = q - &k;
    let mut coeff = rat_powi(r, k.to_integer().to_i64().unwrap_or(0));
    if frac.is_zero() {
        return (coeff, None);
    }
    let a = frac.numer().to_u32().unwrap_or(1);
    let b = frac.denom().to_u32().unwrap_or(1);
    if let (Some(n), Some(d)) = (int_root(r.numer(), b), int_root(r.denom(), b)) {
        coeff *= num_traits::pow(Q::new(n, d), a as usize);
        return (coeff, None);
    }
    // pull out perfect b-th power factors of numerator and denominator
    let (n_out, n_in) = extract_powers(r.numer(), b);
    let (d_out, d_in) = extract_powers(r.denom(), b);
    coeff *= num_traits::pow(Q::new(n_out, d_out), a as usize);
    let rest = Q::new(n_in, d_in);
    if rest.is_one() {
        return (coeff, None);
    }
    (coeff, Some((rest, frac)))
}

/// Split `n = out^b * inner` by trial division over small primes.
fn extract_powers(n: &BigInt, b: u32) -> (BigInt, BigInt) {
    let mut out = BigInt::one();
    let mut inner = n.clone();
    let mut p = 2u32;
    while p < 1000 {
        let pb = num_traits::pow(BigInt::from(p), b as usize);
        while (&inner % &pb).is_zero() {
            inner /= &pb;
            out *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    (out, inner)
}

fn pow_poly(p: &Poly, q: &Q) -> Poly {
    if is_nonneg_integer(q) {
        return p.powi(q.to_integer().to_u64().unwrap_or(0));
    }
    if p.is_zero() {
        // division by zero survives as an atom so evaluation can report it
        let mut out = Poly::zero();
        out.add_term(Mono::atom(Expr::zero(), q.clone()), Q::one());
        return out;
    }
    if p.terms.len() == 1 {
        let (m, c) = p.terms.iter().next().unwrap();
        if c.is_positive() || is_integer(q) {
            let (coeff, leftover) = rat_pow(c, q);
            let mut factors = BTreeMap::new();
            for (b, e) in &m.factors {
                factors.insert(b.clone(), e * q);
            }
            if let Some((r, f)) = leftover {
                let key = Expr::num(r);
                let e = factors.remove(&key).unwrap_or_else(Q::zero) + f;
                factors.insert(key, e);
            }
            let exp = m.exp.scale(q);
            return settle(Mono { factors, exp }, coeff);
        }
        // (-m)^f with f fractional: keep the whole monomial as a base
        let (coeff, leftover) = rat_pow(&c.abs(), q);
        let base = from_poly(&Poly { terms: [(m.clone(), -Q::one())].into_iter().collect() });
        let mut mono = Mono::atom(base, q.clone());
        if let Some((r, f)) = leftover {
            mono.factors.insert(Expr::num(r), f);
        }
        return settle(mono, coeff);
    }
    if *q > Q::one() {
        let k = q.floor();
        let frac = q - &k;
        let whole = p.powi(k.to_integer().to_u64().unwrap_or(0));
        return whole.mul(&pow_poly(p, &frac));
    }
    let lead = p.terms.values().next().unwrap().clone();
    let content = if is_integer(q) { lead } else { lead.abs() };
    let inner = p.scale(&content.recip());
    let (coeff, leftover) = rat_pow(&content, q);
    let mut mono = Mono::atom(from_poly(&inner), q.clone());
    if let Some((r, f)) = leftover {
        mono.factors.insert(Expr::num(r), f);
    }
    settle(mono, coeff)
}

/// Split off a sign so that the leading term of the argument is positive.
fn sign_canonical(p: Poly) -> (Poly, bool) {
    match p.terms.values().next() {
        Some(c) if c.is_negative() => (p.scale(&-Q::one()), true),
        _ => (p, false),
    }
}

impl Expr {
    fn cos_canonical(&self) -> Expr {
        Expr::new(Node::Cos(self.clone()))
    }
}

pub(crate) fn to_poly(e: &Expr) -> Poly {
    match e.node() {
        Node::Num(q) => Poly::constant(q.clone()),
        Node::Param(_) | Node::Var(_) | Node::Jet(_) => {
            let mut p = Poly::zero();
            p.add_term(Mono::atom(e.clone(), Q::one()), Q::one());
            p
        }
        Node::Func(app) => {
            let args = app.args.iter().map(normalize).collect();
            let f = Expr::from_func(FuncApp { args, ..app.clone() });
            let mut p = Poly::zero();
            p.add_term(Mono::atom(f, Q::one()), Q::one());
            p
        }
        Node::Add(v) => {
            let mut p = Poly::zero();
            for c in v {
                p.add_poly(to_poly(c));
            }
            p
        }
        Node::Mul(v) => {
            let mut p = Poly::constant(Q::one());
            for c in v {
                if p.is_zero() {
                    break;
                }
                p = p.mul(&to_poly(c));
            }
            p
        }
        Node::Pow(b, q) => pow_poly(&to_poly(b), q),
        Node::Exp(a) => {
            let arg = to_poly(a);
            let mut p = Poly::zero();
            if let Some(c) = arg.as_constant() {
                if c.is_zero() {
                    return Poly::constant(Q::one());
                }
            }
            p.add_term(Mono { factors: BTreeMap::new(), exp: arg }, Q::one());
            p
        }
        Node::Sin(a) | Node::Dawson(a) => {
            let arg = to_poly(a);
            if arg.is_zero() {
                return Poly::zero();
            }
            let (arg, flipped) = sign_canonical(arg);
            let inner = from_poly(&arg);
            let atom = match e.node() {
                Node::Sin(_) => Expr::new(Node::Sin(inner)),
                _ => Expr::new(Node::Dawson(inner)),
            };
            let mut p = Poly::zero();
            p.add_term(Mono::atom(atom, Q::one()), if flipped { -Q::one() } else { Q::one() });
            p
        }
        Node::Cos(a) => {
            let arg = to_poly(a);
            if arg.is_zero() {
                return Poly::constant(Q::one());
            }
            let (arg, _) = sign_canonical(arg);
            let mut p = Poly::zero();
            p.add_term(Mono::atom(Expr::new(Node::Cos(from_poly(&arg))), Q::one()), Q::one());
            p
        }
    }
}

fn mono_to_expr(m: &Mono, c: &Q) -> Expr {
    let mut factors: Vec<Expr> = Vec::with_capacity(m.factors.len() + 2);
    for (b, q) in &m.factors {
        if q.is_one() {
            factors.push(b.clone());
        } else {
            factors.push(Expr::new(Node::Pow(b.clone(), q.clone())));
        }
    }
    if !m.exp.is_zero() {
        factors.push(Expr::new(Node::Exp(from_poly(&m.exp))));
    }
    if !c.is_one() || factors.is_empty() {
        factors.push(Expr::num(c.clone()));
    }
    factors.sort();
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        Expr::new(Node::Mul(factors))
    }
}

pub(crate) fn from_poly(p: &Poly) -> Expr {
    let mut terms: Vec<Expr> = p.terms.iter().map(|(m, c)| mono_to_expr(m, c)).collect();
    match terms.len() {
        0 => Expr::zero(),
        1 => terms.pop().unwrap(),
        _ => {
            terms.sort();
            Expr::new(Node::Add(terms))
        }
    }
}

pub(crate) fn mono_expr(m: &Mono) -> Expr {
    mono_to_expr(m, &Q::one())
}

pub(crate) fn normalize(e: &Expr) -> Expr {
    from_poly(&to_poly(e))
}

/// Multiply through by powers of compound bases (and, if `jets`, of jet
/// coordinates) until no such atom carries a negative exponent. The result
/// vanishes iff the input does, away from the zero sets of the cleared
/// factors.
pub(crate) fn clear_poly(mut p: Poly, jets: bool) -> Poly {
    for _ in 0..32 {
        let mut need: BTreeMap<Expr, Q> = BTreeMap::new();
        for m in p.terms.keys() {
            for (b, q) in &m.factors {
                let eligible = is_compound(b) || (jets && matches!(b.node(), Node::Jet(_)));
                if eligible && q.is_negative() {
                    let k = (-q).ceil();
                    let e = need.entry(b.clone()).or_insert_with(Q::zero);
                    if k > *e {
                        *e = k;
                    }
                }
            }
        }
        if need.is_empty() {
            return p;
        }
        let mut factors = BTreeMap::new();
        for (b, k) in need {
            factors.insert(b, k);
        }
        let mut mult = Poly::zero();
        mult.add_term(Mono { factors, exp: Poly::zero() }, Q::one());
        p = p.mul(&mult);
    }
    p
}

/// Numerator of `e` after clearing denominators built from sums (and, with
/// `jets`, from jet coordinates), in canonical form.
pub fn clear_denominators(e: &Expr, jets: bool) -> Expr {
    from_poly(&clear_poly(to_poly(e), jets))
}

/// `e` divided by the rational content of its coefficients, with the sign
/// fixed so that the first term in canonical order is positive.
pub fn primitive(e: &Expr) -> Expr {
    let p = to_poly(e);
    if p.is_zero() {
        return Expr::zero();
    }
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for c in p.terms.values() {
        num = num_integer::Integer::gcd(&num, c.numer());
        den = num_integer::Integer::lcm(&den, c.denom());
    }
    let first = from_poly(&p);
    let lead = match first.node() {
        Node::Add(v) => v[0].clone(),
        _ => first.clone(),
    };
    let negative = match lead.node() {
        Node::Num(q) => q.is_negative(),
        Node::Mul(v) => matches!(v[0].node(), Node::Num(q) if q.is_negative()),
        _ => false,
    };
    let mut scale = Q::new(den, num);
    if negative {
        scale = -scale;
    }
    from_poly(&p.scale(&scale))
}

/// Exact zero test: canonical form after clearing compound denominators.
pub fn is_zero(e: &Expr) -> bool {
    clear_poly(to_poly(e), false).is_zero()
}
