//! Strategies and independent oracles shared by the integration tests.
#![allow(dead_code)]

use approxsym::expr::{Expr, Node};
use approxsym::numeric::{eval, Env};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn ux() -> Expr {
    Expr::jet("u", &["x"])
}

pub fn u() -> Expr {
    Expr::jet("u", &[])
}

/// Rational constants, variables, parameters and low-order jets.
pub fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Expr::rat(n, d)),
        Just(Expr::var("x")),
        Just(Expr::var("t")),
        Just(Expr::param("a")),
        Just(Expr::param("b")),
        Just(u()),
        Just(ux()),
    ]
}

/// Random trees over sums, products, small integer powers and the
/// elementary functions.
pub fn expr_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::new(Node::Add(v))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::new(Node::Mul(v))),
            (inner.clone(), 0i64..=3).prop_map(|(e, n)| e.powi(n)),
            inner.clone().prop_map(|e| e.exp()),
            inner.clone().prop_map(|e| e.sin()),
            inner.clone().prop_map(|e| e.cos()),
        ]
    })
}

/// Polynomial trees (no elementary functions, nonnegative powers): the
/// fragment on which the canonical form is structural.
pub fn poly_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::new(Node::Add(v))),
            prop::collection::vec(inner.clone(), 2..3).prop_map(|v| Expr::new(Node::Mul(v))),
            (inner.clone(), 0i64..=2).prop_map(|(e, n)| e.powi(n)),
        ]
    })
}

/// Rebuild `e` with the children of every sum and product shuffled and
/// regrouped into nested sub-sums / sub-products.
pub fn reassociate(e: &Expr, rng: &mut StdRng) -> Expr {
    let kids = |v: &[Expr], rng: &mut StdRng| -> Vec<Expr> {
        let mut out: Vec<Expr> = v.iter().map(|c| reassociate(c, rng)).collect();
        out.shuffle(rng);
        out
    };
    let group = |mut v: Vec<Expr>, rng: &mut StdRng, add: bool| -> Expr {
        let mk = |w: Vec<Expr>| if add { Expr::new(Node::Add(w)) } else { Expr::new(Node::Mul(w)) };
        if v.len() > 2 && rng.gen_bool(0.5) {
            let k = rng.gen_range(1..v.len());
            let tail = v.split_off(k);
            v.push(mk(tail));
        }
        mk(v)
    };
    match e.node() {
        Node::Add(v) => {
            let v = kids(v, rng);
            group(v, rng, true)
        }
        Node::Mul(v) => {
            let v = kids(v, rng);
            group(v, rng, false)
        }
        Node::Pow(b, q) => reassociate(b, rng).pow(q.clone()),
        Node::Exp(a) => reassociate(a, rng).exp(),
        Node::Sin(a) => reassociate(a, rng).sin(),
        Node::Cos(a) => reassociate(a, rng).cos(),
        Node::Dawson(a) => reassociate(a, rng).dawson(),
        _ => e.clone(),
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A random evaluation point for the symbols used by [`leaf`].
pub fn random_env(rng: &mut StdRng) -> Env {
    let mut env = Env::new();
    for n in ["x", "t", "a", "b"] {
        env.set(n, rng.gen_range(-1.5..1.5));
    }
    env.set(&u().to_string(), rng.gen_range(0.2..1.5));
    env.set(&ux().to_string(), rng.gen_range(-1.5..1.5));
    env
}

/// Relative difference with an absolute floor of 1.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Fourth-order central difference of `f` in the symbol `name`.
pub fn fd(e: &Expr, env: &Env, name: &str, h: f64) -> Option<f64> {
    let x0 = *env.values.get(name)?;
    let at = |dx: f64| {
        let mut e2 = env.clone();
        e2.set(name, x0 + dx);
        eval(e, &e2).ok()
    };
    Some((-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h))
}

/// Brute-force expansion of a polynomial tree into a monomial table, as an
/// oracle for the kernel's canonical form. Monomials are sorted lists of
/// `(atom, exponent)` with atoms rendered as strings; coefficients are f64
/// (the trees use small rationals, so sums are exact enough for
/// comparison at 1e-9).
pub mod brute {
    use std::collections::BTreeMap;

    use approxsym::expr::{rational_to_f64, Expr, Node};

    pub type Mono = BTreeMap<String, u32>;
    pub type Poly = BTreeMap<Vec<(String, u32)>, f64>;

    fn key(m: &Mono) -> Vec<(String, u32)> {
        m.iter().filter(|(_, &k)| k > 0).map(|(a, k)| (a.clone(), *k)).collect()
    }

    fn mul(p: &Poly, q: &Poly) -> Poly {
        let mut out = Poly::new();
        for (a, ca) in p {
            for (b, cb) in q {
                let mut m: Mono = a.iter().cloned().collect();
                for (s, k) in b {
                    *m.entry(s.clone()).or_default() += k;
                }
                *out.entry(key(&m)).or_default() += ca * cb;
            }
        }
        out
    }

    pub fn expand(e: &Expr) -> Poly {
        match e.node() {
            Node::Num(q) => [(vec![], rational_to_f64(q))].into_iter().collect(),
            Node::Add(v) => {
                let mut out = Poly::new();
                for c in v {
                    for (m, k) in expand(c) {
                        *out.entry(m).or_default() += k;
                    }
                }
                out
            }
            Node::Mul(v) => v.iter().fold([(vec![], 1.0)].into_iter().collect(), |acc, c| mul(&acc, &expand(c))),
            Node::Pow(b, q) if q.is_integer() && *q.numer() >= 0.into() => {
                let n: u32 = q.numer().try_into().expect("small power");
                let base = expand(b);
                (0..n).fold([(vec![], 1.0)].into_iter().collect(), |acc, _| mul(&acc, &base))
            }
            _ => [(vec![(e.to_string(), 1)], 1.0)].into_iter().collect(),
        }
    }

    pub fn cleaned(p: Poly) -> Poly {
        p.into_iter().filter(|(_, c)| c.abs() > 1e-9).collect()
    }
}

/// Prolongation against the generator flow. The sample `phi(t, x)` is
/// pushed through one Euler step of the flow with parameter `s`; the
/// transformed function is resampled at fixed points, differentiated by
/// finite differences, and its `s`-derivative gives
/// `eta^(J) - xi^t phi_{J,t} - xi^x phi_{J,x}`. Returns the worst relative
/// error over the points and all jets of order 1 and 2.
pub mod flow {
    use std::collections::BTreeMap;

    use approxsym::expr::{name, Expr, Jet, MultiIndex, Name};
    use approxsym::jet::{prolong, Generator};
    use approxsym::numeric::{eval, Env};

    pub struct Sample {
        pub phi: Expr,
    }

    impl Sample {
        fn at(&self, t: f64, x: f64) -> f64 {
            eval(&self.phi, &Env::new().with("t", t).with("x", x)).unwrap()
        }

        /// Derivative of the closed form, `dt` times in t and `dx` times in x.
        fn deriv(&self, dt: u32, dx: u32, t: f64, x: f64) -> f64 {
            let mut e = self.phi.clone();
            for _ in 0..dt {
                e = e.diff(&Expr::var("t")).unwrap();
            }
            for _ in 0..dx {
                e = e.diff(&Expr::var("x")).unwrap();
            }
            eval(&e, &Env::new().with("t", t).with("x", x)).unwrap()
        }
    }

    fn comp(e: &Expr, t: f64, x: f64, u: f64) -> f64 {
        eval(e, &Env::new().with("t", t).with("x", x).with("u", u)).unwrap()
    }

    /// Transformed function at (tt, xx) after an Euler step of size s.
    fn transformed(g: &Generator, phi: &Sample, s: f64, tt: f64, xx: f64) -> f64 {
        let (xt, xxi, eta) = (g.xi_of("t"), g.xi_of("x"), g.eta_of("u"));
        let (mut t, mut x) = (tt, xx);
        for _ in 0..200 {
            let u = phi.at(t, x);
            let (nt, nx) = (tt - s * comp(&xt, t, x, u), xx - s * comp(&xxi, t, x, u));
            let done = (nt - t).abs() + (nx - x).abs() < 1e-17;
            t = nt;
            x = nx;
            if done {
                break;
            }
        }
        let u = phi.at(t, x);
        u + s * comp(&eta, t, x, u)
    }

    const W: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    const W2: [(f64, f64); 5] = [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)];

    /// Mixed derivative (dt, dx) with |.| <= 2 by 4th-order stencils.
    fn fd(f: &dyn Fn(f64, f64) -> f64, dt: u32, dx: u32, t: f64, x: f64, h: f64) -> f64 {
        match (dt, dx) {
            (0, 0) => f(t, x),
            (1, 0) => W.iter().map(|(k, w)| w * f(t + k * h, x)).sum::<f64>() / (12.0 * h),
            (0, 1) => W.iter().map(|(k, w)| w * f(t, x + k * h)).sum::<f64>() / (12.0 * h),
            (2, 0) => W2.iter().map(|(k, w)| w * f(t + k * h, x)).sum::<f64>() / (12.0 * h * h),
            (0, 2) => W2.iter().map(|(k, w)| w * f(t, x + k * h)).sum::<f64>() / (12.0 * h * h),
            (1, 1) => W.iter().map(|(k, w)| w * fd(f, 0, 1, t + k * h, x, h)).sum::<f64>() / (12.0 * h),
            _ => unreachable!(),
        }
    }

    pub fn max_error(g: &Generator, phi: &Sample, points: &[(f64, f64)]) -> f64 {
        let indep: Vec<Name> = vec![name("t"), name("x")];
        let pr = prolong(g, &indep, &[name("u")], 2);
        let mut worst: f64 = 0.0;
        for &(t, x) in points {
            let mut env = Env::new().with("t", t).with("x", x);
            let mut jets: BTreeMap<(u32, u32), f64> = BTreeMap::new();
            for dt in 0..=3 {
                for dx in 0..=(3 - dt) {
                    jets.insert((dt, dx), phi.deriv(dt, dx, t, x));
                }
            }
            for (&(dt, dx), v) in &jets {
                let j = Jet::new("u", MultiIndex::from_counts([("t", dt), ("x", dx)]));
                env.set(&Expr::from_jet(j).to_string(), *v);
            }
            let (xt, xxi) = (g.xi_of("t"), g.xi_of("x"));
            let u0 = jets[&(0, 0)];
            let (xt, xxi) = (comp(&xt, t, x, u0), comp(&xxi, t, x, u0));
            for (dt, dx) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
                let j = Jet::new("u", MultiIndex::from_counts([("t", dt), ("x", dx)]));
                let sym = eval(&pr[&j], &env).unwrap();
                let s = 2e-4;
                let at_s = |sv: f64| fd(&|a, b| transformed(g, phi, sv, a, b), dt, dx, t, x, 1e-2);
                let ds = W.iter().map(|(k, w)| w * at_s(k * s)).sum::<f64>() / (12.0 * s);
                let oracle = ds + xt * jets[&(dt + 1, dx)] + xxi * jets[&(dt, dx + 1)];
                let err = (sym - oracle).abs() / sym.abs().max(oracle.abs()).max(1.0);
                worst = worst.max(err);
            }
        }
        worst
    }
}

/// Adaptive Simpson quadrature and the two Dawson-type integrals built on it.
pub mod quad {
    pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    /// `exp(-y^2) int_0^y exp(z^2) dz`
    pub fn dawson(y: f64) -> f64 {
        simpson(&|z: f64| (z * z - y * y).exp(), 0.0, y, 1e-14)
    }

    /// `exp(-y^2) int_0^y exp(-z^2) dz`
    pub fn dawson_minus(y: f64) -> f64 {
        simpson(&|z: f64| (-z * z - y * y).exp(), 0.0, y, 1e-14)
    }
}

/// Printer from trees back to model-language source.
pub mod source {
    use approxsym::expr::{Expr, Node};
    use approxsym::parser::{parse_model, SymbolTable};
    use proptest::prelude::*;
    use rand::Rng;

    use super::expr_tree;

    pub fn symbols() -> SymbolTable {
        parse_model("model m\nparams a, b\nindep t, x\ndep u\nfunc f(t)\n").unwrap().symbols
    }

    /// Independent printer: fully parenthesized source text with random
    /// spacing and number spellings.
    pub fn print_source(e: &Expr, r: &mut rand::rngs::StdRng) -> String {
        let sp = |r: &mut rand::rngs::StdRng| if r.gen_bool(0.3) { " " } else { "" };
        match e.node() {
            Node::Num(q) => {
                let (n, d) = (q.numer().to_string(), q.denom().to_string());
                if d == "1" {
                    format!("({n})")
                } else if r.gen_bool(0.5) && (d == "2" || d == "4") {
                    // exact decimal spelling
                    let v = n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap();
                    format!("({v})")
                } else {
                    format!("({n}/{d})")
                }
            }
            Node::Param(n) | Node::Var(n) => n.to_string(),
            Node::Jet(_) => e.to_string(),
            Node::Func(_) => e.to_string(),
            Node::Add(v) | Node::Mul(v) => {
                let op = if matches!(e.node(), Node::Add(_)) { "+" } else { "*" };
                let parts: Vec<String> = v.iter().map(|c| print_source(c, r)).collect();
                let s1 = sp(r);
                format!("({})", parts.join(&format!("{s1}{op}{s1}")))
            }
            Node::Pow(b, q) => format!("({})^({})", print_source(b, r), q),
            Node::Exp(a) => format!("exp({})", print_source(a, r)),
            Node::Sin(a) => format!("sin({})", print_source(a, r)),
            Node::Cos(a) => format!("cos({})", print_source(a, r)),
            Node::Dawson(a) => format!("dawson({})", print_source(a, r)),
        }
    }

    pub fn with_funcs() -> impl Strategy<Value = Expr> {
        let f = Expr::func("f", vec![Expr::var("t")]);
        prop_oneof![
            4 => expr_tree(),
            1 => expr_tree().prop_map(move |e| (e * f.clone()).diff(&Expr::var("t")).unwrap()),
        ]
    }
}

/// Strategies over expansion coefficients and point generators.
pub mod perturbative {
    use approxsym::expr::{Expr, Node};
    use approxsym::jet::Generator;
    use proptest::prelude::*;

    pub fn c(k: u32, d: &[&str]) -> Expr {
        Expr::jet(&format!("u{k}"), d)
    }

    /// Leaves over the first two coefficients, their first jets, x and a parameter.
    pub fn coeff_leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (-5i64..=5, 1i64..=3).prop_map(|(n, d)| Expr::rat(n, d)),
            Just(Expr::var("x")),
            Just(Expr::param("a")),
            Just(c(0, &[])),
            Just(c(1, &[])),
            Just(c(0, &["x"])),
            Just(c(1, &["t"])),
        ]
    }

    pub fn coeff_poly() -> impl Strategy<Value = Expr> {
        coeff_leaf().prop_recursive(3, 20, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::new(Node::Add(v))),
                prop::collection::vec(inner.clone(), 2..3).prop_map(|v| Expr::new(Node::Mul(v))),
                (inner, 0i64..=2).prop_map(|(e, n)| e.powi(n)),
            ]
        })
    }

    /// Point-generator components in t, x, u.
    pub fn point_component() -> impl Strategy<Value = Expr> {
        let u = Expr::jet("u", &[]);
        let leaf = prop_oneof![
            (-3i64..=3).prop_map(Expr::int),
            Just(Expr::var("t")),
            Just(Expr::var("x")),
            Just(u),
            Just(Expr::param("a")),
        ];
        leaf.prop_recursive(2, 8, 2, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..3).prop_map(|v| Expr::new(Node::Add(v))),
                prop::collection::vec(inner, 2..3).prop_map(|v| Expr::new(Node::Mul(v))),
            ]
        })
    }

    pub fn point_generator() -> impl Strategy<Value = Generator> {
        (point_component(), point_component(), point_component())
            .prop_map(|(a, b, e)| Generator::new().with_xi("t", a).with_xi("x", b).with_eta("u", e))
    }
}

/// The order-eps equation of the hyperbolic model around a closed-form
/// leading term, applied by finite differences, and a least-squares fit of
/// first-order corrections over a basis.
pub mod first_order {
    use nalgebra::{DMatrix, DVector};

    pub type F = Box<dyn Fn(f64, f64) -> f64>;

    pub const H: f64 = 1e-3;

    pub fn d1(f: &dyn Fn(f64) -> f64, s: f64) -> f64 {
        (-f(s + 2.0 * H) + 8.0 * f(s + H) - 8.0 * f(s - H) + f(s - 2.0 * H)) / (12.0 * H)
    }

    pub fn d2(f: &dyn Fn(f64) -> f64, s: f64) -> f64 {
        (-f(s + 2.0 * H) + 16.0 * f(s + H) - 30.0 * f(s) + 16.0 * f(s - H) - f(s - 2.0 * H)) / (12.0 * H * H)
    }

    /// The order-eps equation of the hyperbolic model around `u0`:
    /// `L[u1] = u1_t - (u0 u1)_xx - alpha (u0 u1)_x + beta u1 - 2 beta gamma u0 u1`,
    /// forced by `u0_tt`.
    pub struct FirstOrder {
        pub alpha: f64,
        pub beta: f64,
        pub gamma: f64,
        pub u0: F,
    }

    impl FirstOrder {
        pub fn apply(&self, phi: &dyn Fn(f64, f64) -> f64, t: f64, x: f64) -> f64 {
            let prod = |s: f64| (self.u0)(t, s) * phi(t, s);
            d1(&|s| phi(s, x), t) - d2(&prod, x) - self.alpha * d1(&prod, x) + self.beta * phi(t, x)
                - 2.0 * self.beta * self.gamma * (self.u0)(t, x) * phi(t, x)
        }

        pub fn forcing(&self, t: f64, x: f64) -> f64 {
            d2(&|s| (self.u0)(s, x), t)
        }

        pub fn residual(&self, u1: &dyn Fn(f64, f64) -> f64, points: &[(f64, f64)]) -> f64 {
            points.iter().map(|&(t, x)| (self.apply(u1, t, x) + self.forcing(t, x)).abs()).fold(0.0, f64::max)
        }

        /// Least-squares fit of `L[sum a_i phi_i] = -u0_tt`.
        pub fn fit(&self, basis: &[(&str, F)], points: &[(f64, f64)]) -> Fit {
            let (n, k) = (points.len(), basis.len());
            let a = DMatrix::from_fn(n, k, |p, i| self.apply(&*basis[i].1, points[p].0, points[p].1));
            let b = DVector::from_fn(n, |p, _| -self.forcing(points[p].0, points[p].1));
            let svd = a.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let tol = 1e-7 * smax;
            let coef = svd.solve(&b, tol).unwrap();
            let vt = svd.v_t.as_ref().unwrap();
            let kernel: Vec<Vec<f64>> = (0..svd.singular_values.len())
                .filter(|&j| svd.singular_values[j] < tol)
                .map(|j| vt.row(j).iter().copied().collect())
                .collect();
            let rel = (&a * &coef - &b).norm() / b.norm().max(1e-300);
            Fit { names: basis.iter().map(|(s, _)| s.to_string()).collect(), coef: coef.iter().copied().collect(), kernel, rel }
        }
    }

    pub struct Fit {
        pub names: Vec<String>,
        pub coef: Vec<f64>,
        pub kernel: Vec<Vec<f64>>,
        pub rel: f64,
    }

    impl Fit {
        pub fn idx(&self, n: &str) -> usize {
            self.names.iter().position(|s| s == n).unwrap()
        }

        /// Distance of `v` from the kernel, relative to its norm.
        pub fn off_kernel(&self, v: &[f64]) -> f64 {
            let mut r = v.to_vec();
            for k in &self.kernel {
                let dot: f64 = k.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(k).for_each(|(x, a)| *x -= dot * a);
            }
            r.iter().map(|x| x * x).sum::<f64>().sqrt() / v.iter().map(|x| x * x).sum::<f64>().sqrt()
        }

        pub fn vector(&self, entries: &[(&str, f64)]) -> Vec<f64> {
            let mut v = vec![0.0; self.names.len()];
            for (n, c) in entries {
                v[self.idx(n)] = *c;
            }
            v
        }

        /// The fit is consistent; the kernel is spanned by the single `free`
        /// directions plus the `blocks` (homogeneous solutions made of several
        /// basis terms with fixed ratios); every coefficient outside the kernel
        /// equals `fixed`.
        pub fn check(&self, free: &[&str], blocks: &[Vec<(&str, f64)>], fixed: &[(&str, f64)]) -> Result<(), String> {
            if self.rel >= 1e-7 {
                return Err(format!("inconsistent fit: relative residual {:e}", self.rel));
            }
            if self.kernel.len() != free.len() + blocks.len() {
                return Err(format!("kernel of dimension {} over {:?}", self.kernel.len(), self.names));
            }
            for n in free {
                if self.off_kernel(&self.vector(&[(n, 1.0)])) >= 1e-6 {
                    return Err(format!("{n} is not free"));
                }
            }
            for b in blocks {
                if self.off_kernel(&self.vector(b)) >= 1e-6 {
                    return Err(format!("block {b:?} is not a homogeneous solution"));
                }
            }
            for (n, want) in fixed {
                if self.kernel.iter().any(|v| v[self.idx(n)].abs() >= 1e-6) {
                    return Err(format!("{n} is not fixed by the fit"));
                }
                let got = self.coef[self.idx(n)];
                if (got - want).abs() >= 1e-6 * want.abs().max(1.0) {
                    return Err(format!("{n}: fitted {got}, expected {want}"));
                }
            }
            Ok(())
        }
    }

    pub fn points(x: (f64, f64)) -> Vec<(f64, f64)> {
        use rand::Rng;
        let mut r = super::rng(2024);
        (0..40).map(|_| (r.gen_range(0.0..1.0), r.gen_range(x.0..x.1))).collect()
    }

    pub const ALPHA: f64 = 2.0;
    pub const BETA: f64 = 0.4;
    pub const C1: f64 = 1.3;

    /// Correction ansatz of one approximate solution: the basis, the
    /// directions expected to stay free, and the coefficients the equation
    /// must fix.
    pub struct Case {
        pub op: FirstOrder,
        pub basis: Vec<(&'static str, F)>,
        pub x: (f64, f64),
        pub free: Vec<&'static str>,
        pub blocks: Vec<Vec<(&'static str, f64)>>,
        pub fixed: Vec<(&'static str, f64)>,
    }

    impl Case {
        pub fn verify(&self) -> Result<(), String> {
            self.op.fit(&self.basis, &points(self.x)).check(&self.free, &self.blocks, &self.fixed)
        }
    }

    pub const CASES: [&str; 5] = ["sol1", "sol2", "sol3", "sol_delta", "sol_dawson"];

    pub fn sol3_operator(c2: f64) -> (FirstOrder, f64) {
        let gamma = 1.17;
        let delta = (ALPHA * ALPHA - 8.0 * BETA * gamma).sqrt();
        let e = move |t: f64, x: f64| (-BETA * t - (ALPHA + delta) / 4.0 * x).exp();
        let u0 = move |t: f64, x: f64| C1 * e(t, x) * ((delta * x).exp() + c2).sqrt();
        (FirstOrder { alpha: ALPHA, beta: BETA, gamma, u0: Box::new(u0) }, delta)
    }

    pub fn case(name: &str) -> Case {
        let secular = -C1 * BETA * BETA;
        match name {
            "sol1" => {
                let gamma = 1.33;
                let delta = (8.0 * BETA * gamma - ALPHA * ALPHA).sqrt();
                let c2 = 0.2;
                let e = move |t: f64, x: f64| (-BETA * t - ALPHA / 4.0 * x).exp();
                let cs = move |x: f64| (delta / 2.0 * x + c2).cos();
                Case {
                    op: FirstOrder { alpha: ALPHA, beta: BETA, gamma, u0: Box::new(move |t, x| C1 * e(t, x) * cs(x).sqrt()) },
                    basis: vec![
                        ("cos", Box::new(move |t, x| e(t, x) * (delta / 2.0 * x).cos() / cs(x).sqrt())),
                        ("sin", Box::new(move |t, x| e(t, x) * (delta / 2.0 * x).sin() / cs(x).sqrt())),
                        ("t", Box::new(move |t, x| t * e(t, x) * cs(x).sqrt())),
                        ("t^2", Box::new(move |t, x| t * t * e(t, x) * cs(x).sqrt())),
                        ("x", Box::new(move |t, x| x * e(t, x) * cs(x).sqrt())),
                    ],
                    x: (0.2, 3.0),
                    free: vec!["cos", "sin"],
                    blocks: vec![],
                    fixed: vec![("t", secular), ("t^2", 0.0), ("x", 0.0)],
                }
            }
            "sol2" => {
                let c2 = 0.7;
                let e = move |t: f64, x: f64| (-BETA * t - ALPHA / 4.0 * x).exp();
                let s = move |x: f64| (x + c2).sqrt();
                Case {
                    op: FirstOrder { alpha: ALPHA, beta: BETA, gamma: 1.25, u0: Box::new(move |t, x| C1 * e(t, x) * s(x)) },
                    basis: vec![
                        ("x", Box::new(move |t, x| e(t, x) * x / s(x))),
                        ("1", Box::new(move |t, x| e(t, x) / s(x))),
                        ("t", Box::new(move |t, x| t * e(t, x) * s(x))),
                        ("t^2", Box::new(move |t, x| t * t * e(t, x) * s(x))),
                        ("x^2", Box::new(move |t, x| x * x * e(t, x) / s(x))),
                    ],
                    x: (0.2, 3.0),
                    free: vec!["x", "1"],
                    blocks: vec![],
                    fixed: vec![("t", secular), ("t^2", 0.0), ("x^2", 0.0)],
                }
            }
            "sol3" => {
                let c2 = 0.3;
                let (op, delta) = sol3_operator(c2);
                let e = move |t: f64, x: f64| (-BETA * t - (ALPHA + delta) / 4.0 * x).exp();
                let s = move |x: f64| ((delta * x).exp() + c2).sqrt();
                Case {
                    op,
                    basis: vec![
                        ("exp", Box::new(move |t, x| e(t, x) * (delta * x).exp() / s(x))),
                        ("1", Box::new(move |t, x| e(t, x) / s(x))),
                        ("t", Box::new(move |t, x| t * e(t, x) * s(x))),
                        ("t^2", Box::new(move |t, x| t * t * e(t, x) * s(x))),
                        ("x", Box::new(move |t, x| x * e(t, x) * s(x))),
                    ],
                    x: (0.2, 3.0),
                    free: vec!["exp", "1"],
                    blocks: vec![],
                    fixed: vec![("t", secular), ("t^2", 0.0), ("x", 0.0)],
                }
            }
            "sol_delta" => {
                let gamma = 1.17;
                let delta = (ALPHA * ALPHA - 8.0 * BETA * gamma).sqrt();
                let mode = move |k: f64, m: f64| move |t: f64, x: f64| (-k * BETA * t + m * x).exp();
                let (lead, plus, printed) = (-(ALPHA - delta) / 4.0, -(ALPHA + 3.0 * delta) / 4.0, -(ALPHA + delta) / 4.0);
                let u0 = mode(1.0, lead);
                let k = 8.0 * delta / ((ALPHA - delta) * (ALPHA - 5.0 * delta));
                Case {
                    op: FirstOrder { alpha: ALPHA, beta: BETA, gamma, u0: Box::new(move |t, x| C1 * u0(t, x)) },
                    basis: vec![
                        ("exp(-delta x)", Box::new(mode(1.0, -delta))),
                        ("lead", Box::new(mode(1.0, lead))),
                        ("t lead", Box::new(move |t, x| t * mode(1.0, lead)(t, x))),
                        ("plus", Box::new(mode(1.0, plus))),
                        ("decay plus", Box::new(mode(2.0, plus))),
                        ("printed exponent", Box::new(mode(1.0, printed))),
                        ("constant", Box::new(mode(1.0, 0.0))),
                    ],
                    x: (0.0, 3.0),
                    free: vec!["lead", "plus"],
                    // the exp(-delta x) term and the decaying plus mode form
                    // one homogeneous solution with a free amplitude
                    blocks: vec![vec![("exp(-delta x)", k), ("decay plus", -C1 * delta / (2.0 * BETA))]],
                    fixed: vec![("t lead", secular), ("printed exponent", 0.0), ("constant", 0.0)],
                }
            }
            "sol_dawson" => {
                let mode = move |k: f64, t: f64, x: f64| (-k * BETA * t - ALPHA / 4.0 * x).exp();
                let shape = move |d: fn(f64) -> f64| {
                    move |t: f64, x: f64| {
                        (-BETA * t).exp() * 2.0 / (ALPHA * x).sqrt() * (2.0 / ALPHA + x) * d((ALPHA * x).sqrt() / 2.0)
                    }
                };
                Case {
                    op: FirstOrder {
                        alpha: ALPHA,
                        beta: BETA,
                        gamma: 1.25,
                        u0: Box::new(move |t, x| C1 * mode(1.0, t, x) * x.sqrt()),
                    },
                    basis: vec![
                        ("constant", Box::new(move |t: f64, _x: f64| (-BETA * t).exp())),
                        ("dawson", Box::new(shape(super::quad::dawson))),
                        ("dawson, printed integrand", Box::new(shape(super::quad::dawson_minus))),
                        ("1/sqrt(x)", Box::new(move |t: f64, x: f64| mode(1.0, t, x) / x.sqrt())),
                        ("decay/sqrt(x)", Box::new(move |t: f64, x: f64| mode(2.0, t, x) / x.sqrt())),
                        ("sqrt(x)", Box::new(move |t: f64, x: f64| mode(1.0, t, x) * x.sqrt())),
                        ("t sqrt(x)", Box::new(move |t: f64, x: f64| t * mode(1.0, t, x) * x.sqrt())),
                        ("t^2 sqrt(x)", Box::new(move |t: f64, x: f64| t * t * mode(1.0, t, x) * x.sqrt())),
                    ],
                    x: (0.5, 3.0),
                    free: vec!["1/sqrt(x)", "sqrt(x)"],
                    // the Dawson term, the constant and the decaying 1/sqrt(x)
                    // mode form one homogeneous solution with a free amplitude
                    blocks: vec![vec![("constant", -2.0 / ALPHA), ("dawson", 1.0), ("decay/sqrt(x)", -C1 / (2.0 * BETA))]],
                    fixed: vec![("dawson, printed integrand", 0.0), ("t sqrt(x)", secular), ("t^2 sqrt(x)", 0.0)],
                }
            }
            _ => panic!("no ansatz for {name}"),
        }
    }
}
