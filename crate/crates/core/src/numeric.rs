//! Floating-point evaluation, the Dawson function and residual-order scans
//! on grids.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{rational_to_f64, Expr, Name, Node, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain error in {what} at {point}")]
    Domain { what: String, point: String },
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// Numeric value of an unknown-function atom: derivative counts per slot,
/// then argument values.
pub type FuncImpl = Arc<dyn Fn(&[u32], &[f64]) -> Option<f64> + Send + Sync>;

/// Values of symbols and implementations of unknown functions. Jets are
/// looked up by their rendered name (`u`, `D(u,x)`).
#[derive(Clone, Default)]
pub struct Env {
    pub values: HashMap<String, f64>,
    pub funcs: HashMap<String, FuncImpl>,
}

impl std::fmt::Debug for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut keys: Vec<_> = self.values.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        f.debug_struct("Env").field("values", &keys).finish()
    }
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, v: f64) -> &mut Self {
        self.values.insert(name.to_string(), v);
        self
    }

    pub fn with(mut self, name: &str, v: f64) -> Self {
        self.set(name, v);
        self
    }

    pub fn with_function(mut self, name: &str, f: FuncImpl) -> Self {
        self.funcs.insert(name.to_string(), f);
        self
    }

    /// Register `name` as `exp(-y^2) int_0^y exp(-z^2) dz`, the integrand
    /// variant of the Dawson function.
    pub fn with_paper_dawson(self, name: &str) -> Self {
        self.with_function(
            name,
            Arc::new(|d: &[u32], a: &[f64]| if d.len() == 1 { paper_dawson(d[0], a[0]) } else { None }),
        )
    }

    fn point(&self) -> String {
        let mut keys: Vec<_> = self.values.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        keys.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
    }
}

fn symbol_key(e: &Expr) -> Option<String> {
    match e.node() {
        Node::Param(n) | Node::Var(n) => Some(n.to_string()),
        Node::Jet(_) => Some(e.to_string()),
        _ => None,
    }
}

fn rpow(b: f64, q: &Rational) -> Option<f64> {
    let qf = rational_to_f64(q);
    if q.is_integer() {
        return Some(b.powi(qf as i32));
    }
    let even_den = (q.denom() % 2u32) == 0u32.into();
    if b < 0.0 {
        if even_den {
            return None;
        }
        let odd_num = (q.numer() % 2i32) != 0i32.into();
        let m = (-b).powf(qf);
        return Some(if odd_num { -m } else { m });
    }
    Some(b.powf(qf))
}

/// Recursive tree-walk evaluation.
pub fn eval(e: &Expr, env: &Env) -> Result<f64, EvalError> {
    let dom = |what: &str| EvalError::Domain { what: what.to_string(), point: env.point() };
    let v = match e.node() {
        Node::Num(q) => rational_to_f64(q),
        Node::Param(_) | Node::Var(_) | Node::Jet(_) => {
            let k = symbol_key(e).expect("symbol");
            *env.values.get(&k).ok_or(EvalError::Unbound(k))?
        }
        Node::Add(v) => {
            let mut s = 0.0;
            for c in v {
                s += eval(c, env)?;
            }
            s
        }
        Node::Mul(v) => {
            let mut s = 1.0;
            for c in v {
                s *= eval(c, env)?;
            }
            s
        }
        Node::Pow(b, q) => rpow(eval(b, env)?, q).ok_or_else(|| dom(&format!("{e}")))?,
        Node::Exp(a) => eval(a, env)?.exp(),
        Node::Sin(a) => eval(a, env)?.sin(),
        Node::Cos(a) => eval(a, env)?.cos(),
        Node::Dawson(a) => dawson(eval(a, env)?),
        Node::Func(app) => {
            let f = env.funcs.get(app.name.as_ref()).ok_or_else(|| EvalError::Unbound(app.name.to_string()))?;
            let mut args = Vec::with_capacity(app.args.len());
            for a in &app.args {
                args.push(eval(a, env)?);
            }
            f(&app.derivs, &args).ok_or_else(|| dom(&format!("{e}")))?
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(dom(&format!("{e}")))
    }
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Slot(usize),
    Sum(Vec<usize>),
    Prod(Vec<usize>),
    Pow(usize, Rational),
    Exp(usize),
    Sin(usize),
    Cos(usize),
    Dawson(usize),
    Call(String, Vec<u32>, Vec<usize>),
}

/// Expression compiled to straight-line code over registers, with shared
/// subtrees computed once. Independent of [`eval`].
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    slots: Vec<String>,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut t = Tape { ops: Vec::new(), slots: Vec::new() };
        let mut seen: HashMap<Expr, usize> = HashMap::new();
        let mut slot_of: HashMap<String, usize> = HashMap::new();
        // explicit stack to keep deep trees off the call stack
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((x, ready)) = stack.pop() {
            if seen.contains_key(&x) {
                continue;
            }
            if !ready {
                stack.push((x.clone(), true));
                for c in x.children() {
                    if !seen.contains_key(c) {
                        stack.push((c.clone(), false));
                    }
                }
                continue;
            }
            let r = |c: &Expr| seen[c];
            let op = match x.node() {
                Node::Num(q) => Op::Const(rational_to_f64(q)),
                Node::Param(_) | Node::Var(_) | Node::Jet(_) => {
                    let k = symbol_key(&x).expect("symbol");
                    let n = slot_of.len();
                    let i = *slot_of.entry(k.clone()).or_insert(n);
                    if i == t.slots.len() {
                        t.slots.push(k);
                    }
                    Op::Slot(i)
                }
                Node::Add(v) => Op::Sum(v.iter().map(r).collect()),
                Node::Mul(v) => Op::Prod(v.iter().map(r).collect()),
                Node::Pow(b, q) => Op::Pow(r(b), q.clone()),
                Node::Exp(a) => Op::Exp(r(a)),
                Node::Sin(a) => Op::Sin(r(a)),
                Node::Cos(a) => Op::Cos(r(a)),
                Node::Dawson(a) => Op::Dawson(r(a)),
                Node::Func(app) => Op::Call(app.name.to_string(), app.derivs.clone(), app.args.iter().map(r).collect()),
            };
            seen.insert(x, t.ops.len());
            t.ops.push(op);
        }
        t
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    /// Evaluate with slot values in the order of [`Tape::slots`].
    pub fn run(&self, slots: &[f64], funcs: &HashMap<String, FuncImpl>) -> Result<f64, usize> {
        let mut reg = vec![0.0f64; self.ops.len()];
        for (i, op) in self.ops.iter().enumerate() {
            let v = match op {
                Op::Const(c) => *c,
                Op::Slot(s) => slots[*s],
                Op::Sum(v) => v.iter().map(|j| reg[*j]).sum(),
                Op::Prod(v) => v.iter().map(|j| reg[*j]).product(),
                Op::Pow(b, q) => rpow(reg[*b], q).ok_or(i)?,
                Op::Exp(a) => reg[*a].exp(),
                Op::Sin(a) => reg[*a].sin(),
                Op::Cos(a) => reg[*a].cos(),
                Op::Dawson(a) => dawson(reg[*a]),
                Op::Call(n, d, args) => {
                    let f = funcs.get(n).ok_or(i)?;
                    let a: Vec<f64> = args.iter().map(|j| reg[*j]).collect();
                    f(d, &a).ok_or(i)?
                }
            };
            if !v.is_finite() {
                return Err(i);
            }
            reg[i] = v;
        }
        Ok(*reg.last().unwrap_or(&0.0))
    }

    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        let mut vals = Vec::with_capacity(self.slots.len());
        for s in &self.slots {
            vals.push(*env.values.get(s).ok_or_else(|| EvalError::Unbound(s.clone()))?);
        }
        self.run(&vals, &env.funcs)
            .map_err(|i| EvalError::Domain { what: format!("instruction {i}"), point: env.point() })
    }
}

/// Dawson function `exp(-y^2) int_0^y exp(z^2) dz`: Maclaurin series near
/// zero, Rybicki's exponentially convergent sum elsewhere.
pub fn dawson(y: f64) -> f64 {
    let a = y.abs();
    let v = if a < 0.2 {
        // sum (-1)^n 2^n y^(2n+1) / (2n+1)!!
        let y2 = a * a;
        let mut term = a;
        let mut s = a;
        for n in 1..20 {
            term *= -2.0 * y2 / (2 * n + 1) as f64;
            s += term;
        }
        s
    } else if a > 50.0 {
        let r = 1.0 / (2.0 * a * a);
        (1.0 + r * (1.0 + 3.0 * r * (1.0 + 5.0 * r))) / (2.0 * a)
    } else {
        const H: f64 = 0.2;
        let n0 = 2 * ((0.5 * a / H).round() as i64) + 1;
        let xp = a - n0 as f64 * H;
        let mut s = 0.0;
        let mut k = 0i64;
        loop {
            let mut add = 0.0;
            for n in [n0 + 2 * k, n0 - 2 * k - 2] {
                let d = xp - (n - n0) as f64 * H;
                add += (-d * d).exp() / n as f64;
            }
            s += add;
            k += 1;
            if (k as f64) * 2.0 * H > 12.0 {
                break;
            }
        }
        s / std::f64::consts::PI.sqrt()
    };
    v.copysign(y)
}

/// `k`-th derivative (k <= 2) of `P(y) = exp(-y^2) int_0^y exp(-z^2) dz`.
pub fn paper_dawson(k: u32, y: f64) -> Option<f64> {
    let g = (-2.0 * y * y).exp();
    let p = (-y * y).exp() * std::f64::consts::PI.sqrt() / 2.0 * libm::erf(y);
    let p1 = -2.0 * y * p + g;
    match k {
        0 => Some(p),
        1 => Some(p1),
        2 => Some(-2.0 * p - 2.0 * y * p1 - 4.0 * y * g),
        _ => None,
    }
}

/// Rectangular grid over `t` and `x` with fixed parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub nt: usize,
    pub nx: usize,
    pub bindings: Vec<(String, f64)>,
    pub eps: f64,
}

impl GridSpec {
    pub fn new(bindings: Vec<(String, f64)>, eps: f64) -> Self {
        GridSpec { t: (0.0, 2.0), x: (0.0, 4.0), nt: 201, nx: 201, bindings, eps }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let finite = [self.t.0, self.t.1, self.x.0, self.x.1, self.eps].iter().all(|v| v.is_finite());
        if !finite || self.t.0 > self.t.1 || self.x.0 > self.x.1 {
            return Err(EvalError::Grid("ranges must be finite and ordered".into()));
        }
        if self.nt < 2 || self.nx < 2 {
            return Err(EvalError::Grid("at least 2 points per axis".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let at = |(a, b): (f64, f64), n: usize, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(self.nt * self.nx);
        for i in 0..self.nt {
            for j in 0..self.nx {
                out.push((at(self.t, self.nt, i), at(self.x, self.nx, j)));
            }
        }
        out
    }
}

/// Max-abs value of `e` over the grid with the small parameter `eps_name`
/// bound to `eps`. Parallel over points; the max reduction does not depend
/// on evaluation order.
pub fn grid_max_abs(e: &Expr, grid: &GridSpec, eps_name: Option<&str>, eps: f64, base: &Env) -> Result<f64, EvalError> {
    grid.validate()?;
    let tape = Tape::compile(e);
    let mut fixed = base.clone();
    for (k, v) in &grid.bindings {
        fixed.set(k, *v);
    }
    if let Some(n) = eps_name {
        fixed.set(n, eps);
    }
    let slots = tape.slots().to_vec();
    let ti = slots.iter().position(|s| s == "t");
    let xi = slots.iter().position(|s| s == "x");
    let mut template = Vec::with_capacity(slots.len());
    for s in &slots {
        if Some(s.as_str()) == Some("t") || Some(s.as_str()) == Some("x") {
            template.push(0.0);
        } else {
            template.push(*fixed.values.get(s).ok_or_else(|| EvalError::Unbound(s.clone()))?);
        }
    }
    let funcs = fixed.funcs.clone();
    grid.points()
        .par_iter()
        .map(|&(t, x)| {
            let mut v = template.clone();
            if let Some(i) = ti {
                v[i] = t;
            }
            if let Some(i) = xi {
                v[i] = x;
            }
            tape.run(&v, &funcs)
                .map(f64::abs)
                .map_err(|_| EvalError::Domain { what: format!("{e}").chars().take(80).collect(), point: format!("t={t}, x={x}") })
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    pub max_residual: f64,
    /// `log2` of the ratio to the previous row's maximum; `None` on the first
    /// row and when either maximum is zero.
    pub observed_order: Option<f64>,
}

/// Evaluate the full residual (equation with the solution substituted, not
/// truncated) for `eps, eps/2, ..., eps/2^halvings`.
pub fn residual_order_scan(
    residual: &Expr,
    eps_name: Option<&str>,
    grid: &GridSpec,
    halvings: u32,
    base: &Env,
) -> Result<Vec<ScanRow>, EvalError> {
    let mut rows: Vec<ScanRow> = Vec::new();
    for j in 0..=halvings {
        let eps = grid.eps / 2f64.powi(j as i32);
        let m = grid_max_abs(residual, grid, eps_name, eps, base)?;
        let observed_order = rows
            .last()
            .map(|prev| (prev.max_residual / m).log2())
            .filter(|o| o.is_finite());
        rows.push(ScanRow { eps, max_residual: m, observed_order });
    }
    Ok(rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("epsilon,max_residual,observed_order\n");
    for r in rows {
        let o = r.observed_order.map(|o| format!("{o:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{:.6e},{:.6e},{}", r.eps, r.max_residual, o);
    }
    s
}

/// `t x u` rows in gnuplot's grid format (blank line between t-blocks).
pub fn surface_dump(u: &Expr, grid: &GridSpec, eps_name: Option<&str>, base: &Env) -> Result<String, EvalError> {
    grid.validate()?;
    let tape = Tape::compile(u);
    let mut env = base.clone();
    for (k, v) in &grid.bindings {
        env.set(k, *v);
    }
    if let Some(n) = eps_name {
        env.set(n, grid.eps);
    }
    let mut s = String::new();
    let pts = grid.points();
    for (i, (t, x)) in pts.iter().enumerate() {
        env.set("t", *t).set("x", *x);
        let v = tape.eval(&env)?;
        let _ = writeln!(s, "{t} {x} {v}");
        if (i + 1) % grid.nx == 0 {
            s.push('\n');
        }
    }
    Ok(s)
}

/// Names that must be bound to evaluate `e` (parameters, variables, jets).
pub fn free_symbols(e: &Expr) -> Vec<Name> {
    let mut out: Vec<Name> = Vec::new();
    e.visit(&mut |x| {
        if let Some(k) = symbol_key(x) {
            let n: Name = k.into();
            if !out.contains(&n) {
                out.push(n);
            }
        }
    });
    out.sort();
    out
}
