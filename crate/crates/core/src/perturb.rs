//! Consistent perturbation: expansion of dependent variables in the small
//! parameter, the recursion operator, approximate generators and their
//! truncated prolongation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{
    derive_with, func_chain, name, series_coefficients, taylor_coefficient, truncate_series, Expr, ExprError,
    FuncApp, FunctionDef, Jet, MultiIndex, Name, Node,
};
use crate::jet::{multi_indices, total_derivative_raw, Generator};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerturbError {
    #[error("the recursion operator is undefined on `{0}`: arguments of unknown functions may only involve independent variables and the leading coefficients")]
    UnsupportedArgument(String),
    #[error("`{0}` is not an expansion coefficient")]
    NotExpanded(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Expansion `u = u0 + eps u1 + ... + eps^p up` of every dependent variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerturbationContext {
    pub eps: Name,
    pub p: u32,
    pub indep: Vec<Name>,
    pub deps: Vec<Name>,
}

impl PerturbationContext {
    pub fn new(eps: &str, p: u32, indep: &[Name], deps: &[Name]) -> Self {
        PerturbationContext { eps: name(eps), p, indep: indep.to_vec(), deps: deps.to_vec() }
    }

    pub fn coeff_name(&self, dep: &str, k: u32) -> Name {
        name(&format!("{dep}{k}"))
    }

    pub fn coeff_jet(&self, dep: &str, k: u32, index: MultiIndex) -> Expr {
        Expr::from_jet(Jet { dep: self.coeff_name(dep, k), index })
    }

    /// All expansion coefficient names `u0..up` for every dependent variable.
    pub fn coeff_names(&self) -> Vec<Name> {
        self.deps.iter().flat_map(|d| (0..=self.p).map(move |k| (d.clone(), k))).map(|(d, k)| self.coeff_name(&d, k)).collect()
    }

    /// `(dep, k)` if `n` names an expansion coefficient.
    pub fn split_name(&self, n: &str) -> Option<(Name, u32)> {
        for d in &self.deps {
            if let Some(rest) = n.strip_prefix(d.as_ref()) {
                if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                    if let Ok(k) = rest.parse::<u32>() {
                        return Some((d.clone(), k));
                    }
                }
            }
        }
        None
    }

    pub fn eps_expr(&self) -> Expr {
        Expr::param(&self.eps)
    }

    /// `U_s = sum_k eps^k u{k}_s`.
    pub fn expanded_jet(&self, dep: &str, index: &MultiIndex) -> Expr {
        let e = self.eps_expr();
        Expr::add((0..=self.p).map(|k| e.powi(k as i64) * self.coeff_jet(dep, k, index.clone())).collect())
    }

    pub fn truncate(&self, e: &Expr) -> Result<Expr, ExprError> {
        truncate_series(e, &self.eps, self.p)
    }

    pub fn split(&self, e: &Expr) -> Result<Vec<Expr>, ExprError> {
        series_coefficients(e, &self.eps, self.p)
    }

    /// Rename the jets of each dependent variable to its leading coefficient.
    pub fn to_leading(&self, e: &Expr) -> Expr {
        let map: BTreeMap<Expr, Expr> = e
            .jets()
            .into_iter()
            .filter(|j| self.deps.contains(&j.dep))
            .map(|j| {
                let to = self.coeff_jet(&j.dep, 0, j.index.clone());
                (Expr::from_jet(j), to)
            })
            .collect();
        e.substitute(&map)
    }
}

/// Substitute the expansion into `e` and keep terms up to `eps^p`.
/// Expressions polynomial in the jets are expanded and truncated directly;
/// anything else goes through Taylor coefficients.
pub fn expand_dependent(ctx: &PerturbationContext, e: &Expr) -> Result<Expr, ExprError> {
    // the small parameter itself must enter polynomially
    series_coefficients(e, &ctx.eps, ctx.p)?;
    let map: BTreeMap<Expr, Expr> = e
        .jets()
        .into_iter()
        .filter(|j| ctx.deps.contains(&j.dep))
        .map(|j| {
            let to = ctx.expanded_jet(&j.dep, &j.index);
            (Expr::from_jet(j), to)
        })
        .collect();
    let sub = e.substitute_raw(&map).normalize();
    match truncate_series(&sub, &ctx.eps, ctx.p) {
        Ok(t) => Ok(t),
        Err(_) => {
            let eps = ctx.eps_expr();
            let terms = (0..=ctx.p).map(|k| eps.powi(k as i64) * taylor_coefficient(&sub, &ctx.eps, k)).collect();
            Ok(Expr::add(terms).normalize())
        }
    }
}

/// The recursion operator: a derivation with `R[u{k}_s] = (k+1) u{k+1}_s`,
/// zero on independent variables and parameters, acting on tagged functions
/// by `R[F_(k)] = F_(k+1) + chain rule`.
pub fn recursion_r(ctx: &PerturbationContext, e: &Expr) -> Result<Expr, PerturbError> {
    Ok(recursion_raw(ctx, e)?.normalize())
}

fn recursion_raw(ctx: &PerturbationContext, e: &Expr) -> Result<Expr, PerturbError> {
    let mut leaf = |a: &Expr| -> Result<Expr, PerturbError> {
        Ok(match a.node() {
            Node::Jet(j) => {
                let (dep, k) = ctx.split_name(&j.dep).ok_or_else(|| PerturbError::NotExpanded(j.dep.to_string()))?;
                Expr::int(k as i64 + 1) * ctx.coeff_jet(&dep, k + 1, j.index.clone())
            }
            Node::Func(app) => {
                for arg in &app.args {
                    let bad = arg.any(&|x| match x.node() {
                        Node::Jet(j) => j.order() > 0 || ctx.split_name(&j.dep).is_none_or(|(_, k)| k > 0),
                        _ => false,
                    });
                    if bad {
                        return Err(PerturbError::UnsupportedArgument(a.to_string()));
                    }
                }
                let chain = func_chain(app, &mut |x: &Expr| recursion_raw(ctx, x))?;
                match app.order {
                    None => chain,
                    Some(k) => {
                        let next = Expr::from_func(FuncApp { order: Some(k + 1), ..app.clone() });
                        Expr::add(vec![next, chain])
                    }
                }
            }
            _ => Expr::zero(),
        })
    };
    derive_with(e, &mut leaf)
}

/// An approximate generator: the seeds `xi_(k), eta_(k)` (functions of the
/// independent variables and the leading coefficients) and the components
/// `tilde_k` of the expanded generator they induce through the recursion
/// operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxGenerator {
    pub seeds: BTreeMap<u32, Generator>,
    pub tilde: Vec<Generator>,
}

impl ApproxGenerator {
    /// `sum_k eps^k tilde_k`.
    pub fn expanded(&self, ctx: &PerturbationContext) -> Generator {
        let eps = ctx.eps_expr();
        let sum = |pick: &dyn Fn(&Generator) -> Expr| {
            Expr::add(self.tilde.iter().enumerate().map(|(k, g)| eps.powi(k as i64) * pick(g)).collect()).normalize()
        };
        let mut g = Generator::new();
        for v in &ctx.indep {
            let e = sum(&|t: &Generator| t.xi_of(v));
            if !e.is_num_zero() {
                g.xi.insert(v.clone(), e);
            }
        }
        for d in &ctx.deps {
            let e = sum(&|t: &Generator| t.eta_of(d));
            if !e.is_num_zero() {
                g.eta.insert(d.clone(), e);
            }
        }
        g
    }

    /// Order-0 part as an ordinary generator in the original variables.
    pub fn leading(&self, ctx: &PerturbationContext) -> Generator {
        let back: BTreeMap<Expr, Expr> =
            ctx.deps.iter().map(|d| (ctx.coeff_jet(d, 0, MultiIndex::new()), Expr::jet(d, &[]))).collect();
        self.tilde[0].map(|e| e.substitute(&back))
    }
}

fn placeholder_name(kind: &str, target: &str) -> Name {
    name(&format!("{kind}[{target}]"))
}

/// Build `tilde_0..tilde_p` from seeds. `tilde_{k+1} = R[tilde_k]/(k+1)` is
/// computed on tagged placeholders, which are then replaced by the seeds and
/// their derivatives. Seeds may be written in the dependent variables
/// themselves; those are read as leading coefficients.
pub fn build_approx_generator(
    ctx: &PerturbationContext,
    seeds: &BTreeMap<u32, Generator>,
) -> Result<ApproxGenerator, PerturbError> {
    let seeds: BTreeMap<u32, Generator> =
        seeds.iter().filter(|(k, _)| **k <= ctx.p).map(|(k, g)| (*k, g.map(|e| ctx.to_leading(e)))).collect();
    let mut args: Vec<Expr> = ctx.indep.iter().map(|v| Expr::var(v)).collect();
    args.extend(ctx.deps.iter().map(|d| ctx.coeff_jet(d, 0, MultiIndex::new())));
    let slots: Vec<(Name, bool, Name)> = ctx
        .indep
        .iter()
        .map(|v| (placeholder_name("xi", v), true, v.clone()))
        .chain(ctx.deps.iter().map(|d| (placeholder_name("eta", d), false, d.clone())))
        .collect();

    let mut tilde = Vec::new();
    for _ in 0..=ctx.p {
        tilde.push(Generator::new());
    }
    for (ph, is_xi, target) in &slots {
        let mut cur =
            Expr::from_func(FuncApp { name: ph.clone(), order: Some(0), derivs: vec![0; args.len()], args: args.clone() });
        let mut layers = vec![cur.clone()];
        for k in 0..ctx.p {
            cur = (recursion_r(ctx, &cur)? / Expr::int(k as i64 + 1)).normalize();
            layers.push(cur.clone());
        }
        for (k, layer) in layers.into_iter().enumerate() {
            let mut e = layer;
            for (order, g) in &seeds {
                let body = if *is_xi { g.xi_of(target) } else { g.eta_of(target) };
                let def = FunctionDef { name: ph.clone(), order: Some(*order), params: args.clone(), body };
                e = e.instantiate_raw(&def)?;
            }
            // absent seeds are zero
            for order in 0..=ctx.p {
                if !seeds.contains_key(&order) {
                    let def =
                        FunctionDef { name: ph.clone(), order: Some(order), params: args.clone(), body: Expr::zero() };
                    e = e.instantiate_raw(&def)?;
                }
            }
            let e = e.normalize();
            if e.is_num_zero() {
                continue;
            }
            if *is_xi {
                tilde[k].xi.insert(target.clone(), e);
            } else {
                tilde[k].eta.insert(target.clone(), e);
            }
        }
    }
    Ok(ApproxGenerator { seeds, tilde })
}

/// Total derivative over all expansion-coefficient jets, truncated at `eps^p`.
pub fn total_derivative_trunc(ctx: &PerturbationContext, e: &Expr, var: &Name) -> Result<Expr, ExprError> {
    ctx.truncate(&total_derivative_raw(e, var).normalize())
}

/// Prolonged coefficients of the expanded generator, keyed by jets of the
/// original dependent variables, each truncated at `eps^p`.
pub fn prolong_approx(
    ctx: &PerturbationContext,
    g: &ApproxGenerator,
    r: u32,
) -> Result<BTreeMap<Jet, Expr>, ExprError> {
    let full = g.expanded(ctx);
    let mut out: BTreeMap<Jet, Expr> = BTreeMap::new();
    let mut dxi: BTreeMap<(Name, Name), Expr> = BTreeMap::new();
    for i in &ctx.indep {
        for j in &ctx.indep {
            dxi.insert((i.clone(), j.clone()), total_derivative_trunc(ctx, &full.xi_of(j), i)?);
        }
    }
    for dep in &ctx.deps {
        for s in multi_indices(&ctx.indep, r) {
            let i = s.entries()[0].0.clone();
            let prev = s.without(&i).expect("nonempty");
            let base = if prev.order() == 0 {
                full.eta_of(dep)
            } else {
                out[&Jet { dep: dep.clone(), index: prev.clone() }].clone()
            };
            let mut terms = vec![total_derivative_raw(&base, &i)];
            for j in &ctx.indep {
                let c = &dxi[&(i.clone(), j.clone())];
                if c.is_num_zero() {
                    continue;
                }
                terms.push(-(c * &ctx.expanded_jet(dep, &prev.with(j))));
            }
            out.insert(Jet { dep: dep.clone(), index: s }, ctx.truncate(&Expr::add(terms).normalize())?);
        }
    }
    Ok(out)
}

/// `pr g (e)` for an expression `e` in the original variables: derivatives of
/// `e` are expanded, multiplied by the expanded prolonged coefficients and
/// truncated.
pub fn apply_approx(ctx: &PerturbationContext, g: &ApproxGenerator, e: &Expr) -> Result<Expr, ExprError> {
    let r = e.max_jet_order();
    let pr = prolong_approx(ctx, g, r)?;
    let full = g.expanded(ctx);
    let mut terms = Vec::new();
    for v in &ctx.indep {
        let xi = full.xi_of(v);
        if !xi.is_num_zero() {
            terms.push(xi * expand_dependent(ctx, &e.diff(&Expr::var(v))?)?);
        }
    }
    for j in e.jets() {
        if !ctx.deps.contains(&j.dep) {
            continue;
        }
        let coef = if j.order() == 0 { full.eta_of(&j.dep) } else { pr.get(&j).cloned().unwrap_or_else(Expr::zero) };
        if coef.is_num_zero() {
            continue;
        }
        terms.push(coef * expand_dependent(ctx, &e.diff(&Expr::from_jet(j))?)?);
    }
    ctx.truncate(&Expr::add(terms).normalize())
}
