//! Jet coordinates, total derivatives and prolongation of point generators.

use std::collections::BTreeMap;

use crate::expr::{derive_with, func_chain, Expr, Jet, MultiIndex, Name, Node};

/// Total derivative `D_var` without normalization.
pub fn total_derivative_raw(e: &Expr, var: &Name) -> Expr {
    let mut leaf = |a: &Expr| -> Result<Expr, ()> {
        Ok(match a.node() {
            Node::Var(v) if v == var => Expr::one(),
            Node::Jet(j) => Expr::from_jet(j.derive(var)),
            Node::Func(app) => func_chain(app, &mut |x: &Expr| Ok::<_, ()>(total_derivative_raw(x, var)))?,
            _ => Expr::zero(),
        })
    };
    derive_with(e, &mut leaf).unwrap_or_else(|_| Expr::zero())
}

/// `D_var e = de/dvar + sum u_{s+e_var} de/du_s`, normalized.
pub fn total_derivative(e: &Expr, var: &str) -> Expr {
    total_derivative_raw(e, &crate::expr::name(var)).normalize()
}

/// Iterated total derivative along a multi-index.
pub fn total_derivative_multi(e: &Expr, s: &MultiIndex) -> Expr {
    let mut out = e.clone();
    for v in s.expanded() {
        out = total_derivative_raw(&out, &v).normalize();
    }
    out
}

/// A point generator `sum xi_i d/dx_i + sum eta_a d/du_a`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Generator {
    pub xi: BTreeMap<Name, Expr>,
    pub eta: BTreeMap<Name, Expr>,
}

impl Generator {
    pub fn new() -> Self {
        Generator::default()
    }

    pub fn with_xi(mut self, var: &str, e: Expr) -> Self {
        self.xi.insert(crate::expr::name(var), e);
        self
    }

    pub fn with_eta(mut self, dep: &str, e: Expr) -> Self {
        self.eta.insert(crate::expr::name(dep), e);
        self
    }

    pub fn xi_of(&self, var: &str) -> Expr {
        self.xi.get(var).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn eta_of(&self, dep: &str) -> Expr {
        self.eta.get(dep).cloned().unwrap_or_else(Expr::zero)
    }

    /// Multiply every infinitesimal by `f`.
    pub fn scaled(&self, f: &Expr) -> Generator {
        Generator {
            xi: self.xi.iter().map(|(k, v)| (k.clone(), (v * f).normalize())).collect(),
            eta: self.eta.iter().map(|(k, v)| (k.clone(), (v * f).normalize())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Generator {
        Generator {
            xi: self.xi.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
            eta: self.eta.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }
}

/// All multi-indices over `vars` with order in `1..=r`, grouped by order.
pub fn multi_indices(vars: &[Name], r: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut layer = vec![MultiIndex::new()];
    for _ in 0..r {
        let mut next: Vec<MultiIndex> = Vec::new();
        for s in &layer {
            for v in vars {
                let t = s.with(v);
                if !next.contains(&t) {
                    next.push(t);
                }
            }
        }
        next.sort();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Prolonged coefficients `eta_a^(s)` for `1 <= |s| <= r`, by
/// `eta^(s+e_i) = D_i eta^(s) - sum_j (D_i xi_j) u_{s+e_j}`.
pub fn prolong(g: &Generator, indep: &[Name], deps: &[Name], r: u32) -> BTreeMap<Jet, Expr> {
    prolong_with(g, indep, deps, r, &|e, v| total_derivative_raw(e, v).normalize())
}

/// Prolongation with a caller-supplied total derivative (the approximate
/// case uses one that truncates in the small parameter).
pub fn prolong_with(
    g: &Generator,
    indep: &[Name],
    deps: &[Name],
    r: u32,
    dtot: &dyn Fn(&Expr, &Name) -> Expr,
) -> BTreeMap<Jet, Expr> {
    let mut out: BTreeMap<Jet, Expr> = BTreeMap::new();
    let dxi: BTreeMap<(Name, Name), Expr> = indep
        .iter()
        .flat_map(|i| indep.iter().map(move |j| (i.clone(), j.clone())))
        .map(|(i, j)| {
            let d = dtot(&g.xi_of(&j), &i);
            ((i, j), d)
        })
        .collect();
    for dep in deps {
        for s in multi_indices(indep, r) {
            // peel the first variable of s: s = prev + e_i
            let i = s.entries()[0].0.clone();
            let prev = s.without(&i).expect("nonempty");
            let base = if prev.order() == 0 {
                g.eta_of(dep)
            } else {
                out[&Jet { dep: dep.clone(), index: prev.clone() }].clone()
            };
            let mut terms = vec![dtot(&base, &i)];
            for j in indep {
                let c = &dxi[&(i.clone(), j.clone())];
                if c.is_num_zero() {
                    continue;
                }
                let u = Expr::from_jet(Jet { dep: dep.clone(), index: prev.with(j) });
                terms.push(-(c * &u));
            }
            out.insert(Jet { dep: dep.clone(), index: s }, Expr::add(terms).normalize());
        }
    }
    out
}

/// `pr^(r) g` applied to `e`, with `r` the jet order of `e`.
pub fn apply_prolonged(g: &Generator, indep: &[Name], deps: &[Name], e: &Expr) -> Expr {
    let r = e.max_jet_order();
    let pr = prolong(g, indep, deps, r);
    apply_with(g, &pr, indep, deps, e)
}

pub fn apply_with(
    g: &Generator,
    pr: &BTreeMap<Jet, Expr>,
    indep: &[Name],
    deps: &[Name],
    e: &Expr,
) -> Expr {
    let mut terms = Vec::new();
    for v in indep {
        let xi = g.xi_of(v);
        if !xi.is_num_zero() {
            terms.push(xi * crate::expr::diff_raw(e, &Expr::var(v)).expect("symbol"));
        }
    }
    for j in e.jets() {
        if !deps.contains(&j.dep) {
            continue;
        }
        let coef = if j.order() == 0 { g.eta_of(&j.dep) } else { pr.get(&j).cloned().unwrap_or_else(Expr::zero) };
        if coef.is_num_zero() {
            continue;
        }
        terms.push(coef * crate::expr::diff_raw(e, &Expr::from_jet(j)).expect("symbol"));
    }
    Expr::add(terms).normalize()
}
