//! Splitting reduced invariance conditions into determining equations.

use std::collections::BTreeSet;

use crate::expr::{clear_denominators, collect_by_monomials, primitive, Expr, Name, Node};

use super::{invariance_residual, ConstraintSet, Infinitesimals, Manifold, Setting, SymmetryError};

/// Determining equations of one equation at one perturbation order:
/// `residual = sum monomial * coefficient`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderSystem {
    pub order: u32,
    pub equation: String,
    /// Reduced residual with jet and compound denominators cleared.
    pub residual: Expr,
    pub entries: Vec<(Expr, Expr)>,
}

impl OrderSystem {
    pub fn resum(&self) -> Expr {
        Expr::add(self.entries.iter().map(|(m, c)| m * c).collect()).normalize()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterminingSystem {
    /// Normalization case of the invariant surface conditions.
    pub case: Option<Name>,
    pub orders: Vec<OrderSystem>,
}

impl DeterminingSystem {
    /// Distinct primitive determining equations per perturbation order, in
    /// canonical order.
    pub fn equations(&self) -> Vec<(u32, Vec<Expr>)> {
        let mut by_order: std::collections::BTreeMap<u32, BTreeSet<Expr>> = Default::default();
        for o in &self.orders {
            let set = by_order.entry(o.order).or_default();
            for (_, c) in &o.entries {
                let p = primitive(c);
                if !p.is_num_zero() {
                    set.insert(p);
                }
            }
        }
        by_order.into_iter().map(|(k, s)| (k, s.into_iter().collect())).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.iter().all(|o| o.entries.is_empty())
    }
}

/// Jet coordinates a determining system is split on: every derivative of a
/// working variable, and zeroth-order coordinates that occur only
/// polynomially (never inside a function argument, exponential, power of a
/// sum or elementary function).
pub fn free_jets(e: &Expr, working: &[Name]) -> Vec<Expr> {
    fn walk(e: &Expr, inside: bool, top: &mut BTreeSet<Expr>, hidden: &mut BTreeSet<Expr>) {
        match e.node() {
            Node::Jet(_) => {
                if inside {
                    hidden.insert(e.clone());
                } else {
                    top.insert(e.clone());
                }
            }
            Node::Add(v) | Node::Mul(v) => v.iter().for_each(|c| walk(c, inside, top, hidden)),
            Node::Pow(b, q) => {
                let atomic = matches!(b.node(), Node::Jet(_)) && q.is_integer();
                walk(b, inside || !atomic, top, hidden)
            }
            _ => e.children().into_iter().for_each(|c| walk(c, true, top, hidden)),
        }
    }
    let mut top = BTreeSet::new();
    let mut hidden = BTreeSet::new();
    walk(e, false, &mut top, &mut hidden);
    let mut out: BTreeSet<Expr> = BTreeSet::new();
    for j in e.jets() {
        if !working.contains(&j.dep) {
            continue;
        }
        let x = Expr::from_jet(j.clone());
        if j.order() > 0 || (top.contains(&x) && !hidden.contains(&x)) {
            out.insert(x);
        }
    }
    out.into_iter().collect()
}

/// Reduced invariance conditions of an ansatz with unknown-function
/// infinitesimals, split on the free jet coordinates.
pub fn determining_system(
    setting: &Setting,
    gen: &Infinitesimals,
    man: &Manifold,
    cons: &ConstraintSet,
) -> Result<DeterminingSystem, SymmetryError> {
    let working: Vec<Name> = match &setting.ctx {
        Some(ctx) => ctx.coeff_names(),
        None => setting.deps.clone(),
    };
    let mut orders = Vec::new();
    for r in invariance_residual(setting, gen, man, cons)? {
        let num = clear_denominators(&r.expr, true);
        let free = free_jets(&num, &working);
        let parts = collect_by_monomials(&num, &free).map_err(|e| SymmetryError::NonPolynomial(e.to_string()))?;
        orders.push(OrderSystem {
            order: r.order,
            equation: r.equation,
            residual: num,
            entries: parts.into_iter().collect(),
        });
    }
    Ok(DeterminingSystem { case: man.case.clone(), orders })
}
