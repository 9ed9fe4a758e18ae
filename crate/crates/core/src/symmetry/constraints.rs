//! Constraint ODEs on unknown functions used as rewrite rules on their
//! highest formal derivative.

use crate::expr::{collect_by_monomials, diff_raw, Expr, FuncApp, Node};

use super::SymmetryError;

const CAP: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintRule {
    pub name: String,
    /// Leading atom `f^(L)(args)`.
    pub lead: FuncApp,
    pub rhs: Expr,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub rules: Vec<ConstraintRule>,
}

impl ConstraintSet {
    /// Solve each `c = 0` for its highest derivative atom. Constraints that
    /// no longer mention an unknown function (after closed forms were
    /// substituted) must vanish identically.
    pub fn new(constraints: &[(String, Expr)]) -> Result<Self, SymmetryError> {
        let mut rules = Vec::new();
        for (name, c) in constraints {
            let c = c.normalize();
            let apps: Vec<FuncApp> = c.funcs().into_iter().filter(|f| f.args.iter().all(Expr::is_symbol)).collect();
            let Some(lead) = apps.iter().max_by_key(|f| (f.total_derivs(), (*f).clone())).cloned() else {
                if crate::expr::is_zero(&c) {
                    continue;
                }
                return Err(SymmetryError::ConstraintViolated(name.clone(), c.to_string()));
            };
            let atom = Expr::from_func(lead.clone());
            let parts = collect_by_monomials(&c, std::slice::from_ref(&atom))
                .map_err(|_| SymmetryError::Degenerate(format!("constraint `{name}` is not linear in {atom}")))?;
            let one = Expr::one();
            if parts.keys().any(|k| *k != atom && *k != one) {
                return Err(SymmetryError::Degenerate(format!("constraint `{name}` is not linear in {atom}")));
            }
            let a = parts.get(&atom).cloned().unwrap_or_else(Expr::zero);
            if crate::expr::is_zero(&a) {
                return Err(SymmetryError::Degenerate(format!(
                    "constraint `{name}` has a vanishing coefficient in front of {atom}"
                )));
            }
            let b = parts.get(&one).cloned().unwrap_or_else(Expr::zero);
            let rhs = (-(b / a)).normalize();
            if has_zero_division(&rhs) {
                return Err(SymmetryError::Degenerate(format!("constraint `{name}` divides by zero")));
            }
            rules.push(ConstraintRule { name: name.clone(), lead, rhs });
        }
        Ok(ConstraintSet { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rewrite every atom that is a derivative of some rule's leading atom.
    pub fn apply(&self, e: &Expr) -> Result<Expr, SymmetryError> {
        if self.rules.is_empty() {
            return Ok(e.clone());
        }
        let mut cur = e.clone();
        for _ in 0..CAP {
            let mut map = std::collections::BTreeMap::new();
            for app in cur.funcs() {
                if let Some(rep) = self.rewrite(&app) {
                    map.insert(Expr::from_func(app), rep);
                }
            }
            if map.is_empty() {
                return Ok(cur);
            }
            cur = cur.substitute_raw(&map).normalize();
        }
        Err(SymmetryError::NonTermination(CAP))
    }

    fn rewrite(&self, app: &FuncApp) -> Option<Expr> {
        for r in &self.rules {
            let l = &r.lead;
            if l.name != app.name || l.order != app.order || l.args != app.args {
                continue;
            }
            if app.derivs.iter().zip(&l.derivs).any(|(a, b)| a < b) {
                continue;
            }
            let mut out = r.rhs.clone();
            for (j, (a, b)) in app.derivs.iter().zip(&l.derivs).enumerate() {
                for _ in 0..(a - b) {
                    out = diff_raw(&out, &l.args[j]).expect("symbol arguments").normalize();
                }
            }
            return Some(out);
        }
        None
    }
}

/// True if `e` contains `0^q` with `q < 0`.
pub fn has_zero_division(e: &Expr) -> bool {
    e.any(&|x| matches!(x.node(), Node::Pow(b, q) if b.is_num_zero() && *q < crate::expr::Rational::from_integer(0.into())))
}
