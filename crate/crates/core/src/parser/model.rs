use std::collections::BTreeMap;

use crate::expr::{Expr, FunctionDef, Name};

use super::diagnostic::Span;

/// Signature of an unknown function declared with `func`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncSig {
    pub name: Name,
    pub args: Vec<Name>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    pub params: Vec<Name>,
    pub indep: Vec<Name>,
    pub deps: Vec<Name>,
    pub small: Option<Name>,
    pub funcs: Vec<FuncSig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Param,
    Small,
    Indep,
    Dep,
    Func,
}

impl SymbolTable {
    pub fn kind(&self, n: &str) -> Option<SymbolKind> {
        if self.small.as_deref() == Some(n) {
            Some(SymbolKind::Small)
        } else if self.params.iter().any(|p| p.as_ref() == n) {
            Some(SymbolKind::Param)
        } else if self.indep.iter().any(|p| p.as_ref() == n) {
            Some(SymbolKind::Indep)
        } else if self.deps.iter().any(|p| p.as_ref() == n) {
            Some(SymbolKind::Dep)
        } else if self.funcs.iter().any(|f| f.name.as_ref() == n) {
            Some(SymbolKind::Func)
        } else {
            None
        }
    }

    pub fn func(&self, n: &str) -> Option<&FuncSig> {
        self.funcs.iter().find(|f| f.name.as_ref() == n)
    }

    /// Symbol for a function argument name: a variable or a dependent
    /// variable.
    pub fn arg_symbol(&self, n: &str) -> Expr {
        match self.kind(n) {
            Some(SymbolKind::Dep) => Expr::jet(n, &[]),
            _ => Expr::var(n),
        }
    }

    pub fn func_def(&self, fname: &str, body: Expr) -> Option<FunctionDef> {
        let sig = self.func(fname)?;
        Some(FunctionDef {
            name: sig.name.clone(),
            order: None,
            params: sig.args.iter().map(|a| self.arg_symbol(a)).collect(),
            body,
        })
    }

    /// Name of the k-th expansion coefficient of dependent variable `dep`.
    pub fn expansion_name(dep: &str, k: u32) -> String {
        format!("{dep}{k}")
    }
}

/// A named item together with the span of its statement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Named<T> {
    pub name: String,
    pub span: Span,
    pub value: T,
}

/// Substitution attached to a generator or solution (`given ...`) or to the
/// whole model (`let ...`): a parameter value or a closed form for a
/// declared function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    Param(Name, Expr),
    Func(FunctionDef),
}

impl Binding {
    pub fn name(&self) -> &str {
        match self {
            Binding::Param(n, _) => n,
            Binding::Func(f) => &f.name,
        }
    }

    pub fn apply(&self, e: &Expr) -> Expr {
        match self {
            Binding::Param(n, v) => e.substitute_raw(&[(Expr::param(n), v.clone())].into_iter().collect()),
            Binding::Func(def) => e.instantiate_raw(def).unwrap_or_else(|_| e.clone()),
        }
    }
}

/// Apply bindings in order; later bindings see earlier substitutions.
pub fn apply_bindings(e: &Expr, bindings: &[Binding]) -> Expr {
    let mut out = e.clone();
    for b in bindings {
        out = b.apply(&out);
    }
    out.normalize()
}

/// Infinitesimals of one order: `xi` keyed by independent variable,
/// `eta` keyed by dependent variable. Missing entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Components {
    pub xi: BTreeMap<Name, Expr>,
    pub eta: BTreeMap<Name, Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSource {
    /// Order 0 holds the exact generator; approximate generators list seeds
    /// per order in `order k:` blocks.
    pub orders: BTreeMap<u32, Components>,
    pub approximate: bool,
    pub given: Vec<Binding>,
    /// Constraints assumed by this generator, applied as rewrite rules.
    pub using: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionSource {
    /// Closed form per dependent variable; may be polynomial in the small
    /// parameter.
    pub fields: BTreeMap<Name, Expr>,
    pub given: Vec<Binding>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: Option<String>,
    pub symbols: SymbolTable,
    /// Perturbation order: the `order` of the small parameter, 1 if
    /// unspecified, 0 without a small parameter.
    pub order: u32,
    pub equations: Vec<Named<Expr>>,
    pub generators: Vec<Named<GeneratorSource>>,
    pub solutions: Vec<Named<SolutionSource>>,
    pub constraints: Vec<Named<Expr>>,
    pub lets: Vec<Binding>,
}

fn find<'a, T>(items: &'a [Named<T>], name: &str) -> Option<&'a Named<T>> {
    items.iter().find(|n| n.name == name)
}

impl ModelSpec {
    pub fn equation(&self, name: &str) -> Option<&Named<Expr>> {
        find(&self.equations, name)
    }

    pub fn generator(&self, name: &str) -> Option<&Named<GeneratorSource>> {
        find(&self.generators, name)
    }

    pub fn solution(&self, name: &str) -> Option<&Named<SolutionSource>> {
        find(&self.solutions, name)
    }

    pub fn constraint(&self, name: &str) -> Option<&Named<Expr>> {
        find(&self.constraints, name)
    }

    /// Differential order of the equations.
    pub fn differential_order(&self) -> u32 {
        self.equations.iter().map(|e| e.value.max_jet_order()).max().unwrap_or(0)
    }

    /// Equations with the global `let` bindings applied, normalized.
    pub fn equations_resolved(&self) -> Vec<Expr> {
        self.equations.iter().map(|e| apply_bindings(&e.value, &self.lets)).collect()
    }
}
