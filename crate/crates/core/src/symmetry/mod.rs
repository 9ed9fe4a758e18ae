//! Invariance conditions restricted to the manifold of a differential
//! system: classical, Q-conditional (also of q-th type) and approximate.

mod constraints;
mod determining;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{collect_by_monomials, is_zero, name, taylor_coefficient, Expr, ExprError, Jet, MultiIndex, Name};
use crate::jet::{apply_prolonged, multi_indices, total_derivative_raw, Generator};
use crate::parser::{apply_bindings, Binding, GeneratorSource, ModelSpec, SolutionSource};
use crate::perturb::{apply_approx, build_approx_generator, expand_dependent, ApproxGenerator, PerturbError, PerturbationContext};

pub use constraints::{has_zero_division, ConstraintRule, ConstraintSet};
pub use determining::{determining_system, free_jets, DeterminingSystem, OrderSystem};
pub use report::{reports_to_toml, Report, ResidualEntry, Verdict};

/// Iteration cap for rewriting to a fixed point.
pub const REDUCE_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymmetryError {
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("no leading coordinate: {0}")]
    NoLeadingCoordinate(String),
    #[error("rewriting did not terminate within {0} steps")]
    NonTermination(usize),
    #[error("degenerate case: {0}")]
    Degenerate(String),
    #[error("constraint `{0}` does not hold: {1} != 0")]
    ConstraintViolated(String, String),
    #[error("unknown {0} `{1}`")]
    Unknown(&'static str, String),
    #[error("residual is not polynomial in the jet coordinates: {0}")]
    NonPolynomial(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// Equations of a model with bindings applied, and the perturbation context
/// when the model carries a small parameter.
#[derive(Clone, Debug)]
pub struct Setting {
    pub indep: Vec<Name>,
    pub deps: Vec<Name>,
    pub equations: Vec<(String, Expr)>,
    pub ctx: Option<PerturbationContext>,
}

impl Setting {
    /// `p` overrides the model's perturbation order.
    pub fn new(spec: &ModelSpec, p: Option<u32>, given: &[Binding]) -> Self {
        let sy = &spec.symbols;
        let ctx = sy
            .small
            .as_ref()
            .map(|eps| PerturbationContext::new(eps, p.unwrap_or(spec.order), &sy.indep, &sy.deps));
        let mut bindings = spec.lets.clone();
        bindings.extend(given.iter().cloned());
        let equations =
            spec.equations.iter().map(|e| (e.name.clone(), apply_bindings(&e.value, &bindings))).collect();
        Setting { indep: sy.indep.clone(), deps: sy.deps.clone(), equations, ctx }
    }

    pub fn order(&self) -> u32 {
        self.equations.iter().map(|(_, e)| e.max_jet_order()).max().unwrap_or(0)
    }

    pub fn p(&self) -> u32 {
        self.ctx.as_ref().map_or(0, |c| c.p)
    }
}

/// A generator in either setting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Infinitesimals {
    Exact(Generator),
    Approx(ApproxGenerator),
}

impl Infinitesimals {
    /// Components in the working coordinates (leading coefficients and
    /// expansion series in the approximate case).
    pub fn working(&self, setting: &Setting) -> Generator {
        match (self, &setting.ctx) {
            (Infinitesimals::Exact(g), _) => g.clone(),
            (Infinitesimals::Approx(a), Some(ctx)) => a.expanded(ctx),
            (Infinitesimals::Approx(a), None) => a.tilde[0].clone(),
        }
    }
}

/// Build the generator of a model source with model-level and generator
/// bindings applied.
pub fn generator_from_source(
    spec: &ModelSpec,
    setting: &Setting,
    src: &GeneratorSource,
) -> Result<Infinitesimals, SymmetryError> {
    let mut bindings = spec.lets.clone();
    bindings.extend(src.given.iter().cloned());
    let mut seeds: BTreeMap<u32, Generator> = BTreeMap::new();
    for (k, comps) in &src.orders {
        let mut g = Generator::new();
        for (v, e) in &comps.xi {
            g.xi.insert(v.clone(), apply_bindings(e, &bindings));
        }
        for (d, e) in &comps.eta {
            g.eta.insert(d.clone(), apply_bindings(e, &bindings));
        }
        for e in g.xi.values().chain(g.eta.values()) {
            if has_zero_division(e) {
                return Err(SymmetryError::Degenerate(format!("infinitesimal {e} divides by zero")));
            }
        }
        seeds.insert(*k, g);
    }
    match &setting.ctx {
        Some(ctx) => Ok(Infinitesimals::Approx(build_approx_generator(ctx, &seeds)?)),
        None => {
            if seeds.keys().any(|k| *k > 0) {
                return Err(SymmetryError::InvalidSelection(
                    "order blocks need a small parameter in the model".into(),
                ));
            }
            Ok(Infinitesimals::Exact(seeds.remove(&0).unwrap_or_default()))
        }
    }
}

/// Constraints named by `names`, with bindings applied.
pub fn constraint_set(spec: &ModelSpec, names: &[String], given: &[Binding]) -> Result<ConstraintSet, SymmetryError> {
    let mut bindings = spec.lets.clone();
    bindings.extend(given.iter().cloned());
    let mut list = Vec::new();
    for n in names {
        let c = spec.constraint(n).ok_or_else(|| SymmetryError::Unknown("constraint", n.clone()))?;
        list.push((n.clone(), apply_bindings(&c.value, &bindings)));
    }
    ConstraintSet::new(&list)
}

/// All `q`-element selections out of `m` dependent variables, as sorted
/// zero-based index lists.
pub fn selections(m: usize, q: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == q {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, q, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if q <= m {
        rec(0, m, q, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lead: Jet,
    pub rhs: Expr,
    /// Perturbation order the rule belongs to (0 in the exact case).
    pub order: u32,
    pub origin: String,
}

/// Closed rewrite system: no leading coordinate occurs in any right-hand
/// side.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifold {
    pub rules: Vec<Rule>,
    /// Independent variable whose derivative leads each invariant surface
    /// condition.
    pub case: Option<Name>,
    pub selection: Vec<usize>,
}

impl Manifold {
    pub fn leads(&self) -> BTreeSet<Jet> {
        self.rules.iter().map(|r| r.lead.clone()).collect()
    }

    fn map(&self) -> BTreeMap<Expr, Expr> {
        self.rules.iter().map(|r| (Expr::from_jet(r.lead.clone()), r.rhs.clone())).collect()
    }

    /// Add a rule solved from `relation` for `lead` and keep the system
    /// closed.
    fn push(&mut self, relation: &Expr, lead: Jet, order: u32, origin: String) -> Result<(), SymmetryError> {
        let reduced = reduce_modulo(relation, self)?;
        let rhs = solve_linear(&reduced, &lead).ok_or_else(|| {
            SymmetryError::NoLeadingCoordinate(format!("{origin} is not linear in {}", Expr::from_jet(lead.clone())))
        })?;
        let key = Expr::from_jet(lead.clone());
        let one: BTreeMap<Expr, Expr> = [(key, rhs.clone())].into_iter().collect();
        for r in &mut self.rules {
            if r.rhs.jets().contains(&lead) {
                r.rhs = r.rhs.substitute_raw(&one).normalize();
            }
        }
        self.rules.push(Rule { lead, rhs, order, origin });
        Ok(())
    }
}

/// Solve `e = a*lead + b = 0` for `lead`, if `e` is affine in it.
fn solve_linear(e: &Expr, lead: &Jet) -> Option<Expr> {
    let atom = Expr::from_jet(lead.clone());
    let parts = collect_by_monomials(e, std::slice::from_ref(&atom)).ok()?;
    let one = Expr::one();
    if parts.keys().any(|k| *k != atom && *k != one) {
        return None;
    }
    let a = parts.get(&atom)?;
    if is_zero(a) {
        return None;
    }
    let b = parts.get(&one).cloned().unwrap_or_else(Expr::zero);
    Some((-(b / a.clone())).normalize())
}

/// Rewrite leading coordinates until none remains.
pub fn reduce_modulo(e: &Expr, m: &Manifold) -> Result<Expr, SymmetryError> {
    if m.rules.is_empty() {
        return Ok(e.clone());
    }
    let leads = m.leads();
    let map = m.map();
    let mut cur = e.clone();
    for _ in 0..REDUCE_CAP {
        if !cur.jets().iter().any(|j| leads.contains(j)) {
            return Ok(cur);
        }
        cur = cur.substitute_raw(&map).normalize();
    }
    Err(SymmetryError::NonTermination(REDUCE_CAP))
}

fn pick_case(g: &Generator, indep: &[Name], case: Option<&str>) -> Result<Name, SymmetryError> {
    match case {
        Some(c) => {
            let n = name(c);
            if !indep.contains(&n) {
                return Err(SymmetryError::InvalidSelection(format!("`{c}` is not an independent variable")));
            }
            if g.xi_of(c).is_num_zero() {
                return Err(SymmetryError::NoLeadingCoordinate(format!("xi[{c}] vanishes")));
            }
            Ok(n)
        }
        None => indep.iter().find(|v| !g.xi_of(v).is_num_zero()).cloned().ok_or_else(|| {
            SymmetryError::NoLeadingCoordinate("all xi vanish, so the invariant surface condition has no derivative".into())
        }),
    }
}

/// Pick the equation's leading coordinate: prefer coefficients of the given
/// perturbation order, then the highest order, then most derivatives in the
/// earliest independent variables.
fn pick_equation_lead(e: &Expr, m: &Manifold, working: &[Name], prefer: &[Name], indep: &[Name]) -> Option<Jet> {
    let leads = m.leads();
    let mut cands: Vec<Jet> = e
        .jets()
        .into_iter()
        .filter(|j| working.contains(&j.dep) && !leads.contains(j) && j.order() > 0)
        .filter(|j| solve_linear(e, j).is_some())
        .collect();
    cands.sort_by_key(|j| {
        let counts: Vec<u32> = indep.iter().map(|v| j.index.count(v)).collect();
        (prefer.contains(&j.dep), j.order(), counts)
    });
    cands.pop()
}

/// Build the manifold for `gen`: invariant surface conditions of the
/// selected dependent variables and their consequences up to order `r-1`,
/// then the equations. An empty selection gives the classical manifold.
pub fn build_manifold(
    setting: &Setting,
    gen: &Infinitesimals,
    selection: &[usize],
    case: Option<&str>,
) -> Result<Manifold, SymmetryError> {
    let m = setting.deps.len();
    let mut seen = BTreeSet::new();
    for &i in selection {
        if i >= m || !seen.insert(i) {
            return Err(SymmetryError::InvalidSelection(format!(
                "indices must be distinct and below {m}, got {selection:?}"
            )));
        }
    }
    let mut sel = selection.to_vec();
    sel.sort();
    let r = setting.order();
    let g = gen.working(setting);
    let mut man = Manifold { rules: Vec::new(), case: None, selection: sel.clone() };
    let indep = &setting.indep;
    let lower = multi_indices(indep, r.saturating_sub(1));

    match &setting.ctx {
        None => {
            if !sel.is_empty() {
                let i = pick_case(&g, indep, case)?;
                man.case = Some(i.clone());
                for &a in &sel {
                    let dep = &setting.deps[a];
                    let q = q_condition(&g, indep, dep, &|d, s| Expr::from_jet(Jet { dep: d.clone(), index: s.clone() }));
                    consequences(&mut man, &q, &lower, &i, dep, 0)?;
                }
            }
            for (en, e) in &setting.equations {
                let red = reduce_modulo(e, &man)?;
                let lead = pick_equation_lead(&red, &man, &setting.deps, &setting.deps, indep)
                    .ok_or_else(|| SymmetryError::NoLeadingCoordinate(format!("equation `{en}`")))?;
                man.push(&red, lead, 0, format!("equation {en}"))?;
            }
        }
        Some(ctx) => {
            if !sel.is_empty() {
                let leading = match gen {
                    Infinitesimals::Approx(a) => a.tilde[0].clone(),
                    Infinitesimals::Exact(g) => g.clone(),
                };
                let i = pick_case(&leading, indep, case)?;
                man.case = Some(i.clone());
                for &a in &sel {
                    let dep = &setting.deps[a];
                    let q = q_condition(&g, indep, dep, &|d, s| ctx.expanded_jet(d, s));
                    let parts = ctx.split(&q.normalize())?;
                    for (k, qk) in parts.iter().enumerate() {
                        let cdep = ctx.coeff_name(dep, k as u32);
                        consequences(&mut man, qk, &lower, &i, &cdep, k as u32)?;
                    }
                }
            }
            let working = ctx.coeff_names();
            for (en, e) in &setting.equations {
                let parts = ctx.split(&expand_dependent(ctx, e)?)?;
                for (k, ek) in parts.iter().enumerate() {
                    let red = reduce_modulo(ek, &man)?;
                    if is_zero(&red) {
                        continue;
                    }
                    let prefer: Vec<Name> = setting.deps.iter().map(|d| ctx.coeff_name(d, k as u32)).collect();
                    let lead = pick_equation_lead(&red, &man, &working, &prefer, indep).ok_or_else(|| {
                        SymmetryError::NoLeadingCoordinate(format!("equation `{en}` at order {k}"))
                    })?;
                    man.push(&red, lead, k as u32, format!("equation {en} order {k}"))?;
                }
            }
        }
    }
    Ok(man)
}

/// `Q = sum_i xi_i u_{x_i} - eta` with jets supplied by `jet`.
fn q_condition(g: &Generator, indep: &[Name], dep: &Name, jet: &dyn Fn(&Name, &MultiIndex) -> Expr) -> Expr {
    let mut terms = vec![-g.eta_of(dep)];
    for v in indep {
        let xi = g.xi_of(v);
        if !xi.is_num_zero() {
            terms.push(xi * jet(dep, &MultiIndex::new().with(v)));
        }
    }
    Expr::add(terms)
}

/// Push `Q` solved for `dep_{e_i}` and `D^s Q` solved for `dep_{s+e_i}`.
fn consequences(
    man: &mut Manifold,
    q: &Expr,
    lower: &[MultiIndex],
    i: &Name,
    dep: &Name,
    order: u32,
) -> Result<(), SymmetryError> {
    let q = q.normalize();
    let base = MultiIndex::new().with(i);
    man.push(&q, Jet { dep: dep.clone(), index: base.clone() }, order, format!("Q[{dep}]"))?;
    let mut derived: BTreeMap<MultiIndex, Expr> = BTreeMap::new();
    derived.insert(MultiIndex::new(), q);
    for s in lower {
        let v = s.entries()[0].0.clone();
        let prev = s.without(&v).expect("nonempty");
        let d = total_derivative_raw(&derived[&prev], &v).normalize();
        let tag: String = s.expanded().iter().map(|n| n.to_string()).collect();
        man.push(&d, Jet { dep: dep.clone(), index: s.with(i) }, order, format!("D_{tag} Q[{dep}]"))?;
        derived.insert(s.clone(), d);
    }
    Ok(())
}

/// Residual of one equation at one perturbation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Residual {
    pub order: u32,
    pub equation: String,
    pub expr: Expr,
}

impl Residual {
    pub fn vanishes(&self) -> bool {
        is_zero(&self.expr)
    }
}

/// `pr g (Delta)` restricted to the manifold, split by powers of the small
/// parameter, with constraints applied to the formal derivatives of unknown
/// functions.
pub fn invariance_residual(
    setting: &Setting,
    gen: &Infinitesimals,
    man: &Manifold,
    cons: &ConstraintSet,
) -> Result<Vec<Residual>, SymmetryError> {
    let mut out = Vec::new();
    for (en, e) in &setting.equations {
        let parts: Vec<Expr> = match (&setting.ctx, gen) {
            (None, Infinitesimals::Exact(g)) => vec![apply_prolonged(g, &setting.indep, &setting.deps, e)],
            (Some(ctx), Infinitesimals::Approx(a)) => ctx.split(&apply_approx(ctx, a, e)?)?,
            (None, Infinitesimals::Approx(a)) => {
                vec![apply_prolonged(&a.tilde[0], &setting.indep, &setting.deps, e)]
            }
            (Some(ctx), Infinitesimals::Exact(g)) => {
                let seeds = [(0, g.clone())].into_iter().collect();
                let a = build_approx_generator(ctx, &seeds)?;
                ctx.split(&apply_approx(ctx, &a, e)?)?
            }
        };
        for (k, rk) in parts.into_iter().enumerate() {
            let red = reduce_modulo(&rk, man)?;
            let red = cons.apply(&red)?;
            let red = reduce_modulo(&red, man)?;
            out.push(Residual { order: k as u32, equation: en.clone(), expr: red });
        }
    }
    Ok(out)
}

/// Closed form per dependent variable with bindings applied.
pub fn solution_fields(spec: &ModelSpec, src: &SolutionSource) -> BTreeMap<Name, Expr> {
    let mut bindings = spec.lets.clone();
    bindings.extend(src.given.iter().cloned());
    src.fields.iter().map(|(d, e)| (d.clone(), apply_bindings(e, &bindings))).collect()
}

/// Substitute a closed-form (possibly series) solution into the equations.
/// Returns the unexpanded substituted equations.
pub fn substitute_solution(setting: &Setting, fields: &BTreeMap<Name, Expr>) -> Result<Vec<(String, Expr)>, SymmetryError> {
    let mut out = Vec::new();
    for (en, e) in &setting.equations {
        let mut map = BTreeMap::new();
        for j in e.jets() {
            let base = fields.get(&j.dep).ok_or_else(|| SymmetryError::Unknown("solution field", j.dep.to_string()))?;
            let mut d = base.clone();
            for v in j.index.expanded() {
                d = d.diff(&Expr::var(&v))?;
            }
            map.insert(Expr::from_jet(j), d);
        }
        out.push((en.clone(), e.substitute_raw(&map).normalize()));
    }
    Ok(out)
}

/// Coefficients of `eps^0..eps^p` of the equations evaluated on the
/// solution.
pub fn verify_solution(setting: &Setting, fields: &BTreeMap<Name, Expr>) -> Result<Vec<Residual>, SymmetryError> {
    let mut out = Vec::new();
    for (en, sub) in substitute_solution(setting, fields)? {
        let parts = match &setting.ctx {
            None => vec![sub],
            Some(ctx) => match ctx.split(&sub) {
                Ok(v) => v,
                Err(_) => (0..=ctx.p).map(|k| taylor_coefficient(&sub, &ctx.eps, k)).collect(),
            },
        };
        for (k, rk) in parts.into_iter().enumerate() {
            out.push(Residual { order: k as u32, equation: en.clone(), expr: rk });
        }
    }
    Ok(out)
}

/// Options of a generator check.
#[derive(Clone, Debug, Default)]
pub struct GeneratorCheck {
    /// Zero-based indices of the dependent variables whose invariant
    /// surface conditions join the manifold.
    pub selection: Vec<usize>,
    pub case: Option<String>,
    pub p: Option<u32>,
    /// Replaces the generator's `using` list when set.
    pub constraints: Option<Vec<String>>,
    /// Bindings applied before the generator's own.
    pub extra: Vec<Binding>,
}

/// Verify a named generator of `spec`.
pub fn check_generator(
    spec: &ModelSpec,
    gen_name: &str,
    opts: &GeneratorCheck,
    format: crate::parser::Format,
) -> Result<(Report, Vec<Residual>), SymmetryError> {
    let src = spec.generator(gen_name).ok_or_else(|| SymmetryError::Unknown("generator", gen_name.into()))?;
    let mut given = opts.extra.clone();
    given.extend(src.value.given.iter().cloned());
    let mut gsrc = src.value.clone();
    gsrc.given = given.clone();
    let setting = Setting::new(spec, opts.p, &given);
    let gen = generator_from_source(spec, &setting, &gsrc)?;
    let man = build_manifold(&setting, &gen, &opts.selection, opts.case.as_deref())?;
    let names = opts.constraints.clone().unwrap_or_else(|| src.value.using.clone());
    let cons = constraint_set(spec, &names, &given)?;
    let res = invariance_residual(&setting, &gen, &man, &cons)?;
    let entries: Vec<ResidualEntry> = res.iter().map(|r| ResidualEntry::symbolic(r, format)).collect();
    let report = Report {
        model: spec.name.clone().unwrap_or_default(),
        kind: "generator".into(),
        name: gen_name.into(),
        q: man.selection.len(),
        selection: man.selection.iter().map(|i| i + 1).collect(),
        p: setting.p(),
        case: man.case.as_ref().map(|c| c.to_string()),
        constraints: names,
        verdict: Report::verdict_of(&entries),
        notes: Vec::new(),
        residuals: entries,
    };
    Ok((report, res))
}

/// Verify a named solution of `spec` symbolically.
pub fn check_solution(
    spec: &ModelSpec,
    sol_name: &str,
    p: Option<u32>,
    extra: &[Binding],
    format: crate::parser::Format,
) -> Result<(Report, Vec<Residual>), SymmetryError> {
    let src = spec.solution(sol_name).ok_or_else(|| SymmetryError::Unknown("solution", sol_name.into()))?;
    let mut given = extra.to_vec();
    given.extend(src.value.given.iter().cloned());
    let mut ssrc = src.value.clone();
    ssrc.given = given.clone();
    let setting = Setting::new(spec, p, &given);
    let fields = solution_fields(spec, &ssrc);
    let res = verify_solution(&setting, &fields)?;
    let entries: Vec<ResidualEntry> = res.iter().map(|r| ResidualEntry::symbolic(r, format)).collect();
    let report = Report {
        model: spec.name.clone().unwrap_or_default(),
        kind: "solution".into(),
        name: sol_name.into(),
        q: 0,
        selection: Vec::new(),
        p: setting.p(),
        case: None,
        constraints: Vec::new(),
        verdict: Report::verdict_of(&entries),
        notes: Vec::new(),
        residuals: entries,
    };
    Ok((report, res))
}
