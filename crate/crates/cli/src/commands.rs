use std::fmt::Write as _;
use std::path::Path;

use approxsym::casestudy::{
    case_study_env, deviation_notes, figure_preset, preset_scan, rdc_hyperbolic_model, scan_presets,
    solution_residuals, FigurePreset, ScanSetup,
};
use approxsym::expr::Expr;
use approxsym::numeric::{eval, grid_max_abs, scan_csv, surface_dump, Env, GridSpec};
use approxsym::parser::{
    canonical_listing, latex_document, parse_expr, parse_model_file, parse_rational, render, Binding, Format, ModelFileError, ModelSpec,
    SymbolKind,
};
use approxsym::symmetry::{
    build_manifold, check_generator, check_solution, constraint_set, determining_system, generator_from_source,
    reports_to_toml, solution_fields, GeneratorCheck, Report, ResidualEntry, Setting, SymmetryError, Verdict,
};
use rayon::prelude::*;

use crate::args::{
    DeterminingArgs, GridOpts, OutFormat, ParseArgs, RenderArgs, ScanArgs, SymmetryOpts, VerifyArgs,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Io(..) => CliError::Usage(e.to_string()),
            ModelFileError::Parse(..) => CliError::Parse(e.to_string()),
        }
    }
}

/// Output text and whether every requested check passed.
pub struct Outcome {
    pub text: String,
    pub ok: bool,
}

fn sym_format(f: OutFormat) -> Format {
    match f {
        OutFormat::Latex => Format::Latex,
        _ => Format::Plain,
    }
}

fn load(path: &Path) -> Result<ModelSpec, CliError> {
    Ok(parse_model_file(path)?)
}

fn model_label(spec: &ModelSpec) -> String {
    spec.name.clone().unwrap_or_else(|| "<unnamed>".into())
}

/// `name=expr` flags as bindings; functions get closed forms over their
/// declared arguments.
fn parse_sets(spec: &ModelSpec, sets: &[String]) -> Result<Vec<Binding>, CliError> {
    let mut out = Vec::new();
    for s in sets {
        let (n, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects NAME=EXPR, got `{s}`")))?;
        let (n, v) = (n.trim(), v.trim());
        let value = match parse_rational(v) {
            Some(q) => Expr::num(q),
            None => parse_expr(v, &spec.symbols)
                .map_err(|d| CliError::Parse(format!("--set {n}: {d}")))?
                .normalize(),
        };
        match spec.symbols.kind(n) {
            Some(SymbolKind::Param) | Some(SymbolKind::Small) => out.push(Binding::Param(n.into(), value)),
            Some(SymbolKind::Func) => {
                let def = spec.symbols.func_def(n, value).expect("declared function");
                out.push(Binding::Func(def));
            }
            _ => return Err(CliError::Usage(format!("--set: `{n}` is not a parameter or function of the model"))),
        }
    }
    Ok(out)
}

fn selection(spec: &ModelSpec, sym: &SymmetryOpts) -> Result<Vec<usize>, CliError> {
    let m = spec.symbols.deps.len();
    if !sym.select.is_empty() {
        if let Some(q) = sym.q {
            if q != sym.select.len() {
                return Err(CliError::Usage(format!("--q {q} does not match {} selected indices", sym.select.len())));
            }
        }
        let mut sel = Vec::new();
        for &i in &sym.select {
            if i == 0 || i > m {
                return Err(CliError::Usage(format!("--select index {i} out of range 1..={m}")));
            }
            sel.push(i - 1);
        }
        return Ok(sel);
    }
    let q = sym.q.unwrap_or(0);
    if q > m {
        return Err(CliError::Usage(format!("--q {q} exceeds the {m} dependent variables")));
    }
    Ok((0..q).collect())
}

fn symmetry_error(e: SymmetryError) -> CliError {
    match e {
        SymmetryError::Unknown(..) | SymmetryError::InvalidSelection(_) => CliError::Usage(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    }
}

/// Errors that mean the item does not verify, as opposed to a broken run.
fn is_verification_failure(e: &SymmetryError) -> bool {
    matches!(
        e,
        SymmetryError::Degenerate(_) | SymmetryError::ConstraintViolated(..) | SymmetryError::NoLeadingCoordinate(_)
    )
}

fn stamp_prefix(stamp: bool, comment: &str) -> String {
    if !stamp {
        return String::new();
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{comment} generated at unix time {secs}\n")
}

pub fn write_output(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_parse(a: &ParseArgs) -> Result<Outcome, CliError> {
    let spec = load(&a.model)?;
    let eqs: Vec<(String, Expr)> =
        spec.equations.iter().zip(spec.equations_resolved()).map(|(n, e)| (n.name.clone(), e)).collect();
    let text = match a.format {
        OutFormat::Latex => latex_document(&eqs),
        _ => canonical_listing(&spec),
    };
    Ok(Outcome { text: stamp_prefix(a.output.stamp && a.format != OutFormat::Latex, "#") + &text, ok: true })
}

fn resolve_grid(base: GridSpec, g: &GridOpts) -> Result<GridSpec, CliError> {
    let range = |s: &str| -> Result<(f64, f64), CliError> {
        let (a, b) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("range `{s}` must be a:b")))?;
        let p = |v: &str| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number `{v}`")));
        Ok((p(a)?, p(b)?))
    };
    let mut out = base;
    if let Some(t) = &g.t {
        out.t = range(t)?;
    }
    if let Some(x) = &g.x {
        out.x = range(x)?;
    }
    if let Some(n) = g.nt {
        out.nt = n;
    }
    if let Some(n) = g.nx {
        out.nx = n;
    }
    out.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(out)
}

fn preset(name: &str) -> Result<FigurePreset, CliError> {
    figure_preset(name).ok_or_else(|| {
        let names: Vec<_> = scan_presets().iter().map(|p| p.name).collect();
        CliError::Usage(format!("unknown preset `{name}` (expected one of {})", names.join(", ")))
    })
}

/// Numeric values of constant `--set` bindings.
fn numeric_sets(bindings: &[Binding]) -> Vec<(String, f64)> {
    bindings
        .iter()
        .filter_map(|b| match b {
            Binding::Param(n, v) => eval(v, &Env::new()).ok().map(|x| (n.to_string(), x)),
            Binding::Func(_) => None,
        })
        .collect()
}

enum Item {
    Gen(String),
    Sol(String),
}

struct ItemResult {
    report: Report,
    ok: bool,
}

fn verify_item(spec: &ModelSpec, a: &VerifyArgs, item: &Item, extra: &[Binding]) -> Result<ItemResult, CliError> {
    let fmt = sym_format(a.format);
    let (mut report, res) = match item {
        Item::Gen(name) => {
            let opts = GeneratorCheck {
                selection: selection(spec, &a.sym)?,
                case: a.sym.case.clone(),
                p: a.sym.p,
                constraints: a.using.clone(),
                extra: extra.to_vec(),
            };
            match check_generator(spec, name, &opts, fmt) {
                Ok(v) => v,
                Err(e) if is_verification_failure(&e) => return Ok(failed(spec, "generator", name, &opts, e)),
                Err(e) => return Err(symmetry_error(e)),
            }
        }
        Item::Sol(name) => check_solution(spec, name, a.sym.p, extra, fmt).map_err(symmetry_error)?,
    };
    let name = match item {
        Item::Gen(n) | Item::Sol(n) => n,
    };
    if spec.name.as_deref().is_some_and(|m| m.starts_with("rdc")) {
        report.notes.extend(deviation_notes(name));
    }
    if let (Item::Sol(name), Verdict::Fail) = (item, report.verdict) {
        let numeric_only = res.iter().any(|r| {
            r.expr.any(&|x| matches!(x.node(), approxsym::expr::Node::Dawson(_) | approxsym::expr::Node::Func(_)))
        });
        if numeric_only {
            numeric_fallback(spec, a, name, extra, &res, &mut report)?;
        }
    }
    let ok = report.verdict == Verdict::Pass;
    Ok(ItemResult { report, ok })
}

fn failed(spec: &ModelSpec, kind: &str, name: &str, opts: &GeneratorCheck, e: SymmetryError) -> ItemResult {
    ItemResult {
        report: Report {
            model: model_label(spec),
            kind: kind.into(),
            name: name.into(),
            q: opts.selection.len(),
            selection: opts.selection.iter().map(|i| i + 1).collect(),
            p: opts.p.unwrap_or(spec.order),
            case: opts.case.clone(),
            constraints: opts.constraints.clone().unwrap_or_default(),
            verdict: Verdict::Fail,
            notes: vec![e.to_string()],
            residuals: Vec::new(),
        },
        ok: false,
    }
}

/// Grid check of residuals that keep transcendental atoms after
/// simplification.
fn numeric_fallback(
    spec: &ModelSpec,
    a: &VerifyArgs,
    name: &str,
    extra: &[Binding],
    res: &[approxsym::symmetry::Residual],
    report: &mut Report,
) -> Result<(), CliError> {
    let base = match &a.preset {
        Some(p) => preset(p)?.grid(),
        None => {
            let mut g = GridSpec::new(Vec::new(), 0.0);
            g.x = (0.5, 4.0);
            g
        }
    };
    let mut grid = resolve_grid(base, &a.grid)?;
    grid.bindings.extend(numeric_sets(extra));
    let env = case_study_env();
    let eps = spec.symbols.small.as_deref();
    let mut all = true;
    let mut entries = Vec::new();
    for r in res {
        let mut e = ResidualEntry::symbolic(r, sym_format(a.format));
        match grid_max_abs(&r.expr, &grid, eps, 0.0, &env) {
            Ok(m) => {
                e.numeric_max = Some(m);
                e.vanishes = m < a.tol;
            }
            Err(err) => {
                report.notes.push(format!("numeric check of {name} skipped: {err}"));
                e.vanishes = false;
            }
        }
        all &= e.vanishes;
        entries.push(e);
    }
    report.notes.push(format!("numeric-only: grid max-abs residual per order, tolerance {:e}", a.tol));
    report.residuals = entries;
    report.verdict = if all { Verdict::Pass } else { Verdict::Fail };
    Ok(())
}

fn plain_report(r: &Report) -> String {
    let mut s = String::new();
    let mut head = format!("{} {} on {}", r.kind, r.name, r.model);
    if r.kind == "generator" {
        let sel: Vec<String> = r.selection.iter().map(|i| i.to_string()).collect();
        let _ = write!(head, " (q = {}, selection [{}]", r.q, sel.join(", "));
        if let Some(c) = &r.case {
            let _ = write!(head, ", case {c}");
        }
        if !r.constraints.is_empty() {
            let _ = write!(head, ", using {}", r.constraints.join(", "));
        }
        head.push(')');
    }
    let _ = write!(head, ", p = {}", r.p);
    let verdict = match r.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
    };
    let _ = writeln!(s, "{head}: {verdict}");
    for e in &r.residuals {
        let num = e.numeric_max.map(|m| format!("  [grid max {m:.3e}]")).unwrap_or_default();
        let _ = writeln!(s, "  order {} [{}]: {}{num}", e.order, e.equation, e.residual);
    }
    for n in &r.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    s
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let spec = load(&a.model)?;
    let extra = parse_sets(&spec, &a.sym.set)?;
    let mut items: Vec<Item> = Vec::new();
    if a.all {
        items.extend(spec.generators.iter().map(|g| Item::Gen(g.name.clone())));
        items.extend(spec.solutions.iter().map(|s| Item::Sol(s.name.clone())));
    }
    items.extend(a.gens.iter().cloned().map(Item::Gen));
    items.extend(a.sols.iter().cloned().map(Item::Sol));
    if items.is_empty() {
        return Err(CliError::Usage("nothing to verify: give --gen, --sol or --all".into()));
    }
    for it in &items {
        match it {
            Item::Gen(n) if spec.generator(n).is_none() => return Err(CliError::Usage(format!("unknown generator `{n}`"))),
            Item::Sol(n) if spec.solution(n).is_none() => return Err(CliError::Usage(format!("unknown solution `{n}`"))),
            _ => {}
        }
    }
    let results: Vec<Result<ItemResult, CliError>> = items.par_iter().map(|it| verify_item(&spec, a, it, &extra)).collect();
    let mut done = Vec::new();
    for r in results {
        done.push(r?);
    }
    let ok = done.iter().all(|r| r.ok);
    let reports: Vec<Report> = done.into_iter().map(|r| r.report).collect();
    let text = match a.format {
        OutFormat::Report => stamp_prefix(a.output.stamp, "#") + &reports_to_toml(&reports),
        _ => stamp_prefix(a.output.stamp, "#") + &reports.iter().map(plain_report).collect::<String>(),
    };
    Ok(Outcome { text, ok })
}

pub fn cmd_determining(a: &DeterminingArgs) -> Result<Outcome, CliError> {
    let spec = load(&a.model)?;
    let extra = parse_sets(&spec, &a.sym.set)?;
    let src = spec.generator(&a.gen).ok_or_else(|| CliError::Usage(format!("unknown generator `{}`", a.gen)))?;
    if src.value.orders.values().all(|c| c.xi.is_empty() && c.eta.is_empty()) {
        return Err(CliError::Usage(format!("generator `{}` has an empty ansatz", a.gen)));
    }
    let mut given = extra;
    given.extend(src.value.given.iter().cloned());
    let mut gsrc = src.value.clone();
    gsrc.given = given.clone();
    let setting = Setting::new(&spec, a.sym.p, &given);
    let gen = generator_from_source(&spec, &setting, &gsrc).map_err(symmetry_error)?;
    let sel = selection(&spec, &a.sym)?;
    let man = build_manifold(&setting, &gen, &sel, a.sym.case.as_deref()).map_err(symmetry_error)?;
    let cons = constraint_set(&spec, &[], &given).map_err(symmetry_error)?;
    let sys = determining_system(&setting, &gen, &man, &cons).map_err(symmetry_error)?;
    let fmt = sym_format(a.format);
    let text = match a.format {
        OutFormat::Latex => {
            let mut lines = Vec::new();
            for (k, eqs) in sys.equations() {
                for (i, e) in eqs.into_iter().enumerate() {
                    lines.push((format!("order {k}, equation {}", i + 1), e));
                }
            }
            latex_document(&lines)
        }
        OutFormat::Report => {
            #[derive(serde::Serialize)]
            struct Order {
                order: u32,
                equations: Vec<String>,
            }
            #[derive(serde::Serialize)]
            struct Doc {
                model: String,
                generator: String,
                selection: Vec<usize>,
                #[serde(skip_serializing_if = "Option::is_none")]
                case: Option<String>,
                orders: Vec<Order>,
            }
            let doc = Doc {
                model: model_label(&spec),
                generator: a.gen.clone(),
                selection: man.selection.iter().map(|i| i + 1).collect(),
                case: man.case.as_ref().map(|c| c.to_string()),
                orders: sys
                    .equations()
                    .into_iter()
                    .map(|(k, eqs)| Order { order: k, equations: eqs.iter().map(|e| render(e, fmt)).collect() })
                    .collect(),
            };
            stamp_prefix(a.output.stamp, "#") + &toml::to_string(&doc).map_err(|e| CliError::Internal(e.to_string()))?
        }
        OutFormat::Plain => {
            let mut s = stamp_prefix(a.output.stamp, "#");
            let _ = writeln!(s, "determining system of {} on {}", a.gen, model_label(&spec));
            for (k, eqs) in sys.equations() {
                let _ = writeln!(s, "order {k}: {} equation(s)", eqs.len());
                for e in eqs {
                    let _ = writeln!(s, "  {} = 0", render(&e, fmt));
                }
            }
            s
        }
    };
    Ok(Outcome { text, ok: true })
}

fn parse_numeric_sets(sets: &[String]) -> Result<Vec<(String, f64)>, CliError> {
    sets.iter()
        .map(|s| {
            let (n, v) =
                s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects NAME=NUMBER, got `{s}`")))?;
            let x = v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("--set {n}: `{v}` is not a number")))?;
            Ok((n.trim().to_string(), x))
        })
        .collect()
}

pub fn cmd_scan(a: &ScanArgs) -> Result<Outcome, CliError> {
    let sets = parse_numeric_sets(&a.set)?;
    let mut setup: ScanSetup = match (&a.preset, &a.model) {
        (Some(p), None) => {
            let p = preset(p)?;
            preset_scan(&p, a.sol.as_deref(), a.corrupt).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (p, Some(m)) => {
            let spec = load(m)?;
            let sol = a
                .sol
                .clone()
                .or_else(|| p.as_ref().and_then(|p| figure_preset(p)).map(|p| p.solution.to_string()))
                .ok_or_else(|| CliError::Usage("scan with --model needs --sol".into()))?;
            if spec.solution(&sol).is_none() {
                return Err(CliError::Usage(format!("unknown solution `{sol}`")));
            }
            let res = solution_residuals(&spec, &sol, &[], a.corrupt).map_err(|e| CliError::Internal(e.to_string()))?;
            let grid = match p {
                Some(p) => preset(p)?.grid(),
                None => GridSpec::new(Vec::new(), a.eps.unwrap_or(0.0)),
            };
            ScanSetup { residual: res[0].1.clone(), eps: spec.symbols.small.clone(), grid }
        }
        (None, None) => return Err(CliError::Usage("scan needs --preset or --model".into())),
    };
    setup.grid = resolve_grid(setup.grid, &a.grid)?;
    if let Some(e) = a.eps {
        setup.grid.eps = e;
    }
    for (n, v) in sets {
        setup.grid.bindings.retain(|(k, _)| *k != n);
        setup.grid.bindings.push((n, v));
    }
    let rows = setup.run(a.halvings).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(path) = &a.surface {
        let spec = match &a.model {
            Some(m) => load(m)?,
            None => rdc_hyperbolic_model(),
        };
        let sol = a.sol.clone().or_else(|| a.preset.as_ref().and_then(|p| figure_preset(p)).map(|p| p.solution.into()));
        let sol = sol.ok_or_else(|| CliError::Usage("--surface needs a solution".into()))?;
        let src = spec.solution(&sol).ok_or_else(|| CliError::Usage(format!("unknown solution `{sol}`")))?;
        let fields = solution_fields(&spec, &src.value);
        let u = fields.values().next().ok_or_else(|| CliError::Usage("solution has no fields".into()))?;
        let dump = surface_dump(u, &setup.grid, setup.eps.as_deref(), &case_study_env())
            .map_err(|e| CliError::Internal(e.to_string()))?;
        write_output(&dump, Some(path))?;
    }
    Ok(Outcome { text: stamp_prefix(a.output.stamp, "#") + &scan_csv(&rows), ok: true })
}

pub fn cmd_render(a: &RenderArgs) -> Result<Outcome, CliError> {
    let spec = load(&a.model)?;
    let fmt = sym_format(a.format);
    let text = match &a.expr {
        Some(src) => {
            let e = parse_expr(src, &spec.symbols).map_err(|d| CliError::Parse(d.to_string()))?.normalize();
            format!("{}\n", render(&e, fmt))
        }
        None => {
            let eqs: Vec<(String, Expr)> =
                spec.equations.iter().zip(spec.equations_resolved()).map(|(n, e)| (n.name.clone(), e)).collect();
            match a.format {
                OutFormat::Latex => latex_document(&eqs),
                _ => eqs.iter().map(|(n, e)| format!("{n}: {} = 0\n", render(e, fmt))).collect(),
            }
        }
    };
    Ok(Outcome { text, ok: true })
}
