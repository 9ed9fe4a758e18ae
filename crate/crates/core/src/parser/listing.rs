//! Canonical text listing of a parsed model, one item per line.

use std::fmt::Write as _;

use super::model::{Binding, ModelSpec};
use super::render::render_plain;

fn binding(b: &Binding) -> String {
    match b {
        Binding::Param(n, v) => format!("{n} = {}", render_plain(v)),
        Binding::Func(def) => {
            let args: Vec<String> = def.params.iter().map(render_plain).collect();
            format!("{}({}) = {}", def.name, args.join(", "), render_plain(&def.body.normalize()))
        }
    }
}

fn bindings(kw: &str, bs: &[Binding]) -> String {
    if bs.is_empty() {
        return String::new();
    }
    format!(" {kw} {}", bs.iter().map(binding).collect::<Vec<_>>().join(", "))
}

/// Every declaration and item with its expressions in canonical form.
/// Deterministic; used for golden files.
pub fn canonical_listing(spec: &ModelSpec) -> String {
    let sy = &spec.symbols;
    let names = |v: &[crate::expr::Name]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ");
    let mut s = String::new();
    let _ = writeln!(s, "model {}", spec.name.as_deref().unwrap_or("<unnamed>"));
    if !sy.params.is_empty() {
        let _ = writeln!(s, "params {}", names(&sy.params));
    }
    if let Some(e) = &sy.small {
        let _ = writeln!(s, "small {e} order {}", spec.order);
    }
    let _ = writeln!(s, "indep {}", names(&sy.indep));
    let _ = writeln!(s, "dep {}", names(&sy.deps));
    for f in &sy.funcs {
        let _ = writeln!(s, "func {}({})", f.name, names(&f.args));
    }
    for b in &spec.lets {
        let _ = writeln!(s, "let {}", binding(b));
    }
    for e in &spec.equations {
        let _ = writeln!(s, "eq {}: {} = 0", e.name, render_plain(&e.value.normalize()));
    }
    for c in &spec.constraints {
        let _ = writeln!(s, "constraint {}: {} = 0", c.name, render_plain(&c.value.normalize()));
    }
    for g in &spec.generators {
        let mut head = format!("gen {}", g.name);
        head.push_str(&bindings("given", &g.value.given));
        if !g.value.using.is_empty() {
            let _ = write!(head, " using {}", g.value.using.join(", "));
        }
        let _ = writeln!(s, "{head}");
        for (k, c) in &g.value.orders {
            for (v, e) in &c.xi {
                let _ = writeln!(s, "  order {k}: xi[{v}] = {}", render_plain(&e.normalize()));
            }
            for (v, e) in &c.eta {
                let _ = writeln!(s, "  order {k}: eta[{v}] = {}", render_plain(&e.normalize()));
            }
        }
    }
    for o in &spec.solutions {
        let _ = writeln!(s, "sol {}{}", o.name, bindings("given", &o.value.given));
        for (d, e) in &o.value.fields {
            let _ = writeln!(s, "  {d} = {}", render_plain(&e.normalize()));
        }
    }
    s
}
