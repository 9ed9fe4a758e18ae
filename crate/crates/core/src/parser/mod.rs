//! The `.sym` model language: recursive-descent parser, diagnostics and
//! printers.
//!
//! Statements start with a keyword and run until the next keyword, so line
//! breaks are free. See the README for the full grammar.

mod diagnostic;
mod lexer;
mod listing;
mod model;
mod render;

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::expr::{name, Expr, FuncApp, FunctionDef, Node, Rational};

pub use diagnostic::{Diagnostic, Diagnostics, Severity, Span};
pub use lexer::{lex, Tok, Token};
pub use listing::canonical_listing;
pub use model::{
    apply_bindings, Binding, Components, FuncSig, GeneratorSource, ModelSpec, Named, SolutionSource,
    SymbolKind, SymbolTable,
};
pub use render::{latex_document, render, render_latex, render_plain, Format};

const KEYWORDS: &[&str] =
    &["model", "params", "param", "small", "indep", "dep", "func", "include", "let", "eq", "gen", "sol", "constraint"];
const RESERVED: &[&str] = &["D", "exp", "sin", "cos", "sqrt", "dawson", "order", "given", "using", "xi", "eta"];
const MAX_DEPTH: usize = 200;
const MAX_EXPONENT: i64 = 64;
const MAX_INCLUDE_DEPTH: usize = 8;

/// Resolves `include "path"` to source text.
pub type Resolver<'r> = dyn FnMut(&str) -> Result<String, String> + 'r;

/// Parse a model. `include` statements are rejected; use
/// [`parse_model_with`] to supply a resolver.
pub fn parse_model(src: &str) -> Result<ModelSpec, Diagnostics> {
    let mut none = |p: &str| -> Result<String, String> { Err(format!("includes are not available here (`{p}`)")) };
    parse_model_with(src, &mut none)
}

pub fn parse_model_with(src: &str, resolver: &mut Resolver<'_>) -> Result<ModelSpec, Diagnostics> {
    let mut state = ModelState::default();
    let mut diags = Vec::new();
    parse_into(src, &mut state, resolver, 0, &mut diags);
    if diags.is_empty() {
        state.finish(src, &mut diags);
    }
    if diags.is_empty() {
        Ok(state.spec)
    } else {
        Err(Diagnostics(diags))
    }
}

/// Read and parse a model file. Include paths are resolved relative to the
/// directory of `path`.
pub fn parse_model_file(path: &std::path::Path) -> Result<ModelSpec, ModelFileError> {
    let src = std::fs::read_to_string(path).map_err(|e| ModelFileError::Io(path.display().to_string(), e.to_string()))?;
    let dir = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    let mut resolver = |p: &str| -> Result<String, String> {
        std::fs::read_to_string(dir.join(p)).map_err(|e| e.to_string())
    };
    parse_model_with(&src, &mut resolver).map_err(|d| ModelFileError::Parse(path.display().to_string(), d))
}

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("{0}: {1}")]
    Parse(String, Diagnostics),
}

/// Parse a single expression against a symbol table. The result is raw
/// (unnormalized).
pub fn parse_expr(src: &str, symbols: &SymbolTable) -> Result<Expr, Diagnostics> {
    let toks = lex(src).map_err(|d| Diagnostics(vec![d]))?;
    let mut p = Parser::new(src, toks, symbols);
    let e = p.expr().map_err(|d| Diagnostics(vec![d]))?;
    if p.peek() != &Tok::Eof {
        let t = p.cur().clone();
        return Err(Diagnostics(vec![Diagnostic::error(
            p.span(t.start, t.end),
            format!("unexpected {} after expression", t.tok.describe()),
        )]));
    }
    Ok(e.expr)
}

#[derive(Default)]
struct ModelState {
    spec: ModelSpec,
    decl_spans: HashMap<String, Span>,
    small_order: Option<u32>,
}

impl ModelState {
    fn finish(&mut self, src: &str, diags: &mut Vec<Diagnostic>) {
        let p = match &self.spec.symbols.small {
            Some(_) => self.small_order.unwrap_or(1),
            None => 0,
        };
        self.spec.order = p;
        if self.spec.symbols.small.is_some() {
            for dep in &self.spec.symbols.deps {
                for k in 0..=p {
                    let n = SymbolTable::expansion_name(dep, k);
                    if let Some(sp) = self.decl_spans.get(&n) {
                        diags.push(
                            Diagnostic::error(*sp, format!("`{n}` clashes with the expansion coefficient of `{dep}`"))
                                .with_hint("rename the symbol; expansion coefficients are named <dep><k>"),
                        );
                    }
                }
            }
        }
        for g in &self.spec.generators {
            if let Some(k) = g.value.orders.keys().find(|k| **k > p) {
                diags.push(Diagnostic::error(
                    g.span,
                    format!("generator `{}` has an order {k} block but the perturbation order is {p}", g.name),
                ));
            }
            for c in &g.value.using {
                if self.spec.constraint(c).is_none() {
                    diags.push(
                        Diagnostic::error(g.span, format!("generator `{}` uses unknown constraint `{c}`", g.name))
                            .with_hint("declare it with `constraint NAME: lhs = rhs`"),
                    );
                }
            }
        }
        let _ = src;
    }
}

fn parse_into(
    src: &str,
    state: &mut ModelState,
    resolver: &mut Resolver<'_>,
    depth: usize,
    diags: &mut Vec<Diagnostic>,
) {
    let toks = match lex(src) {
        Ok(t) => t,
        Err(d) => {
            diags.push(d);
            return;
        }
    };
    let symbols = state.spec.symbols.clone();
    let mut p = Parser::new(src, toks, &symbols);
    while p.peek() != &Tok::Eof {
        let start = p.pos;
        if let Err(d) = p.statement(state, resolver, depth, diags) {
            diags.push(d);
            if p.pos == start {
                p.pos += 1;
            }
            p.skip_to_keyword();
        }
        p.symbols = state.spec.symbols.clone();
    }
}

fn is_keyword(t: &Tok) -> bool {
    matches!(t, Tok::Ident(s) if KEYWORDS.contains(&s.as_str()))
}

/// A parsed expression with its source extent.
struct Spanned {
    expr: Expr,
    start: usize,
    end: usize,
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    symbols: SymbolTable,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn new(src: &'a str, toks: Vec<Token>, symbols: &SymbolTable) -> Self {
        Parser { src, toks, pos: 0, depth: 0, symbols: symbols.clone() }
    }

    fn cur(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek(&self) -> &Tok {
        &self.cur().tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.cur().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn span(&self, start: usize, end: usize) -> Span {
        Span::new(self.src, start, end)
    }

    fn err_here(&self, msg: impl Into<String>) -> Diagnostic {
        let t = self.cur();
        Diagnostic::error(self.span(t.start, t.end), msg)
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            let found = self.peek().describe();
            Err(self.err_here(format!("expected {}, found {found}", tok.describe())))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(self.peek()) => {
                let t = self.bump();
                Ok((s, self.span(t.start, t.end)))
            }
            other => Err(self.err_here(format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn at_statement_end(&self) -> bool {
        self.peek() == &Tok::Eof || is_keyword(self.peek())
    }

    fn skip_to_keyword(&mut self) {
        while !self.at_statement_end() {
            self.bump();
        }
    }

    fn statement(
        &mut self,
        state: &mut ModelState,
        resolver: &mut Resolver<'_>,
        depth: usize,
        diags: &mut Vec<Diagnostic>,
    ) -> PResult<()> {
        let kw = match self.peek().clone() {
            Tok::Ident(s) if is_keyword(self.peek()) => s,
            other => {
                return Err(self
                    .err_here(format!("expected a statement keyword, found {}", other.describe()))
                    .with_hint("statements start with one of: model, params, small, indep, dep, func, include, let, eq, gen, sol, constraint"))
            }
        };
        let kw_tok = self.bump();
        match kw.as_str() {
            "model" => {
                let (n, _) = self.ident("a model name")?;
                state.spec.name.get_or_insert(n);
            }
            "params" | "param" => {
                for (n, sp) in self.name_list()? {
                    self.declare(state, &n, sp)?;
                    state.spec.symbols.params.push(name(&n));
                }
            }
            "indep" => {
                for (n, sp) in self.name_list()? {
                    self.declare(state, &n, sp)?;
                    state.spec.symbols.indep.push(name(&n));
                }
            }
            "dep" => {
                for (n, sp) in self.name_list()? {
                    self.declare(state, &n, sp)?;
                    state.spec.symbols.deps.push(name(&n));
                }
            }
            "small" => {
                let (n, sp) = self.ident("the small parameter name")?;
                if state.spec.symbols.small.is_some() {
                    return Err(Diagnostic::error(sp, "only one small parameter may be declared"));
                }
                self.declare(state, &n, sp)?;
                state.spec.symbols.small = Some(name(&n));
                if self.at_ident("order") {
                    self.bump();
                    let k = self.small_int("perturbation order")?;
                    state.small_order = Some(k);
                }
            }
            "func" => {
                while !self.at_statement_end() {
                    let (n, sp) = self.ident("a function name")?;
                    self.expect(Tok::LParen)?;
                    let mut args = Vec::new();
                    loop {
                        let (a, asp) = self.ident("an argument variable")?;
                        if !matches!(self.symbols.kind(&a), Some(SymbolKind::Indep) | Some(SymbolKind::Dep)) {
                            return Err(Diagnostic::error(asp, format!("`{a}` is not a declared variable"))
                                .with_hint("function arguments are independent or dependent variables declared earlier"));
                        }
                        args.push(name(&a));
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                    self.declare(state, &n, sp)?;
                    state.spec.symbols.funcs.push(FuncSig { name: name(&n), args });
                    self.symbols = state.spec.symbols.clone();
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    }
                }
            }
            "include" => {
                let t = self.bump();
                let path = match t.tok {
                    Tok::Str(s) => s,
                    other => {
                        return Err(Diagnostic::error(
                            self.span(t.start, t.end),
                            format!("expected a quoted path, found {}", other.describe()),
                        ))
                    }
                };
                let sp = self.span(kw_tok.start, t.end);
                if depth >= MAX_INCLUDE_DEPTH {
                    return Err(Diagnostic::error(sp, "includes nested too deeply"));
                }
                let text = resolver(&path).map_err(|e| Diagnostic::error(sp, format!("cannot include `{path}`: {e}")))?;
                let mut inner = Vec::new();
                parse_into(&text, state, resolver, depth + 1, &mut inner);
                for d in inner {
                    diags.push(Diagnostic {
                        span: sp,
                        message: format!("in `{path}` at {}:{}: {}", d.span.line, d.span.col_start, d.message),
                        ..d
                    });
                }
            }
            "let" => {
                let b = self.binding()?;
                state.spec.lets.push(b);
            }
            "eq" => {
                let (n, sp) = self.item_name()?;
                let lhs = self.expr()?;
                self.expect(Tok::Eq)?;
                let rhs = self.expr()?;
                self.end_statement()?;
                if state.spec.equation(&n).is_some() {
                    return Err(Diagnostic::error(sp, format!("duplicate equation `{n}`")));
                }
                let value = if rhs.expr.is_num_zero() { lhs.expr } else { lhs.expr - rhs.expr };
                state.spec.equations.push(Named { name: n, span: self.span(kw_tok.start, rhs.end), value });
            }
            "constraint" => {
                let (n, sp) = self.item_name()?;
                let lhs = self.expr()?;
                self.expect(Tok::Eq)?;
                let rhs = self.expr()?;
                self.end_statement()?;
                for s in [&lhs, &rhs] {
                    if s.expr.any(&|e| matches!(e.node(), Node::Jet(_))) {
                        return Err(Diagnostic::error(
                            self.span(s.start, s.end),
                            "constraints relate unknown functions and parameters only",
                        ));
                    }
                }
                if state.spec.constraint(&n).is_some() {
                    return Err(Diagnostic::error(sp, format!("duplicate constraint `{n}`")));
                }
                let value = if rhs.expr.is_num_zero() { lhs.expr } else { lhs.expr - rhs.expr };
                state.spec.constraints.push(Named { name: n, span: self.span(kw_tok.start, rhs.end), value });
            }
            "gen" => {
                let (n, sp) = self.item_name()?;
                let g = self.generator_body()?;
                if state.spec.generator(&n).is_some() {
                    return Err(Diagnostic::error(sp, format!("duplicate generator `{n}`")));
                }
                let end = self.toks[self.pos.saturating_sub(1)].end;
                state.spec.generators.push(Named { name: n, span: self.span(kw_tok.start, end), value: g });
            }
            "sol" => {
                let (n, sp) = self.item_name()?;
                let s = self.solution_body()?;
                if state.spec.solution(&n).is_some() {
                    return Err(Diagnostic::error(sp, format!("duplicate solution `{n}`")));
                }
                let end = self.toks[self.pos.saturating_sub(1)].end;
                state.spec.solutions.push(Named { name: n, span: self.span(kw_tok.start, end), value: s });
            }
            _ => unreachable!("keyword list"),
        }
        Ok(())
    }

    fn end_statement(&self) -> PResult<()> {
        if self.at_statement_end() {
            Ok(())
        } else {
            Err(self.err_here(format!("unexpected {}", self.peek().describe()))
                .with_hint("each statement ends where the next keyword begins"))
        }
    }

    fn small_int(&mut self, what: &str) -> PResult<u32> {
        let t = self.bump();
        match &t.tok {
            Tok::Number(s) if s.chars().all(|c| c.is_ascii_digit()) => s
                .parse::<u32>()
                .ok()
                .filter(|k| *k <= 16)
                .ok_or_else(|| Diagnostic::error(self.span(t.start, t.end), format!("{what} out of range (0..=16)"))),
            other => Err(Diagnostic::error(
                self.span(t.start, t.end),
                format!("expected {what} (a non-negative integer), found {}", other.describe()),
            )),
        }
    }

    fn name_list(&mut self) -> PResult<Vec<(String, Span)>> {
        let mut out = Vec::new();
        while !self.at_statement_end() {
            out.push(self.ident("a name")?);
            if *self.peek() == Tok::Comma {
                self.bump();
            }
        }
        if out.is_empty() {
            return Err(self.err_here("expected at least one name"));
        }
        Ok(out)
    }

    fn declare(&mut self, state: &mut ModelState, n: &str, sp: Span) -> PResult<()> {
        if RESERVED.contains(&n) {
            return Err(Diagnostic::error(sp, format!("`{n}` is reserved")));
        }
        if state.spec.symbols.kind(n).is_some() {
            return Err(Diagnostic::error(sp, format!("`{n}` is already declared"))
                .with_hint("names must be unique across params, variables and functions"));
        }
        state.decl_spans.insert(n.to_string(), sp);
        Ok(())
    }

    fn item_name(&mut self) -> PResult<(String, Span)> {
        let r = self.ident("an item name")?;
        self.expect(Tok::Colon)?;
        Ok(r)
    }

    /// `NAME = expr` where NAME is a parameter or a declared function.
    fn binding(&mut self) -> PResult<Binding> {
        let (n, sp) = self.ident("a parameter or function name")?;
        self.expect(Tok::Eq)?;
        let v = self.expr()?;
        match self.symbols.kind(&n) {
            Some(SymbolKind::Param) => Ok(Binding::Param(name(&n), v.expr)),
            Some(SymbolKind::Func) => {
                let sig = self.symbols.func(&n).unwrap().clone();
                let allowed: Vec<Expr> = sig.args.iter().map(|a| self.symbols.arg_symbol(a)).collect();
                if v.expr.any(&|e| matches!(e.node(), Node::Jet(_)) && !allowed.contains(e)) {
                    return Err(Diagnostic::error(
                        self.span(v.start, v.end),
                        "a function closed form may only depend on its declared arguments",
                    ));
                }
                Ok(Binding::Func(FunctionDef { name: sig.name, order: None, params: allowed, body: v.expr }))
            }
            Some(SymbolKind::Small) => Err(Diagnostic::error(sp, "the small parameter cannot be bound")),
            Some(_) => Err(Diagnostic::error(sp, format!("`{n}` cannot be bound; only params and functions can"))),
            None => Err(Diagnostic::error(sp, format!("unknown symbol {n}"))),
        }
    }

    fn given(&mut self) -> PResult<Vec<Binding>> {
        let mut out = Vec::new();
        if self.at_ident("given") {
            self.bump();
            loop {
                out.push(self.binding()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        Ok(out)
    }

    fn generator_body(&mut self) -> PResult<GeneratorSource> {
        let mut orders: BTreeMap<u32, Components> = BTreeMap::new();
        let mut approximate = false;
        let mut current = 0;
        let mut any = false;
        loop {
            if self.at_statement_end() || self.at_ident("given") || self.at_ident("using") {
                break;
            }
            if *self.peek() == Tok::Comma {
                self.bump();
                continue;
            }
            if self.at_ident("order") {
                self.bump();
                current = self.small_int("an order")?;
                self.expect(Tok::Colon)?;
                approximate = true;
                orders.entry(current).or_default();
                continue;
            }
            let (kind, ksp) = self.ident("`xi[...]`, `eta[...]` or `order`")?;
            if kind != "xi" && kind != "eta" {
                return Err(Diagnostic::error(ksp, format!("expected `xi`, `eta` or `order`, found `{kind}`")));
            }
            self.expect(Tok::LBracket)?;
            let (target, tsp) = self.ident("a variable")?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Eq)?;
            let v = self.expr()?;
            let want = if kind == "xi" { SymbolKind::Indep } else { SymbolKind::Dep };
            if self.symbols.kind(&target) != Some(want) {
                let what = if kind == "xi" { "an independent" } else { "a dependent" };
                return Err(Diagnostic::error(tsp, format!("`{target}` is not {what} variable")));
            }
            if v.expr.any(&|e| matches!(e.node(), Node::Jet(j) if j.order() > 0)) {
                return Err(Diagnostic::error(
                    self.span(v.start, v.end),
                    "infinitesimals of a point generator may not depend on derivatives",
                ));
            }
            if let Some(eps) = &self.symbols.small {
                if v.expr.contains(&Expr::param(eps)) {
                    return Err(Diagnostic::error(
                        self.span(v.start, v.end),
                        format!("`{eps}` may not appear in infinitesimals"),
                    )
                    .with_hint("give per-order seeds in `order k:` blocks instead"));
                }
            }
            let comps = orders.entry(current).or_default();
            let slot = if kind == "xi" { &mut comps.xi } else { &mut comps.eta };
            if slot.insert(name(&target), v.expr).is_some() {
                return Err(Diagnostic::error(tsp, format!("duplicate component {kind}[{target}]")));
            }
            any = true;
        }
        if !any {
            return Err(self.err_here("generator has no components"));
        }
        let given = self.given()?;
        let mut using = Vec::new();
        if self.at_ident("using") {
            self.bump();
            loop {
                let (c, _) = self.ident("a constraint name")?;
                using.push(c);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.end_statement()?;
        Ok(GeneratorSource { orders, approximate, given, using })
    }

    fn solution_body(&mut self) -> PResult<SolutionSource> {
        let mut fields = BTreeMap::new();
        loop {
            let (dep, sp) = self.ident("a dependent variable")?;
            if self.symbols.kind(&dep) != Some(SymbolKind::Dep) {
                return Err(Diagnostic::error(sp, format!("`{dep}` is not a dependent variable")));
            }
            self.expect(Tok::Eq)?;
            let v = self.expr()?;
            if v.expr.any(&|e| matches!(e.node(), Node::Jet(_))) {
                return Err(Diagnostic::error(
                    self.span(v.start, v.end),
                    "a solution must be a closed form in the independent variables",
                ));
            }
            if fields.insert(name(&dep), v.expr).is_some() {
                return Err(Diagnostic::error(sp, format!("duplicate field `{dep}`")));
            }
            if *self.peek() == Tok::Comma && !matches!(self.peek_at(1), Tok::Ident(s) if s == "given") {
                self.bump();
                continue;
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            }
            break;
        }
        let given = self.given()?;
        self.end_statement()?;
        Ok(SolutionSource { fields, given })
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err_here("expression nested too deeply"));
        }
        Ok(())
    }

    fn small_sym(&self) -> Option<Expr> {
        self.symbols.small.as_ref().map(|s| Expr::param(s))
    }

    fn forbid_small(&self, s: &Spanned, ctx: &str) -> PResult<()> {
        if let Some(eps) = self.small_sym() {
            if s.expr.contains(&eps) {
                return Err(Diagnostic::error(
                    self.span(s.start, s.end),
                    format!("small parameter `{eps}` appears non-polynomially ({ctx})"),
                )
                .with_hint("the perturbation scheme needs expressions polynomial in the small parameter"));
            }
        }
        Ok(())
    }

    fn expr(&mut self) -> PResult<Spanned> {
        self.enter()?;
        let first = self.term()?;
        let (start, mut end) = (first.start, first.end);
        let mut terms = vec![first.expr];
        loop {
            let neg = match self.peek() {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => break,
            };
            self.bump();
            let t = self.term()?;
            end = t.end;
            terms.push(if neg { -t.expr } else { t.expr });
        }
        self.depth -= 1;
        Ok(Spanned { expr: Expr::add(terms), start, end })
    }

    fn term(&mut self) -> PResult<Spanned> {
        let first = self.unary()?;
        let (start, mut end) = (first.start, first.end);
        let mut acc = first.expr;
        loop {
            let div = match self.peek() {
                Tok::Star => false,
                Tok::Slash => true,
                _ => break,
            };
            self.bump();
            let f = self.unary()?;
            end = f.end;
            if div {
                self.forbid_small(&f, "in a denominator")?;
                if f.expr.is_num_zero() {
                    return Err(Diagnostic::error(self.span(f.start, f.end), "division by zero"));
                }
                acc = acc * f.expr.recip();
            } else {
                acc = acc * f.expr;
            }
        }
        Ok(Spanned { expr: acc, start, end })
    }

    fn unary(&mut self) -> PResult<Spanned> {
        if *self.peek() == Tok::Minus {
            self.enter()?;
            let t = self.bump();
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Spanned { expr: -inner.expr, start: t.start, end: inner.end });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Spanned> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        self.enter()?;
        let exp = self.unary()?;
        self.depth -= 1;
        let q = match exp.expr.normalize().node() {
            Node::Num(q) => q.clone(),
            _ => {
                return Err(Diagnostic::error(self.span(exp.start, exp.end), "exponent must be a rational constant"))
            }
        };
        if q.abs() > Rational::from_integer(BigInt::from(MAX_EXPONENT)) {
            return Err(Diagnostic::error(
                self.span(exp.start, exp.end),
                format!("exponent magnitude exceeds {MAX_EXPONENT}"),
            ));
        }
        if !(q.is_integer() && !q.is_negative()) {
            self.forbid_small(&base, "under a negative or fractional power")?;
        }
        if base.expr.is_num_zero() && q.is_negative() {
            return Err(Diagnostic::error(self.span(base.start, exp.end), "division by zero"));
        }
        Ok(Spanned { expr: base.expr.pow(q), start: base.start, end: exp.end })
    }

    fn number(&self, s: &str, sp: Span) -> PResult<Rational> {
        let (int_part, frac_part) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        let digits = format!("{int_part}{frac_part}");
        let digits = if digits.is_empty() { "0".to_string() } else { digits };
        let n: BigInt = digits.parse().map_err(|_| Diagnostic::error(sp, format!("malformed number `{s}`")))?;
        let d = num_traits::pow(BigInt::from(10), frac_part.len());
        Ok(Rational::new(n, d))
    }

    fn args(&mut self) -> PResult<(Vec<Spanned>, usize)> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                out.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        let close = self.expect(Tok::RParen)?;
        Ok((out, close.end))
    }

    fn primary(&mut self) -> PResult<Spanned> {
        self.enter()?;
        let r = self.primary_inner();
        self.depth -= 1;
        r
    }

    fn primary_inner(&mut self) -> PResult<Spanned> {
        let t = self.cur().clone();
        match &t.tok {
            Tok::Number(s) => {
                self.bump();
                let q = self.number(s, self.span(t.start, t.end))?;
                Ok(Spanned { expr: Expr::num(q), start: t.start, end: t.end })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen)?;
                Ok(Spanned { expr: inner.expr, start: t.start, end: close.end })
            }
            Tok::Ident(id) if !is_keyword(&t.tok) => {
                self.bump();
                let id = id.clone();
                let sp = self.span(t.start, t.end);
                match id.as_str() {
                    "D" => self.derivative(t.start),
                    "exp" | "sin" | "cos" | "sqrt" | "dawson" => {
                        let (args, end) = self.args()?;
                        if args.len() != 1 {
                            return Err(Diagnostic::error(
                                self.span(t.start, end),
                                format!("`{id}` takes 1 argument, got {}", args.len()),
                            ));
                        }
                        let a = &args[0];
                        let e = match id.as_str() {
                            "sqrt" => {
                                self.forbid_small(a, "under a square root")?;
                                a.expr.sqrt()
                            }
                            _ => {
                                self.forbid_small(a, &format!("inside `{id}`"))?;
                                match id.as_str() {
                                    "exp" => a.expr.exp(),
                                    "sin" => a.expr.sin(),
                                    "cos" => a.expr.cos(),
                                    _ => a.expr.dawson(),
                                }
                            }
                        };
                        Ok(Spanned { expr: e, start: t.start, end })
                    }
                    _ => match self.symbols.kind(&id) {
                        Some(SymbolKind::Param) | Some(SymbolKind::Small) => {
                            Ok(Spanned { expr: Expr::param(&id), start: t.start, end: t.end })
                        }
                        Some(SymbolKind::Indep) => Ok(Spanned { expr: Expr::var(&id), start: t.start, end: t.end }),
                        Some(SymbolKind::Dep) => Ok(Spanned { expr: Expr::jet(&id, &[]), start: t.start, end: t.end }),
                        Some(SymbolKind::Func) => self.func_ref(&id, t.start),
                        None => Err(Diagnostic::error(sp, format!("unknown symbol {id}"))
                            .with_hint("declare it with params, indep, dep or func")),
                    },
                }
            }
            other => Err(self.err_here(format!("expected an expression, found {}", other.describe()))),
        }
    }

    fn func_ref(&mut self, id: &str, start: usize) -> PResult<Spanned> {
        let sig = self.symbols.func(id).unwrap().clone();
        let mut end = self.toks[self.pos - 1].end;
        let mut derivs = vec![0u32; sig.args.len()];
        let mut primes = 0u32;
        while *self.peek() == Tok::Prime {
            end = self.bump().end;
            primes += 1;
        }
        if primes > 0 {
            if sig.args.len() != 1 {
                return Err(Diagnostic::error(
                    self.span(start, end),
                    format!("primes need a one-argument function; write {id}[...] for `{id}`"),
                ));
            }
            derivs[0] = primes;
        }
        if *self.peek() == Tok::LBracket {
            if primes > 0 {
                return Err(self.err_here("use either primes or a derivative index, not both"));
            }
            self.bump();
            let mut counts = Vec::new();
            loop {
                counts.push(self.small_int("a derivative count")?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            end = self.expect(Tok::RBracket)?.end;
            if counts.len() != sig.args.len() {
                return Err(Diagnostic::error(
                    self.span(start, end),
                    format!("`{id}` has {} arguments but {} derivative counts were given", sig.args.len(), counts.len()),
                ));
            }
            derivs = counts;
        }
        let args: Vec<Expr> = if *self.peek() == Tok::LParen {
            let (args, close) = self.args()?;
            if args.len() != sig.args.len() {
                return Err(Diagnostic::error(
                    self.span(start, close),
                    format!("`{id}` takes {} arguments, got {}", sig.args.len(), args.len()),
                ));
            }
            for a in &args {
                self.forbid_small(a, &format!("inside `{id}`"))?;
            }
            end = close;
            args.into_iter().map(|s| s.expr).collect()
        } else {
            sig.args.iter().map(|a| self.symbols.arg_symbol(a)).collect()
        };
        let app = FuncApp { name: sig.name.clone(), order: None, derivs, args };
        Ok(Spanned { expr: Expr::from_func(app), start, end })
    }

    fn derivative(&mut self, start: usize) -> PResult<Spanned> {
        self.expect(Tok::LParen)?;
        let body = self.expr()?;
        let mut e = body.expr;
        let mut count = 0;
        while *self.peek() == Tok::Comma {
            self.bump();
            let (v, sp) = self.ident("a differentiation variable")?;
            count += 1;
            if count > MAX_EXPONENT {
                return Err(Diagnostic::error(sp, "too many differentiation variables"));
            }
            e = match self.symbols.kind(&v) {
                Some(SymbolKind::Indep) => crate::jet::total_derivative_raw(&e, &name(&v)),
                Some(SymbolKind::Dep) => crate::expr::diff_raw(&e, &Expr::jet(&v, &[])).expect("symbol"),
                Some(SymbolKind::Param) | Some(SymbolKind::Small) => {
                    crate::expr::diff_raw(&e, &Expr::param(&v)).expect("symbol")
                }
                Some(SymbolKind::Func) => {
                    return Err(Diagnostic::error(sp, format!("cannot differentiate with respect to function `{v}`")))
                }
                None => {
                    return Err(Diagnostic::error(sp, format!("unknown symbol {v}"))
                        .with_hint("declare it with indep, dep or params"))
                }
            };
        }
        if count == 0 {
            return Err(self.err_here("D(expr, var, ...) needs at least one variable"));
        }
        let close = self.expect(Tok::RParen)?;
        Ok(Spanned { expr: e, start, end: close.end })
    }
}

/// Exact rational from a decimal string, for flags like `--set alpha=0.4`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let q = if let Some((a, b)) = body.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Rational::new(n, d)
    } else {
        let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
        if ip.is_empty() && fp.is_empty() {
            return None;
        }
        if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{ip}{fp}");
        let n: BigInt = digits.parse().ok()?;
        Rational::new(n, num_traits::pow(BigInt::from(10), fp.len()))
    };
    Some(if neg { -q } else { q })
}
