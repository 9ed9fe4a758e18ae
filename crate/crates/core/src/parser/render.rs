//! Plain-text and LaTeX printers. Plain output is valid `.sym` expression
//! syntax and reparses to an expression with the same canonical form.

use num_traits::{One, Signed};

use crate::expr::{Expr, FuncApp, Jet, Node, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Plain,
    Latex,
}

pub fn render(e: &Expr, format: Format) -> String {
    match format {
        Format::Plain => render_plain(e),
        Format::Latex => render_latex(e),
    }
}

pub fn render_plain(e: &Expr) -> String {
    Plain.sum(e)
}

pub fn render_latex(e: &Expr) -> String {
    Latex.sum(e)
}

/// A standalone LaTeX document with one displayed equation per entry.
pub fn latex_document(lines: &[(String, Expr)]) -> String {
    let mut s = String::from("\\documentclass{article}\n\\usepackage{amsmath}\n\\begin{document}\n");
    for (label, e) in lines {
        s.push_str(&format!(
            "\\noindent\\texttt{{{}}}\n\\begin{{equation*}}\n{} = 0\n\\end{{equation*}}\n",
            latex_escape_text(label),
            render_latex(e)
        ));
    }
    s.push_str("\\end{document}\n");
    s
}

fn latex_escape_text(s: &str) -> String {
    s.replace('\\', "\\textbackslash{}").replace('_', "\\_").replace('#', "\\#").replace('&', "\\&")
}

/// Split a product into (sign, |coefficient|, numerator factors,
/// denominator factors with positive exponents).
struct Product {
    negative: bool,
    coeff: Rational,
    num: Vec<Expr>,
    den: Vec<Expr>,
}

fn split_product(e: &Expr) -> Product {
    let factors: Vec<Expr> = match e.node() {
        Node::Mul(v) => v.clone(),
        _ => vec![e.clone()],
    };
    let mut coeff = Rational::one();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in factors {
        match f.node() {
            Node::Num(q) => coeff *= q,
            Node::Pow(b, q) if q.is_negative() => den.push(b.pow(-q.clone())),
            _ => num.push(f),
        }
    }
    Product { negative: coeff.is_negative(), coeff: coeff.abs(), num, den }
}

fn is_negative_term(e: &Expr) -> bool {
    match e.node() {
        Node::Num(q) => q.is_negative(),
        Node::Mul(_) => split_product(e).negative,
        _ => false,
    }
}

fn negate_term(e: &Expr) -> Expr {
    match e.node() {
        Node::Num(q) => Expr::num(-q.clone()),
        Node::Mul(v) => {
            let mut out: Vec<Expr> = v.clone();
            if let Some(pos) = out.iter().position(|f| matches!(f.node(), Node::Num(_))) {
                let q = out[pos].as_num().unwrap().clone();
                out[pos] = Expr::num(-q);
                if out[pos].is_num_one() {
                    out.remove(pos);
                }
            }
            match out.len() {
                1 => out.pop().unwrap(),
                _ => Expr::new(Node::Mul(out)),
            }
        }
        _ => e.clone(),
    }
}

trait Printer {
    fn sum(&self, e: &Expr) -> String {
        match e.node() {
            Node::Add(v) => {
                let mut s = String::new();
                for (i, t) in v.iter().enumerate() {
                    let neg = is_negative_term(t);
                    let body = if neg { self.term(&negate_term(t)) } else { self.term(t) };
                    s.push_str(&self.join_sign(i == 0, neg));
                    s.push_str(&body);
                }
                s
            }
            _ => {
                if is_negative_term(e) {
                    format!("-{}", self.term(&negate_term(e)))
                } else {
                    self.term(e)
                }
            }
        }
    }

    fn join_sign(&self, first: bool, neg: bool) -> String;

    /// Render a non-negative term (product level).
    fn term(&self, e: &Expr) -> String;

    fn atom(&self, e: &Expr) -> String;
}

struct Plain;

impl Plain {
    fn factor(&self, e: &Expr) -> String {
        match e.node() {
            Node::Add(_) | Node::Mul(_) => format!("({})", self.sum(e)),
            Node::Num(q) if q.is_negative() || !q.is_integer() => format!("({})", rational(q)),
            Node::Pow(b, q) if q.is_negative() => format!("({})", self.pow(b, q)),
            Node::Pow(b, q) => self.pow(b, q),
            _ => self.atom(e),
        }
    }

    fn pow(&self, b: &Expr, q: &Rational) -> String {
        let base = match b.node() {
            Node::Param(_) | Node::Var(_) | Node::Jet(_) | Node::Func(_) | Node::Exp(_) => self.atom(b),
            Node::Sin(_) | Node::Cos(_) | Node::Dawson(_) => self.atom(b),
            Node::Num(n) if n.is_integer() && !n.is_negative() => rational(n),
            _ => format!("({})", self.sum(b)),
        };
        let exp = if q.is_integer() && q.is_positive() { rational(q) } else { format!("({})", rational(q)) };
        format!("{base}^{exp}")
    }
}

fn rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn jet_plain(j: &Jet) -> String {
    if j.index.order() == 0 {
        return j.dep.to_string();
    }
    let vars: Vec<String> = j.index.expanded().iter().map(|v| v.to_string()).collect();
    format!("D({},{})", j.dep, vars.join(","))
}

fn func_head_plain(f: &FuncApp) -> String {
    let mut s = f.name.to_string();
    if let Some(k) = f.order {
        s.push_str(&format!("_({k})"));
    }
    if f.derivs.iter().all(|d| *d == 0) {
        return s;
    }
    if f.args.len() == 1 && f.derivs[0] <= 3 {
        s.push_str(&"'".repeat(f.derivs[0] as usize));
    } else {
        let ds: Vec<String> = f.derivs.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!("[{}]", ds.join(",")));
    }
    s
}

impl Printer for Plain {
    fn join_sign(&self, first: bool, neg: bool) -> String {
        match (first, neg) {
            (true, true) => "-".into(),
            (true, false) => String::new(),
            (false, true) => " - ".into(),
            (false, false) => " + ".into(),
        }
    }

    fn term(&self, e: &Expr) -> String {
        match e.node() {
            Node::Mul(_) | Node::Pow(..) | Node::Num(_) => {}
            _ => return self.factor(e),
        }
        if let Node::Num(q) = e.node() {
            return rational(q);
        }
        let p = split_product(e);
        let mut num: Vec<String> = Vec::new();
        if !p.coeff.numer().is_one() || p.num.is_empty() {
            num.push(p.coeff.numer().to_string());
        }
        num.extend(p.num.iter().map(|f| self.factor(f)));
        let mut den: Vec<String> = Vec::new();
        if !p.coeff.denom().is_one() {
            den.push(p.coeff.denom().to_string());
        }
        den.extend(p.den.iter().map(|f| self.factor(f)));
        let mut s = num.join("*");
        match den.len() {
            0 => {}
            1 => s.push_str(&format!("/{}", den[0])),
            _ => s.push_str(&format!("/({})", den.join("*"))),
        }
        s
    }

    fn atom(&self, e: &Expr) -> String {
        match e.node() {
            Node::Num(q) => rational(q),
            Node::Param(n) | Node::Var(n) => n.to_string(),
            Node::Jet(j) => jet_plain(j),
            Node::Func(f) => {
                let args: Vec<String> = f.args.iter().map(|a| self.sum(a)).collect();
                format!("{}({})", func_head_plain(f), args.join(","))
            }
            Node::Exp(a) => format!("exp({})", self.sum(a)),
            Node::Sin(a) => format!("sin({})", self.sum(a)),
            Node::Cos(a) => format!("cos({})", self.sum(a)),
            Node::Dawson(a) => format!("dawson({})", self.sum(a)),
            _ => self.factor(e),
        }
    }
}

struct Latex;

const GREEK: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa", "lambda", "mu",
    "nu", "xi", "pi", "rho", "sigma", "tau", "phi", "chi", "psi", "omega", "Gamma", "Delta", "Theta",
    "Lambda", "Xi", "Pi", "Sigma", "Phi", "Psi", "Omega",
];

fn latex_name(n: &str) -> String {
    if n == "eps" || n == "epsilon" {
        return "\\varepsilon".into();
    }
    let split = n.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, digits) = n.split_at(split);
    let head = head.trim_end_matches('_');
    let base = if GREEK.contains(&head) {
        format!("\\{head}")
    } else if head.chars().count() > 1 {
        format!("\\mathrm{{{}}}", head.replace('_', "\\_"))
    } else {
        head.to_string()
    };
    if digits.is_empty() {
        base
    } else {
        format!("{base}_{{{digits}}}")
    }
}

fn latex_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", q.numer(), q.denom())
    }
}

impl Latex {
    fn factor(&self, e: &Expr) -> String {
        match e.node() {
            Node::Add(_) | Node::Mul(_) => format!("\\left({}\\right)", self.sum(e)),
            Node::Num(q) if q.is_negative() => format!("\\left({}\\right)", self.sum(e)),
            Node::Pow(b, q) => self.pow(b, q),
            _ => self.atom(e),
        }
    }

    fn pow(&self, b: &Expr, q: &Rational) -> String {
        if *q == Rational::new(1.into(), 2.into()) {
            return format!("\\sqrt{{{}}}", self.sum(b));
        }
        if q.is_negative() {
            return format!("\\frac{{1}}{{{}}}", self.pow(b, &-q.clone()));
        }
        let base = match b.node() {
            Node::Param(_) | Node::Var(_) | Node::Jet(_) | Node::Func(_) => self.atom(b),
            Node::Num(n) if n.is_integer() && !n.is_negative() => latex_rational(n),
            _ => format!("\\left({}\\right)", self.sum(b)),
        };
        if q.is_one() {
            return base;
        }
        format!("{base}^{{{}}}", latex_rational(q))
    }

    fn join_factors(parts: &[String]) -> String {
        let mut s = String::new();
        for (i, p) in parts.iter().enumerate() {
            if i > 0 && !p.starts_with("\\left(") {
                s.push(' ');
            }
            s.push_str(p);
        }
        s
    }
}

impl Printer for Latex {
    fn join_sign(&self, first: bool, neg: bool) -> String {
        match (first, neg) {
            (_, true) => "-".into(),
            (true, false) => String::new(),
            (false, false) => "+".into(),
        }
    }

    fn term(&self, e: &Expr) -> String {
        match e.node() {
            Node::Mul(_) => {}
            Node::Num(q) => return latex_rational(q),
            _ => return self.factor(e),
        }
        let p = split_product(e);
        let mut num: Vec<String> = Vec::new();
        let has_den = !p.den.is_empty() || !p.coeff.denom().is_one();
        if !p.coeff.numer().is_one() || (p.num.is_empty() && has_den) {
            num.push(p.coeff.numer().to_string());
        }
        num.extend(p.num.iter().map(|f| self.factor(f)));
        if !has_den {
            return Latex::join_factors(&num);
        }
        let mut den: Vec<String> = Vec::new();
        if !p.coeff.denom().is_one() {
            den.push(p.coeff.denom().to_string());
        }
        den.extend(p.den.iter().map(|f| self.factor(f)));
        let n = if num.is_empty() { "1".to_string() } else { Latex::join_factors(&num) };
        format!("\\frac{{{}}}{{{}}}", n, Latex::join_factors(&den))
    }

    fn atom(&self, e: &Expr) -> String {
        match e.node() {
            Node::Num(q) => latex_rational(q),
            Node::Param(n) | Node::Var(n) => latex_name(n),
            Node::Jet(j) => {
                let base = latex_name(&j.dep);
                if j.index.order() == 0 {
                    return base;
                }
                let sub: String = j.index.expanded().iter().map(|v| latex_name(v)).collect();
                match base.find("_{") {
                    Some(i) => format!("{}_{{{},{}}}", &base[..i], &base[i + 2..base.len() - 1], sub),
                    None => format!("{base}_{{{sub}}}"),
                }
            }
            Node::Func(f) => {
                let mut head = latex_name(&f.name);
                if let Some(k) = f.order {
                    head = format!("{head}_{{({k})}}");
                }
                if f.derivs.iter().any(|d| *d > 0) {
                    if f.args.len() == 1 && f.derivs[0] <= 3 {
                        head.push_str(&"'".repeat(f.derivs[0] as usize));
                    } else {
                        let ds: Vec<String> = f.derivs.iter().map(|d| d.to_string()).collect();
                        head.push_str(&format!("^{{({})}}", ds.join(",")));
                    }
                }
                let args: Vec<String> = f.args.iter().map(|a| self.sum(a)).collect();
                format!("{head}\\left({}\\right)", args.join(","))
            }
            Node::Exp(a) => format!("e^{{{}}}", self.sum(a)),
            Node::Sin(a) => format!("\\sin\\left({}\\right)", self.sum(a)),
            Node::Cos(a) => format!("\\cos\\left({}\\right)", self.sum(a)),
            Node::Dawson(a) => format!("\\mathcal{{D}}\\left({}\\right)", self.sum(a)),
            _ => self.factor(e),
        }
    }
}
