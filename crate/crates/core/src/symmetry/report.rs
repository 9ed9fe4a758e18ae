//! Machine-readable verification reports (TOML).

use serde::Serialize;

use crate::parser::{render, Format};

use super::Residual;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub order: u32,
    pub equation: String,
    pub residual: String,
    pub vanishes: bool,
    /// Max-abs grid residual when the check is numeric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_max: Option<f64>,
}

impl ResidualEntry {
    pub fn symbolic(r: &Residual, format: Format) -> Self {
        let vanishes = r.vanishes();
        let shown = if vanishes { crate::expr::Expr::zero() } else { r.expr.clone() };
        ResidualEntry {
            order: r.order,
            equation: r.equation.clone(),
            residual: render(&shown, format),
            vanishes,
            numeric_max: None,
        }
    }
}

/// One verification run: a generator or a solution on a model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub model: String,
    pub kind: String,
    pub name: String,
    pub q: usize,
    pub selection: Vec<usize>,
    pub p: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    pub constraints: Vec<String>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub residuals: Vec<ResidualEntry>,
}

impl Report {
    pub fn verdict_of(entries: &[ResidualEntry]) -> Verdict {
        if entries.iter().all(|e| e.vanishes) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Several reports as one TOML document (`[[report]]` tables).
pub fn reports_to_toml(reports: &[Report]) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        report: &'a [Report],
    }
    toml::to_string(&Doc { report: reports }).expect("reports serialize")
}
