use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "approxsym", version, about = "Approximate Lie and Q-conditional symmetry analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a model and print its canonical equations and items.
    Parse(ParseArgs),
    /// Verify generators and solutions of a model.
    Verify(VerifyArgs),
    /// Emit the determining system of a generator ansatz.
    Determining(DeterminingArgs),
    /// Residual-order scan of a solution on a grid (CSV).
    Scan(ScanArgs),
    /// Render model equations or a single expression.
    Render(RenderArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Plain,
    Latex,
    Report,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write output to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prefix the output with a generation timestamp.
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "plain")]
    pub format: OutFormat,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SymmetryOpts {
    /// Number of invariant surface conditions, taken from the first q
    /// dependent variables. Defaults to 0, classical invariance.
    #[arg(long)]
    pub q: Option<usize>,
    /// 1-based dependent-variable indices whose surface conditions are used.
    #[arg(long, value_delimiter = ',')]
    pub select: Vec<usize>,
    /// Independent variable whose xi is normalized to 1.
    #[arg(long)]
    pub case: Option<String>,
    /// Perturbation order (overrides the model's `small ... order`).
    #[arg(long)]
    pub p: Option<u32>,
    /// Parameter value or function closed form, `name=expr`; applied before
    /// the item's `given` bindings. Repeatable.
    #[arg(long = "set", value_name = "NAME=EXPR")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Generator to verify. Repeatable.
    #[arg(long = "gen")]
    pub gens: Vec<String>,
    /// Solution to verify. Repeatable.
    #[arg(long = "sol")]
    pub sols: Vec<String>,
    /// Verify every generator and solution of the model.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub sym: SymmetryOpts,
    /// Constraints to apply instead of the generator's `using` list.
    #[arg(long, value_delimiter = ',')]
    pub using: Option<Vec<String>>,
    /// Numeric parameter preset for numeric-only solutions.
    #[arg(long)]
    pub preset: Option<String>,
    /// Grid tolerance for numeric-only solutions.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub grid: GridOpts,
    #[arg(long, value_enum, default_value = "plain")]
    pub format: OutFormat,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DeterminingArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "gen")]
    pub gen: String,
    #[command(flatten)]
    pub sym: SymmetryOpts,
    #[arg(long, value_enum, default_value = "plain")]
    pub format: OutFormat,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Default)]
pub struct GridOpts {
    /// t-range `a:b`.
    #[arg(long)]
    pub t: Option<String>,
    /// x-range `a:b`.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nx: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Parameter preset: fig1, fig2, fig3 or dawson.
    #[arg(long)]
    pub preset: Option<String>,
    /// Model file; required without a preset.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Solution to scan; defaults to the preset's.
    #[arg(long)]
    pub sol: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub halvings: u32,
    /// Starting value of the small parameter.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Numeric parameter value `name=number`. Repeatable.
    #[arg(long = "set", value_name = "NAME=NUMBER")]
    pub set: Vec<String>,
    /// Scale the secular correction by 11/10 (negative control).
    #[arg(long)]
    pub corrupt: bool,
    /// Also write a `t x u` surface of the solution at the starting eps.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Expression to render in the model's symbol table instead of the
    /// equations.
    #[arg(long)]
    pub expr: Option<String>,
    #[arg(long, value_enum, default_value = "plain")]
    pub format: OutFormat,
    #[command(flatten)]
    pub output: Output,
}
