//! `approxsym` command-line front-end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 parse or usage error,
//! 3 internal error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{write_output, CliError};

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var("APPROXSYM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("APPROXSYM_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = threads()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let (outcome, out) = match &cli.command {
        Command::Parse(a) => (commands::cmd_parse(a)?, &a.output),
        Command::Verify(a) => (commands::cmd_verify(a)?, &a.output),
        Command::Determining(a) => (commands::cmd_determining(a)?, &a.output),
        Command::Scan(a) => (commands::cmd_scan(a)?, &a.output),
        Command::Render(a) => (commands::cmd_render(a)?, &a.output),
    };
    write_output(&outcome.text, out.out.as_deref())?;
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(1),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
