//! `skillink` — the pipeline entry point: KB validation, alignment-based
//! data synthesis, encoder training, token-model fitting, entity linking
//! with four engines, evaluation, and multi-seed sweeps.
//!
//! Exit codes: 0 success, 1 validation error (flags or input contents),
//! 2 runtime failure (I/O, numeric aborts).

mod args;
mod commands;
mod error;
mod manifest;
mod rankings;

use clap::Parser;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(parse_error) => {
            // --help/--version print to stdout and succeed; usage mistakes
            // are validation errors
            let code = if parse_error.use_stderr() { 1 } else { 0 };
            let _ = parse_error.print();
            std::process::exit(code);
        }
    };
    if let Err(error) = commands::run(cli) {
        eprintln!("error: {error}");
        std::process::exit(i32::from(error.exit_code()));
    }
}
