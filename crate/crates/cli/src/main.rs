mod args;
mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Format};
use crate::commands::{Ctx, Output, Usage};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DOMAIN: u8 = 3;

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_DATA);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let ctx = Ctx::new(cli.format, cli.seed);
    let done = match commands::run(cli.command, &ctx) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.is::<Usage>() { EXIT_USAGE } else { EXIT_DATA };
            return ExitCode::from(code);
        }
    };
    let body = match done.output {
        Output::Raw(s) => s,
        Output::Report { json, text } => match ctx.format {
            Format::Text => text,
            Format::Json => serde_json::to_string_pretty(&json).expect("json value") + "\n",
        },
    };
    let mut out = std::io::stdout().lock();
    if out.write_all(body.as_bytes()).and_then(|_| out.flush()).is_err() {
        return ExitCode::from(EXIT_DATA);
    }
    match done.failure {
        Some(f) => {
            eprintln!("error: {f}");
            ExitCode::from(EXIT_DOMAIN)
        }
        None => ExitCode::SUCCESS,
    }
}
