//! `st-ribsupp`: rib shadow suppression from the command line.

mod config;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match run::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = run::classify(&e);
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}
