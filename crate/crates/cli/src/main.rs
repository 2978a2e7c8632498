mod args;
mod commands;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let quiet = cli.quiet;
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, quiet),
        Command::Fit(a) => commands::fit(a, quiet),
        Command::Diagnose(a) => commands::diagnose(a, quiet),
        Command::Forecast(a) => commands::forecast(a, quiet),
        Command::Compare(a) => commands::compare(a, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
