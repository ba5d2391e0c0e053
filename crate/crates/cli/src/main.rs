mod args;
mod commands;
mod error;
mod latency;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(opts) => commands::run(&opts.resolve()?),
        Command::Sweep(opts) => commands::sweep(&opts.resolve()?),
        Command::Compare(opts) => commands::compare(&opts.resolve()?),
        Command::GenTrace(opts) => commands::gen_trace(&opts.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too and are not failures.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adaptta: {e}");
            e.exit_code()
        }
    }
}
