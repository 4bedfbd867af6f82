mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use earsym::ErrorKind;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Computation => 3,
            })
        }
    }
}
