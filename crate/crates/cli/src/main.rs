use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match ionsim_cli::main_with(ionsim_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
