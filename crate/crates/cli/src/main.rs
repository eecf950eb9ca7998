use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sttsim_cli::Cli::parse();
    match sttsim_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
