use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = lesionseg_cli::Cli::parse();
    match lesionseg_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // one line, the whole cause chain
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
