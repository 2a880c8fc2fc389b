use std::process::ExitCode;

use clap::Parser;
use pdcshape::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match pdcshape::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdcshape: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
