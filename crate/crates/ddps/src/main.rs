use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = ddps::cli::Cli::parse();
    let stdout = std::io::stdout();
    match ddps::cli::run(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
