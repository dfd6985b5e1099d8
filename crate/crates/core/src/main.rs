use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = entswitch::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match entswitch::cli::run(&cli, &mut stdout) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
