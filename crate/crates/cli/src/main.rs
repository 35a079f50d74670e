use std::process::ExitCode;

use clap::Parser;
use lambda2p_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lambda2p: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
