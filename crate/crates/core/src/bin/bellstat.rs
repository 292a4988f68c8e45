use std::process::ExitCode;

use bellstat::cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("bellstat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
