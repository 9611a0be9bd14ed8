use std::process::ExitCode;

use clap::Parser;
use gainloss::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let code = match cli::run(args, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gainloss: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
