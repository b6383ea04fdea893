use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = stmado_cli::Cli::parse();
    match stmado_cli::run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
