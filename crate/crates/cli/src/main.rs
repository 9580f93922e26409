use std::process::ExitCode;

use clap::Parser;
use cohere::{exit_code_for, run, Cli};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(&cli, args) {
        Ok(outcome) => {
            println!("{}", outcome.report.to_json());
            if !cli.flags.json {
                eprintln!("{}", outcome.summary);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
