use std::process::ExitCode;

use clap::Parser;
use mdshrink_cli::{commands::execute, parse_threads, Cli, THREADS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result =
        parse_threads(std::env::var(THREADS_ENV).ok().as_deref()).and_then(|t| execute(&cli, t));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdshrink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
