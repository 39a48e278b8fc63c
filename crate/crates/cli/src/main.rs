use std::process::ExitCode;

use clap::Parser;
use hemadyn_cli::error::CliError;
use hemadyn_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(manifest) => {
            for c in &manifest.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = manifest.failed_checks();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                let err = CliError::ChecksFailed(failed);
                eprintln!("error: {err}");
                ExitCode::from(err.exit_code())
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
