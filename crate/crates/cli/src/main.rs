use std::process::ExitCode;

use clap::Parser;
use taforge_api::ApiError;
use taforge_cli::{execute, Cli};

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let e = ApiError::from(e);
            eprintln!("error[{}]: {}", e.machine_code, e.message);
            ExitCode::FAILURE
        }
    }
}
