use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = dpc_cli::Cli::parse();
    ExitCode::from(dpc_cli::execute(&cli))
}
