use std::process::ExitCode;

use clap::Parser;
use umlm_cli::{execute, Cli, CliError};

fn run(cli: &Cli) -> anyhow::Result<()> {
    let summary = execute(cli)?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = match e.downcast_ref::<CliError>() {
                Some(c) => (c.category(), c.exit_code()),
                None => ("internal", 1),
            };
            let line = serde_json::json!({ "category": category, "error": format!("{e:#}") });
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
