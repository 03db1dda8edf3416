use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use fblearn_cli::{configure_threads, run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(&cli)).and_then(|out| match &cli.output {
        Some(path) => std::fs::write(path, out).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
