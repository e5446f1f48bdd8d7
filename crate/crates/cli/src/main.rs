mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

/// Exit status: 0 all checks passed, 1 a check failed, 2 usage or
/// precondition error, 3 computation error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

impl From<qorth::Error> for CliError {
    fn from(e: qorth::Error) -> Self {
        match e {
            qorth::Error::InvalidParameter(_) | qorth::Error::IncompatiblePair(_) => CliError::Usage(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    match config::RunConfig::resolve(cli).and_then(|cfg| commands::run(&cfg)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
