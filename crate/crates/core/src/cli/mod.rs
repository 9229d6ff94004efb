//! Command-line front end. Pass/fail decisions live here; the library only
//! reports numbers.

pub mod args;
pub mod commands;
pub mod output;
pub mod suite;

use std::process::ExitCode;

use clap::Parser;

use crate::Error;
use args::{Cli, Command};
use output::{write_files, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] Error),
}

/// Exit status: 0 pass, 1 failed check, 2 usage error, 3 numerical failure.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const FAIL: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
}

fn engine_code(e: &Error) -> u8 {
    match e {
        Error::Mode { source, .. } => engine_code(source),
        Error::Convergence { .. } | Error::Eigen(_) | Error::Factorization { .. } => {
            exit::NUMERICAL
        }
        _ => exit::USAGE,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Engine(e) => engine_code(e),
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::PASS
            });
        }
    };
    if let Some(n) = output::thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let g = &cli.global;
    let (rendered, csv_default) = match &cli.command {
        Command::Verify(a) => (
            commands::verify(a, g, &RunManifest::new("verify", a, g))?,
            false,
        ),
        Command::Sharp(a) => (commands::sharp(a, &RunManifest::new("sharp", a, g))?, false),
        Command::Region(a) => (
            commands::region(a, &RunManifest::new("region", a, g))?,
            true,
        ),
        Command::Extremize(a) => (
            commands::extremize(a, g, &RunManifest::new("extremize", a, g))?,
            true,
        ),
        Command::Xcheck(a) => (
            commands::xcheck(a, &RunManifest::new("xcheck", a, g))?,
            true,
        ),
        Command::Suite => (suite::suite(g, &RunManifest::new("suite", &(), g))?, true),
    };
    let csv = if g.json { false } else { g.csv || csv_default };
    print!("{}", if csv { &rendered.csv } else { &rendered.json });
    if let Some(dir) = &g.out {
        write_files(dir, &rendered.files)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", dir.display())))?;
    }
    Ok(if rendered.pass {
        exit::PASS
    } else {
        exit::FAIL
    })
}
