mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use s3pl::Error;

use crate::args::Cli;

/// 2 configuration, 3 unreadable or unwritable files, 4 inputs that do not fit together.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Bounds { .. } => 2,
        Error::Compatibility(_) | Error::Shape(_) => 4,
        _ => 3,
    }
}

fn hint(e: &Error) -> &'static str {
    match exit_code(e) {
        2 => "check the flags and the config file; `s3pl <command> --help` lists valid values",
        4 => "the dataset, mask and checkpoint must share one pixel grid and m/z axis; retrain on this dataset if the axis changed",
        _ => match e {
            Error::Io { .. } => "check that the path exists and is accessible; output directories must exist beforehand",
            _ => "the input file could not be decoded; see the message above",
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let argv = std::env::args().skip(1).collect();
    match commands::run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("hint: {}", hint(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
