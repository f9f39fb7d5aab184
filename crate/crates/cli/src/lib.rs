//! Command-line front end: record formats, run manifests and the command
//! dispatcher behind the `gammabt` binary.

mod commands;
pub mod manifest;
pub mod records;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

pub use commands::{dispatch, Cli, Command};

/// Parses `args` (program name first) and runs the command. Usage errors
/// exit with 2, failures with 1 after a one-line diagnostic.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let rest: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(&cli, &rest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gammabt: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
