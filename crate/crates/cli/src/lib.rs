//! Command line driver for `sclqg-core`: argument and JSON config handling,
//! run directories with manifests, and the CSV/JSON formats read by the
//! plotting scripts.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod output;

pub use error::{CliError, Result};

use std::ffi::OsString;

use clap::Parser;

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&parsed) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
