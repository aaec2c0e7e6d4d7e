//! Command-line driver: sample, correct, evaluate, stats, agree, report.

pub mod args;
pub mod commands;
pub mod config;
pub mod exit;
pub mod manifest;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

/// Parse `argv`, run the command and return the process exit code.
/// `env` supplies `FAIRIFY_*` configuration variables.
pub fn run_with_env<I, T>(argv: I, env: &dyn Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("FAIRIFY_LOG")
        .format_timestamp(None)
        .try_init();
    match commands::execute(cli, env) {
        Ok(()) => exit::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(argv, &|k| std::env::var(k).ok())
}
