//! `roughpath` command-line tool.

mod args;
mod commands;
mod config;
mod plot;

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(commands::run(std::env::args_os()))
}
