mod args;
mod commands;
mod config;
mod error;
mod input;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use error::CliError;

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            // a closed pipe is not worth an error exit
            let _ = out.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (text, output) = match &cli.command {
        Command::Separate(a) => (commands::separate(a)?, a.common.output.as_deref()),
        Command::Profile(a) => (commands::profile(a)?, a.common.output.as_deref()),
        Command::Mmf(a) => (commands::mmf(a)?, a.common.output.as_deref()),
        Command::Experiment(a) => (commands::experiment(a)?, a.common.output.as_deref()),
        Command::Gen(a) => (commands::gen(a)?, a.common.output.as_deref()),
    };
    emit(output, &text)
}

fn main() -> ExitCode {
    let command = Cli::command();
    let argv = match config::expand(std::env::args_os().collect(), &command) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match command
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        // clap exits with 2 on usage errors and 0 for --help/--version
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
