//! The `x2static` command-line tool.
//!
//! Every subcommand that writes an artifact also writes
//! `<artifact>.manifest.json` with the resolved configuration. Exit status
//! is 0 on success, 1 on usage errors and 2 on data or format errors.

pub mod args;
mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::ConfigFile;
pub use crate::error::CliError;
pub use crate::manifest::{manifest_path, RunManifest};

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit status. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match try_run(&argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn try_run(argv: &[OsString]) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    Ok(())
                }
                _ => Err(CliError::Usage(e.render().to_string().trim_start_matches("error: ").trim_end().to_string())),
            };
        }
    };
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(a, &file, argv),
        Command::Vocab(a) => commands::vocab(a, &file, argv),
        Command::Synth(a) => commands::synth(a, argv),
        Command::MockTeacher(a) => commands::mock_teacher(a, argv),
        Command::Train(a) => commands::train(a, &file, argv),
        Command::Ase(a) => commands::ase(a, argv),
        Command::EvalSim(a) => commands::eval_sim(a, argv),
        Command::Nn(a) => commands::nn(a),
        Command::Sweep(a) => commands::run_sweep(a, &file, argv),
        Command::Replay(a) => try_run(&commands::replay_argv(&a)?),
    }
}
