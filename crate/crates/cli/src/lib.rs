//! Command-line front end: synthesize data, run any decomposition variant,
//! execute parameter sweeps and check the compression identities.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or inconsistent inputs,
//! 3 numerical failure (rank, convergence, sparse recovery), 4 a noiseless
//! identity failed verification.

mod args;
mod failure;
pub mod model_io;
mod output;
mod run;
mod sweep;
mod synth;
pub mod truth;
mod verify;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use failure::{Failure, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CDMDC_OUT_DIR";

/// Parse `args` and execute the command, returning the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        args::Command::Synth(a) => synth::cmd_synth(&a),
        args::Command::Run(a) => run::cmd_run(&a),
        args::Command::Sweep(a) => sweep::cmd_sweep(&a),
        args::Command::Verify(a) => verify::cmd_verify(&a),
    }
}
