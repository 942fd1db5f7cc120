//! `tinstitch`: tiled style transfer and its diagnostics.
//!
//! Exit codes: 0 success, 1 seam check failed, 2 usage or file error,
//! 3 configuration hazard (invalid tiling parameters, plain normalization in
//! patch mode).

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use tinstitch_core::alloc::CountingAlloc;
use tinstitch_core::Error;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

pub const EXIT_CHECK: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_HAZARD: u8 = 3;

/// Configuration hazards exit 3, failed checks 1, everything else 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<commands::SeamFailure>() {
        return EXIT_CHECK;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InconsistentNorm { .. }) => EXIT_HAZARD,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
