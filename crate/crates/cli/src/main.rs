//! `gfd` — fiducial distributions from data-generating equations.
//!
//! One subcommand per demonstration: `density`, `sample`, `bounds`,
//! `slp-demo`, `wcp-demo`, `slp-pair`, `coverage`, `fisher`. Every run
//! validates its full configuration before computing, computes into memory,
//! then writes the output files plus a JSON manifest (resolved config,
//! seed, worker count, version, output digests). Re-running a manifest'd
//! configuration reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod args;
mod commands;

use args::Cli;
use clap::Parser;

fn main() {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.exit_code);
        }
    }
}
