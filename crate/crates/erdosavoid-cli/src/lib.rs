//! `erdosavoid` command line: construct, certify, probe and report.
//!
//! Exit codes: 0 when every requested item was certified, 2 when
//! inconclusive items remain (outputs are still written), 1 on bad
//! configuration or any other error.

pub mod args;
pub mod commands;
pub mod output;
pub mod report;
pub mod sweep;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};

/// Caps the rayon pool at `ERDOSAVOID_WORKERS` threads when set.
fn init_workers() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("ERDOSAVOID_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("ERDOSAVOID_WORKERS must be a positive integer, got {v:?}"))?;
    // a second call in the same process (tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: &Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Construct(a) => commands::construct(a),
        Command::Certify(a) => commands::certify(a),
        Command::Probe(a) => commands::probe(a),
        Command::Report(a) => report::report(a),
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match args::merged_args(&argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match init_workers().and_then(|_| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
