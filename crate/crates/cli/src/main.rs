//! `estimate`: Langevin ensemble estimates of AVaR, VaR and EVaR.
//!
//! ```bash
//! estimate avar --gaussian mu=0,sigma=1 --level 0.95 --preset desk --out run1 --svg
//! estimate evar --gaussian mu=1,sigma=1.41421356 --atoms 100 --partitions 50 --preset desk
//! estimate bound -M 100 --horizon-t 1 --lambda 1e8 --epsilon 0.01 -N 5000
//! estimate replay run1/manifest.json --out run1-again
//! ```
//!
//! `RISKGRAD_THREADS` caps the worker pool. Exit codes: 0 ok, 2 invalid
//! configuration, 3 divergence, 4 I/O or input data.

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod output;

use args::Cli;
use commands::{dispatch, Invocation};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Divergence(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Divergence(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Divergence(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "input/output error: {m}"),
        }
    }
}

impl From<riskgrad::Error> for Failure {
    fn from(e: riskgrad::Error) -> Self {
        use riskgrad::Error as E;
        let msg = e.to_string();
        match e {
            E::Divergence { .. } => Failure::Divergence(msg),
            E::Io(_) | E::Csv(_) | E::Parse { .. } | E::MissingValue { .. } | E::EmptyTable => {
                Failure::Io(msg)
            }
            _ => Failure::Config(msg),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("RISKGRAD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Failure::Config(format!(
                "RISKGRAD_THREADS={value} is not a positive integer"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = init_threads().and_then(|()| dispatch(&cli.command, &Invocation::new(argv)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
