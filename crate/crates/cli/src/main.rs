//! `probekit`: train probes, estimate V-information, score attention heads.

mod args;
mod commands;
mod data;
mod svg;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(probekit::Error),
}

impl From<probekit::Error> for Failure {
    fn from(e: probekit::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(probekit::Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Core(probekit::Error::Config(_)) => 2,
            Failure::Core(e) if e.is_numeric() => 4,
            Failure::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

const THREADS_VAR: &str = "PROBEKIT_THREADS";

fn configure_threads() -> CmdResult {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Failure::Usage(format!("{THREADS_VAR} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, _) => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = configure_threads().and_then(|()| match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Info(a) => commands::info(a),
        Command::Heads(a) => commands::heads(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Plotdata(a) => commands::plotdata(a),
        Command::Synth(a) => commands::synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("probekit: {e}");
            ExitCode::from(e.code())
        }
    }
}
