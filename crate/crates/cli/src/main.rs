mod args;
mod cmd;
mod config;
mod exit;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::exit::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build()
        .map_err(|e| CliError::validation(anyhow::anyhow!("cannot start {} worker threads: {e}", cli.global.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Extract(a) => cmd::extract::run(a, &cli.global),
        Command::Synth(a) => cmd::synth::run(a, &cli.global),
        Command::Roundtrip(a) => cmd::roundtrip::run(a, &cli.global),
        Command::Eval(a) => cmd::eval::run(a, &cli.global),
        Command::Geo(a) => cmd::geo::run(a, &cli.global),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(v) => v,
        Err(e) => return e.report(),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::VALIDATION } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => e.report(),
    }
}
