mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::merge;
use error::{CliError, CliResult};

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else {
        return Ok(());
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    let file = cli.config.as_deref();
    let out = cli.out.as_deref();
    match cli.command {
        Command::Sample(a) => commands::sample(merge(a, file)?, out),
        Command::Bound(a) => commands::bound(merge(a, file)?, out),
        Command::Plan(a) => commands::plan(merge(a, file)?, out),
        Command::Couple(a) => commands::couple(merge(a, file)?, out),
        Command::Estimate(a) => commands::estimate(merge(a, file)?, out),
        Command::U4plot(a) => commands::u4plot(merge(a, file)?, out),
        Command::Bench(a) => commands::bench(merge(a, file)?, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
