mod args;
mod commands;

use std::fs;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command, ConfigFile, Layer};

/// Bad flags or input files.
const EXIT_INPUT: u8 = 2;
/// The computation itself could not proceed.
const EXIT_DOMAIN: u8 = 3;

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let config: ConfigFile = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Dataset(a) => commands::dataset(a.or(config.dataset)),
        Command::Train(a) => commands::train(a.or(config.train)),
        Command::Explain(a) => commands::explain(a.or(config.explain)),
        Command::Eval(a) => commands::eval(a.or(config.eval)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let domain = err
                .downcast_ref::<graphsvx::Error>()
                .is_some_and(|e| !e.is_input_error());
            ExitCode::from(if domain { EXIT_DOMAIN } else { EXIT_INPUT })
        }
    }
}
