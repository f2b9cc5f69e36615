//! `bgev` command-line tool.

mod args;
mod commands;
mod config;
mod io;

use std::ffi::OsString;
use std::fs;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::Serialize;

use args::{Cli, Command};
use commands::Ctx;

/// Invalid option values detected after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Serialize)]
struct Output {
    file: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'static str,
    argv: Vec<String>,
    seed: u64,
    options: serde_json::Value,
    outputs: Vec<Output>,
}

fn options_json(cmd: &Command) -> Result<serde_json::Value> {
    Ok(match cmd {
        Command::Fit(a) => serde_json::to_value(a)?,
        Command::Twostep(a) => serde_json::to_value(a)?,
        Command::Simulate(a) => serde_json::to_value(a)?,
        Command::Prior(a) => serde_json::to_value(a)?,
        Command::Score(a) => serde_json::to_value(a)?,
        Command::ReturnLevels(a) => serde_json::to_value(a)?,
    })
}

fn run(cli: &Cli, argv: &[OsString]) -> Result<()> {
    fs::create_dir_all(&cli.out).with_context(|| format!("cannot create {}", cli.out.display()))?;
    let mut ctx = Ctx {
        out: &cli.out,
        seed: cli.seed,
        plots: cli.plots,
        outputs: Vec::new(),
    };
    match &cli.command {
        Command::Fit(a) => commands::fit(a, &mut ctx)?,
        Command::Twostep(a) => commands::twostep(a, &mut ctx)?,
        Command::Simulate(a) => commands::simulate(a, &mut ctx)?,
        Command::Prior(a) => commands::prior(a, &mut ctx)?,
        Command::Score(a) => commands::score(a, &mut ctx)?,
        Command::ReturnLevels(a) => commands::return_levels(a, &mut ctx)?,
    }
    let outputs = ctx
        .outputs
        .iter()
        .map(|p| {
            let bytes = fs::metadata(p).map(|m| m.len()).unwrap_or(0);
            let file = p
                .file_name()
                .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
            println!("wrote {}", p.display());
            Output { file, bytes }
        })
        .collect();
    let manifest = Manifest {
        tool: "bgev",
        version: env!("CARGO_PKG_VERSION"),
        core_version: bgev_core::VERSION,
        command: cli.command.name(),
        argv: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        seed: cli.seed,
        options: options_json(&cli.command)?,
        outputs,
    };
    let path = cli.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
