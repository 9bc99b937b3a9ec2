mod args;
mod commands;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command, RunConfig};

enum Failure {
    Usage(String),
    Compute(anyhow::Error),
}

fn resolve(cli: Cli) -> Result<RunConfig, Failure> {
    let Cli { command, common } = cli;
    let Command::Rerun(r) = command else {
        return Ok(RunConfig { command, common });
    };
    let read = || -> Result<RunConfig> {
        let text = std::fs::read_to_string(&r.manifest)
            .with_context(|| format!("cannot read {}", r.manifest.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        if v["schema"] != output::SCHEMA {
            anyhow::bail!("{} is not a {} manifest", r.manifest.display(), output::SCHEMA);
        }
        Ok(serde_json::from_value(v["config"].clone())?)
    };
    let mut cfg = read().map_err(|e| Failure::Usage(format!("{e:#}")))?;
    cfg.common.out = common.out;
    cfg.common.threads = common.threads;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let cfg = resolve(cli)?;
    commands::validate(&cfg).map_err(Failure::Usage)?;
    if let Some(t) = cfg.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Compute(e.into()))?;
    }
    let artifacts = commands::execute(&cfg).map_err(Failure::Compute)?;
    for n in artifacts.notices() {
        eprintln!("notice: {n}");
    }
    let dir = cfg.common.out.as_deref().expect("validated");
    artifacts.commit(dir, &cfg).map_err(Failure::Compute)?;
    eprintln!(
        "{} finished in {:.2} s; outputs in {}",
        cfg.command.name(),
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
