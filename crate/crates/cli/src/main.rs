//! `modsum`: run protocols, verifications, attacks, audits and sweeps, and
//! write reproducible JSON or CSV reports.
//!
//! Exit codes: 0 success, 2 verification failed, 1 error.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Outcome, Row};
use config::{FileOptions, Format, Params};

#[derive(Parser, Debug)]
#[command(name = "modsum", version, about = "Modular zero-sum randomness: protocols, verification and attacks")]
struct Cli {
    /// TOML file with default parameters; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for repeated runs and sweeps
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one protocol (or --repeat N independent runs)
    RunProtocol(Params),
    /// Run a verification test; exits 2 if it fails
    Verify(Params),
    /// Success probability of an attack, exact or Monte-Carlo
    Attack(Params),
    /// Exact mutual information between honest secrets and a colluding view
    Audit(Params),
    /// Repeat an experiment over values of one parameter
    Sweep(Params),
}

impl Command {
    fn split(self) -> (&'static str, Params) {
        match self {
            Command::RunProtocol(p) => ("run-protocol", p),
            Command::Verify(p) => ("verify", p),
            Command::Attack(p) => ("attack", p),
            Command::Audit(p) => ("audit", p),
            Command::Sweep(p) => ("sweep", p),
        }
    }
}

fn render_csv(rows: &[Row]) -> Result<String> {
    let mut header: Vec<&str> = Vec::new();
    for r in rows {
        for k in r.keys() {
            if !header.contains(&k.as_str()) {
                header.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(header.iter().map(|k| match r.get(*k) {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
        }))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn run(cli: Cli) -> Result<bool> {
    let (name, flags) = cli.command.split();
    let (file_params, file_opts) = match &cli.config {
        Some(path) => Params::load(path)?,
        None => (Params::default(), FileOptions::default()),
    };
    let mut params = flags.over(&file_params);
    params.resolve_seed()?;
    let format = cli.format.or(file_opts.format).unwrap_or_default();
    let output = cli.output.or(file_opts.output);
    if let Some(jobs) = cli.jobs.or(file_opts.jobs) {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("starting worker pool")?;
    }

    let Outcome { result, rows, passed } = commands::dispatch_command(name, &params)?;
    let text = match format {
        Format::Json => {
            let report = json!({
                "artifact_version": modsum_core::ARTIFACT_VERSION,
                "command": name,
                "config": params,
                "seed": params.seed(),
                "result": result,
            });
            serde_json::to_string_pretty(&report)? + "\n"
        }
        Format::Csv => render_csv(&rows)?,
    };
    match output {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
