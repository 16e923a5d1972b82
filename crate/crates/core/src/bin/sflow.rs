use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sflow::cli::{self, Command, Report};

/// Spectral flow, Morse oracle, cogredient parametrix and Maslov index
/// computations from a JSON job file.
#[derive(Parser, Debug)]
#[command(name = "sflow", version)]
struct Args {
    /// Job document; reads standard input when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report destination; `-` or omitted means standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the command named in the job.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Override the random seed (used by `verify`).
    #[arg(long)]
    seed: Option<u64>,
}

fn read_input(path: Option<&PathBuf>) -> std::io::Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(text.as_bytes())?;
            tmp.persist(p).map_err(|e| e.error)?;
            Ok(())
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SFLOW_LOG", "warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let args = Args::parse();

    let report = match read_input(args.input.as_ref()) {
        Ok(text) => cli::run_text(&text, args.command, args.seed),
        Err(e) => Report::failure(args.command, cli::EXIT_INVALID_INPUT, format!("cannot read input: {e}")),
    };
    if let Err(e) = write_output(args.output.as_ref(), &report.to_json()) {
        log::error!("cannot write report: {e}");
        return ExitCode::from(cli::EXIT_INTERNAL as u8);
    }
    ExitCode::from(report.exit_code() as u8)
}
