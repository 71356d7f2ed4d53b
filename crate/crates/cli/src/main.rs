//! `facstat`: batch front end for the faculty-record analyses.
//!
//! Every report embeds the manifest of the run that produced it, and
//! `facstat replay <report>` reruns that manifest byte for byte.

mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};
use commands::Output;
use manifest::RunManifest;

fn write_outputs(out: &Output, format: args::Format, dir: Option<&Path>) -> Result<()> {
    print!("{}", out.report);
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let report = dir.join(format!("report.{}", format.extension()));
        std::fs::write(&report, &out.report).with_context(|| format!("writing {}", report.display()))?;
        for (name, body) in &out.files {
            let path = dir.join(name);
            std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if let Some(n) = &out.notice {
        eprintln!("{n}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let manifest = match &cli.command {
        Command::Replay(r) => {
            let text = std::fs::read_to_string(&r.report).with_context(|| format!("reading {}", r.report.display()))?;
            let m = RunManifest::extract(&text).with_context(|| format!("no usable manifest in {}", r.report.display()))?;
            if m.version != env!("CARGO_PKG_VERSION") {
                eprintln!(
                    "warning: report was written by version {}, replaying with {}",
                    m.version,
                    env!("CARGO_PKG_VERSION")
                );
            }
            m
        }
        other => RunManifest::new(&cli.global, other),
    };
    let out = commands::run(&manifest)?;
    write_outputs(&out, manifest.format, cli.global.out_dir.as_deref())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
