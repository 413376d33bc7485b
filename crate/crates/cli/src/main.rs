//! `phml`: synthetic data generation, the persistence/forest pipeline,
//! attributions and heatmap rendering, all through files on disk.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 resource error.

mod commands;
mod error;
mod io;
mod manifest;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{explain, gen_data, pipeline, render};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "phml", version, about = "Persistent-homology features, forest regression and cohort attributions for 3D point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic structures, their XYZ files and a manifest
    GenData(gen_data::GenDataArgs),
    /// Run pipeline stages: ph, vectorize, train, predict, or all
    Pipeline(pipeline::PipelineArgs),
    /// Attribute a prediction to pixels, parameters or grid cells
    Explain(explain::ExplainArgs),
    /// Render a CSV grid as a PGM/PPM heatmap
    Render(render::RenderArgs),
}

/// One line of `runlog.jsonl`. Carries no timestamps so reruns log
/// identical lines.
#[derive(Serialize)]
pub struct RunRecord<'a, T: Serialize> {
    command: &'a str,
    tool_version: &'a str,
    formats: Formats,
    args: &'a T,
}

#[derive(Serialize)]
struct Formats {
    manifest: &'static str,
    model: &'static str,
}

impl<'a, T: Serialize> RunRecord<'a, T> {
    pub fn new(command: &'a str, args: &'a T) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            formats: Formats {
                manifest: manifest::MANIFEST_FORMAT,
                model: phml_core::forest::MODEL_FORMAT,
            },
            args,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::GenData(a) => gen_data::run(a),
        Command::Pipeline(a) => pipeline::run(a),
        Command::Explain(a) => explain::run(a),
        Command::Render(a) => render::run(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("phml: {e}");
        std::process::exit(e.exit_code());
    }
}
