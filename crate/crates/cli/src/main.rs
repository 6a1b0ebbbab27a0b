//! `qcdist`: command-line front end for the packing, transform, solver and
//! experiment pipelines.

mod commands;
mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use config::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "qcdist", version, about = "Quasiconformal Hausdorff-distortion toolkit")]
struct Cli {
    /// Defaults for any option, as a JSON object or key=value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Size of the worker pool (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock times in reports and the manifest.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dyadic content and the packing construction for a mask.
    Pack(PackArgs),
    /// Apply a Fourier multiplier (or the compressed Beurling transform) to a field.
    Transform(TransformArgs),
    /// Solve the principal Beltrami equation.
    Solve(SolveArgs),
    /// End-to-end distortion experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Quick invariant checks of every module.
    Selftest(SelftestArgs),
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    ConformalOutside(ConformalArgs),
    ContentDistortion(ContentArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Run directory; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PackArgs {
    /// Mask as JSON `{"level", "cells"}` or a square power-of-two PNG.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also estimate the weighted Beurling norm on an n×n grid.
    #[arg(long)]
    norm_n: Option<usize>,
    #[arg(long)]
    norm_tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Beurling,
    BeurlingAdjoint,
    Cauchy,
    Dbar,
    Dz,
    Compressed,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long, value_enum)]
    op: Option<Op>,
    /// Input field (`.json` header with a `.bin` sidecar).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Without --input: the indicator of the disk of this radius at 0.
    #[arg(long)]
    disk_radius: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Packing family file, for --op compressed.
    #[arg(long)]
    family: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Coefficient field; without it a disk coefficient is synthesized.
    #[arg(long)]
    mu: Option<PathBuf>,
    #[arg(long = "K", alias = "k")]
    k: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    phase: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_terms: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Source mask; without it a corner Cantor set is used.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    cantor_ratio: Option<f64>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long)]
    level: Option<u32>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "K", alias = "k")]
    k: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    phase: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_terms: Option<usize>,
    #[arg(long)]
    norm_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct ConformalArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ContentArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    disk_radius: Option<f64>,
    #[arg(long)]
    image_level: Option<u32>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[command(flatten)]
    out: OutArgs,
}

/// A failed run: exit code 1 for invalid input, 2 for numerical failure.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub diagnostics: Option<Value>,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
            diagnostics: None,
        }
    }

    pub fn numerical(message: impl Into<String>, diagnostics: Value) -> Self {
        Failure {
            code: 2,
            message: message.into(),
            diagnostics: Some(diagnostics),
        }
    }
}

impl From<qcdist::Error> for Failure {
    fn from(e: qcdist::Error) -> Self {
        match &e {
            qcdist::Error::NonConvergence {
                what,
                iterations,
                residual,
            } => Failure::numerical(
                e.to_string(),
                serde_json::json!({
                    "what": what,
                    "iterations": iterations,
                    "residual": residual,
                }),
            ),
            _ => Failure::validation(e.to_string()),
        }
    }
}

pub struct Context {
    pub config: ConfigFile,
    pub timing: bool,
}

fn out_dir(cmd: &Command) -> &OutArgs {
    match cmd {
        Command::Pack(a) => &a.out,
        Command::Transform(a) => &a.out,
        Command::Solve(a) => &a.out,
        Command::Experiment(ExperimentCommand::ConformalOutside(a)) => &a.out,
        Command::Experiment(ExperimentCommand::ContentDistortion(a)) => &a.out,
        Command::Selftest(a) => &a.out,
    }
}

fn run(cli: Cli) -> Result<Value, (Failure, Option<PathBuf>)> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p).map_err(|f| (f, None))?,
        None => ConfigFile::default(),
    };
    let out = config
        .pick(out_dir(&cli.command).out.clone(), "out")
        .map_err(|f| (f, None))?;
    let threads = config.pick(cli.threads, "threads").map_err(|f| (f, None))?;
    if let Some(n) = threads {
        if n == 0 {
            return Err((Failure::validation("--threads must be at least 1"), None));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (Failure::validation(format!("cannot size the worker pool: {e}")), None))?;
    }
    let ctx = Context {
        config,
        timing: cli.timing,
    };
    let result = match &cli.command {
        Command::Pack(a) => commands::pack(&ctx, a, out.as_deref()),
        Command::Transform(a) => commands::transform(&ctx, a, out.as_deref()),
        Command::Solve(a) => commands::solve(&ctx, a, out.as_deref()),
        Command::Experiment(ExperimentCommand::ConformalOutside(a)) => {
            commands::conformal_outside(&ctx, a, out.as_deref())
        }
        Command::Experiment(ExperimentCommand::ContentDistortion(a)) => {
            commands::content_distortion(&ctx, a, out.as_deref())
        }
        Command::Selftest(_) => selftest::run(&ctx, out.as_deref()),
    };
    result.map_err(|f| (f, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err((failure, out)) => {
            eprintln!("error: {}", failure.message);
            let mut summary = serde_json::json!({
                "status": "error",
                "code": failure.code,
                "message": failure.message,
            });
            if let (Some(diag), Some(dir)) = (&failure.diagnostics, out) {
                let path = dir.join("diagnostics.json");
                let body = serde_json::json!({ "message": failure.message, "diagnostics": diag });
                let written = std::fs::create_dir_all(&dir).is_ok()
                    && qcdist::field::write_atomic(&path, format!("{body:#}\n").as_bytes()).is_ok();
                if written {
                    summary["diagnostics"] = Value::String(path.display().to_string());
                }
            }
            println!("{summary}");
            ExitCode::from(failure.code)
        }
    }
}
