//! `cryozssr`: simulate → align → train → sr → eval → report, one stage per
//! invocation, all artifacts under one run directory.

mod config;
mod error;
mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use config::PipelineConfig;
use error::{CliError, CliResult};
use manifest::{record_stage, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Simulate,
    Align,
    Train,
    Sr,
    Eval,
    Report,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Align => "align",
            Stage::Train => "train",
            Stage::Sr => "sr",
            Stage::Eval => "eval",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cryozssr", version, about = "Zero-shot multi-frame super-resolution pipeline")]
struct Cli {
    #[arg(value_enum)]
    stage: Stage,
    /// key = value config file; defaults to the run directory's manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of frame averages.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    scale: Option<usize>,
    /// Worker threads when several run directories are given.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Run directories processed independently; replaces --out.
    runs: Vec<PathBuf>,
}

fn resolve_config(cli: &Cli, dir: &Path) -> CliResult<PipelineConfig> {
    let manifest = dir.join(MANIFEST_FILE);
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None if manifest.is_file() => PipelineConfig::load(&manifest)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(k) = cli.k {
        cfg.train.k = k;
    }
    if let Some(s) = cli.scale {
        cfg.set_scale(s);
    }
    cfg.absolutize();
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cli: &Cli, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let cfg = resolve_config(cli, dir)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let written = match cli.stage {
        Stage::Simulate => stages::simulate(dir, &cfg)?,
        Stage::Align => stages::align(dir, &cfg)?,
        Stage::Train => stages::train_stage(dir, &cfg)?,
        Stage::Sr => stages::sr_stage(dir, &cfg)?,
        Stage::Eval => stages::eval(dir, &cfg)?,
        Stage::Report => stages::report(dir, &cfg)?,
    };
    record_stage(dir, &cfg, cli.stage.name())?;
    Ok(written)
}

fn run(cli: &Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(CliError::config("--jobs must be >= 1"));
    }
    let dirs = if cli.runs.is_empty() {
        vec![cli.out.clone()]
    } else {
        cli.runs.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<Vec<PathBuf>>> =
        pool.install(|| dirs.par_iter().map(|d| run_one(cli, d)).collect());
    for (dir, r) in dirs.iter().zip(results) {
        let written = r?;
        let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
        println!("{} [{}]: wrote {}", cli.stage.name(), dir.display(), names.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::config(line.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}
