use std::path::PathBuf;

use acoustic_projection::pipeline::{self, PipelineConfig, Split};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Sonar-to-mesh reconstruction pipeline over persisted artifacts.
#[derive(Parser)]
#[command(name = "sapg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate sonar frames, poses and DVL ranges into <out>/dataset.
    Simulate(Common),
    /// Build feature grids, training TSDFs and samples (train and eval by default).
    Build(Common),
    /// Train the classifier and regressor on the train split.
    Train(Common),
    /// Predict, fuse and mesh a split (eval by default).
    Reconstruct(Common),
    /// Score the reconstructed mesh against DVL endpoints (eval by default).
    Evaluate(EvaluateArgs),
    /// Reconstruct and evaluate the eval split at several cell sizes.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["train", "eval", "all"])]
    split: Option<String>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Classifier decision threshold, overriding the config.
    #[arg(long)]
    threshold: Option<f64>,
    /// Grid cell size in meters, overriding the config.
    #[arg(long)]
    cell_size: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Mesh to score; defaults to the reconstruction of the evaluated split.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Cell sizes to sweep; defaults to the config's list.
    #[arg(long, value_delimiter = ',')]
    cell_sizes: Vec<f64>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)
            .with_context(|| format!("loading config {}", self.config.display()))?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(c) = self.cell_size {
            cfg.grid.cell_size = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn splits(&self, default: &[Split]) -> Result<Vec<Split>> {
        match &self.split {
            Some(s) => Ok(vec![s.parse()?]),
            None => Ok(default.to_vec()),
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => print_json(&pipeline::simulate(&c.config()?)?),
        Command::Build(c) => {
            let cfg = c.config()?;
            for split in c.splits(&[Split::Train, Split::Eval])? {
                print_json(&pipeline::build(&cfg, split)?)?;
            }
            Ok(())
        }
        Command::Train(c) => {
            if c.split.as_deref().is_some_and(|s| s != "train") {
                anyhow::bail!("training always uses the train split");
            }
            print_json(&pipeline::train_models(&c.config()?)?)
        }
        Command::Reconstruct(c) => {
            let cfg = c.config()?;
            for split in c.splits(&[Split::Eval])? {
                print_json(&pipeline::reconstruct(&cfg, split)?)?;
            }
            Ok(())
        }
        Command::Evaluate(e) => {
            let cfg = e.common.config()?;
            for split in e.common.splits(&[Split::Eval])? {
                print_json(&pipeline::evaluate(&cfg, e.mesh.as_deref(), split)?)?;
            }
            Ok(())
        }
        Command::Sweep(s) => {
            let cfg = s.common.config()?;
            let sizes = if s.cell_sizes.is_empty() { cfg.sweep_cell_sizes.clone() } else { s.cell_sizes };
            print_json(&pipeline::sweep(&cfg, &sizes)?)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
