//! Command-line pipeline: view sets, oracle datasets, training and
//! closed-loop reconstruction, each run echoed into a manifest that can be
//! replayed with `nbv rerun`.

pub mod commands;
pub mod config;
mod outputs;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nbv_core::net::Architecture;
use nbv_core::persistence::Manifest;

pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "nbv", version, about = "Next-best-view planning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a view sphere as CSV.
    GenViews(GenViewsArgs),
    /// Run the oracle from strided initial views and save the examples.
    GenDataset(GenDatasetArgs),
    /// Train a classifier on a dataset file.
    Train(TrainArgs),
    /// Closed-loop reconstruction of objects with a policy.
    Reconstruct(ReconstructArgs),
    /// Dump the candidate table of one oracle call.
    EvalOracle(EvalOracleArgs),
    /// Repeat a run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat key=value file overriding built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the manifest (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be >= 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenViewsArgs {
    #[arg(long, value_parser = positive)]
    pub count: usize,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Restrict views to the upper hemisphere.
    #[arg(long)]
    pub hemisphere: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct GenDatasetArgs {
    /// Comma-separated `kind:seed` list, e.g. `box:0,lshape:3`.
    #[arg(long)]
    pub objects: String,
    /// Search space: a view count or a views CSV.
    #[arg(long)]
    pub views: Option<String>,
    /// Class set: a view count or a views CSV.
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long)]
    pub scov: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub initial_views: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "nbvnet")]
    pub arch: Architecture,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weights file.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV (default: `<out>.history.csv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Network,
    Random,
    Oracle,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Network => "network",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    /// Comma-separated `kind:seed` list.
    #[arg(long)]
    pub object: String,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Architecture the weights must have.
    #[arg(long, default_value = "nbvnet")]
    pub arch: Architecture,
    #[arg(long, value_enum, default_value = "network")]
    pub policy: PolicyKind,
    #[arg(long)]
    pub classes: Option<String>,
    /// Search space providing the perceptions (default: the class set).
    #[arg(long)]
    pub views: Option<String>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for episode and summary CSVs.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EvalOracleArgs {
    #[arg(long)]
    pub object: String,
    #[arg(long)]
    pub views: Option<String>,
    /// Views already integrated into the model, comma-separated.
    #[arg(long, default_value = "0")]
    pub integrated: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Redirect the primary output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Caps rayon's pool at `NBV_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NBV_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("NBV_THREADS={v:?} is not a count"))?;
        if n == 0 {
            bail!("NBV_THREADS must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenViews(a) => commands::gen_views(&a, None),
        Command::GenDataset(a) => commands::gen_dataset(&a, None),
        Command::Train(a) => commands::train(&a, None),
        Command::Reconstruct(a) => commands::reconstruct(&a, None),
        Command::EvalOracle(a) => commands::eval_oracle(&a, None),
        Command::Rerun(a) => rerun(&a),
    }
}

/// Rebuilds the command line stored in a manifest and runs it against the
/// manifest's resolved configuration.
pub fn rerun(a: &RerunArgs) -> Result<()> {
    let m = Manifest::read(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let command = m.get("command").context("manifest has no command entry")?.to_string();
    let mut argv = vec!["nbv".to_string(), command.clone()];
    for (k, v) in m.entries() {
        let Some(flag) = k.strip_prefix("arg.") else { continue };
        let v = match (flag, &a.out) {
            ("out", Some(o)) => o.display().to_string(),
            _ => v.clone(),
        };
        match v.as_str() {
            "true" => argv.push(format!("--{flag}")),
            "false" => {}
            _ => {
                argv.push(format!("--{flag}"));
                argv.push(v);
            }
        }
    }
    let mut cfg = Config::default();
    cfg.apply_manifest(&m, true)?;
    let cli = Cli::try_parse_from(&argv).with_context(|| format!("manifest command line {argv:?}"))?;
    let cfg = Some(cfg);
    match cli.command {
        Command::GenViews(a) => commands::gen_views(&a, cfg),
        Command::GenDataset(a) => commands::gen_dataset(&a, cfg),
        Command::Train(a) => commands::train(&a, cfg),
        Command::Reconstruct(a) => commands::reconstruct(&a, cfg),
        Command::EvalOracle(a) => commands::eval_oracle(&a, cfg),
        Command::Rerun(_) => bail!("a manifest cannot name rerun"),
    }
}
