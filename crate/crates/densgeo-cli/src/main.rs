//! densgeo: reverse engineering of topology-optimization density fields
//! into parametric bar geometry.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use densgeo::datagen::DatasetKind;

#[derive(Parser)]
#[command(name = "densgeo", version, about)]
struct Cli {
    /// Config file (TOML); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of target grids with ground truth or boundary
    /// conditions, plus a manifest CSV.
    Generate {
        /// Dataset kind: simp, simp5, or random.
        #[arg(long, value_parser = clap::value_parser!(DatasetKind))]
        kind: DatasetKind,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Parallel workers across samples.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Reverse engineer one density grid into bar components.
    Reverse {
        /// Input grid (PGM or CSV).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: commands::reverse::Method,
        #[arg(long)]
        out: PathBuf,
        /// Binarization threshold for the input (default from config).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Evaluate precomputed reconstructions against a dataset manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding `<id>.components.json` files.
        #[arg(long)]
        geometry: PathBuf,
        /// Method label for the report rows.
        #[arg(long, default_value = "fit")]
        method_name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run both reverse methods over a manifest and emit comparison
    /// reports with per-method aggregates.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sensitivity sweep over NMS threshold and prune tolerance.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated mask-dice NMS thresholds.
        #[arg(long, default_value = "0.7,0.8,0.9")]
        nms_thresholds: String,
        /// Comma-separated prune tolerances.
        #[arg(long, default_value = "0.0,0.001,0.01")]
        prune_tolerances: String,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Render a component-set JSON to a PGM raster.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// Binarize the render at this threshold (continuous otherwise).
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate {
            kind,
            count,
            seed,
            out,
            jobs,
        } => commands::generate::run(kind, count, seed, out, config, jobs),
        Command::Reverse {
            input,
            method,
            out,
            threshold,
        } => commands::reverse::run(input, method, out, threshold, config),
        Command::Evaluate {
            manifest,
            geometry,
            method_name,
            out,
            jobs,
        } => commands::evaluate::run(manifest, geometry, method_name, out, config, jobs),
        Command::Compare {
            manifest,
            out,
            jobs,
        } => commands::compare::run(manifest, out, config, jobs),
        Command::Sweep {
            input,
            out,
            nms_thresholds,
            prune_tolerances,
            threshold,
        } => commands::sweep::run(
            input,
            out,
            nms_thresholds,
            prune_tolerances,
            threshold,
            config,
        ),
        Command::Render {
            input,
            out,
            nx,
            ny,
            threshold,
        } => commands::render::run(input, out, nx, ny, threshold),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DENSGEO_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
