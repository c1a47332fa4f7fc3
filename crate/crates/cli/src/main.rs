use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use facademap_cli::{evaluate, run_pipeline, simulate_scene, DatasetPaths, RunOptions};
use facademap_core::ingest::{load_config, PipelineConfig};

#[derive(Parser)]
#[command(name = "facademap", version, about = "Facade models and occlusion-free textures from street-level laser scans and images")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its ground truth from a scene spec.
    Simulate {
        /// Scene spec file, or the name of a built-in scene.
        scene: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full pipeline on a dataset.
    RunPipeline(RunArgs),
    /// Score a pipeline run against simulator ground truth.
    Evaluate {
        run_dir: PathBuf,
        truth_dir: PathBuf,
        /// Metrics file (default: RUN_DIR/metrics.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Directory holding points.txt, frames.txt, cadastre.txt and cameras.txt.
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long)]
    cadastre: Option<PathBuf>,
    #[arg(long)]
    cameras: Option<PathBuf>,
    /// Accepted for symmetry with `simulate`; the pipeline is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Include stage timings in the manifest.
    #[arg(long)]
    record_timings: bool,
}

impl RunArgs {
    fn paths(&self) -> Result<DatasetPaths> {
        let base = self.data.as_deref().map(DatasetPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<&PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| from_dir.cloned())
                .with_context(|| format!("no {name} file: give a data directory or --{name}"))
        };
        Ok(DatasetPaths {
            points: pick(&self.points, base.as_ref().map(|b| &b.points), "points")?,
            frames: pick(&self.frames, base.as_ref().map(|b| &b.frames), "frames")?,
            cadastre: pick(&self.cadastre, base.as_ref().map(|b| &b.cadastre), "cadastre")?,
            cameras: pick(&self.cameras, base.as_ref().map(|b| &b.cameras), "cameras")?,
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scene, out, seed } => {
            simulate_scene(&scene, seed, &out)?;
        }
        Command::RunPipeline(args) => {
            let cfg = match &args.config {
                Some(p) => load_config(p)?,
                None => PipelineConfig::default(),
            };
            let manifest = run_pipeline(
                &args.paths()?,
                &cfg,
                &args.out,
                &RunOptions {
                    record_timings: args.record_timings,
                },
            )?;
            log::info!(
                "{} quads, {} files written to {}",
                manifest.facades.len(),
                manifest.outputs.len() + 1,
                args.out.display()
            );
        }
        Command::Evaluate { run_dir, truth_dir, out } => {
            let ev = evaluate(&run_dir, &truth_dir)?;
            let out = out.unwrap_or_else(|| run_dir.join("metrics.txt"));
            write_report(&out, &ev.report)?;
            print!("{}", ev.report);
        }
    }
    Ok(())
}

fn write_report(path: &Path, report: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, report).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
