mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bedrecon::pipeline::SolveMode;
use clap::{Parser, Subcommand};

use commands::Baseline;
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bedrecon::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bedrecon", version, about = "Residual bed topography reconstruction")]
struct Cli {
    /// JSON run config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set solver.epochs=500`. Repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    overrides: Vec<String>,
    /// Worker threads for tiles and dihedral copies (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; falls back to the config, then $BEDRECON_OUT.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene, its truth and radar picks.
    Synth,
    /// Solve for the residual thickness and write bed, thickness and history.
    Reconstruct {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Average over the eight rotations and reflections.
        #[arg(long)]
        tta: bool,
    },
    /// Interpolate the training picks with IDW or residual kriging.
    Baseline {
        #[arg(value_enum)]
        which: Baseline,
    },
    /// Score a predicted bed against a reference on the test core.
    Eval {
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Mode {
    WholeGrid,
    Tiled,
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(out) = cli.out {
        cfg.paths.output_dir = Some(out);
    }
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Reconstruct { mode, tta } => {
            if let Some(m) = mode {
                cfg.mode = match m {
                    Mode::WholeGrid => SolveMode::WholeGrid,
                    Mode::Tiled => SolveMode::Tiled,
                };
            }
            cfg.tta |= tta;
            commands::reconstruct(&cfg)
        }
        Command::Baseline { which } => commands::baseline(&cfg, which),
        Command::Eval { prediction, reference } => commands::eval(&cfg, &prediction, &reference),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(dir) => {
            eprintln!("outputs in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
