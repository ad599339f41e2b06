//! Command-line pipeline around the radar-accum library: simulate a scene,
//! estimate ego motion, accumulate frames, and evaluate the result.
//!
//! Every command writes a manifest next to its outputs; `rerun` replays a
//! manifest and reproduces the outputs byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod driver;
pub mod manifest;
pub mod threads;

pub use commands::accumulate::AccumulateArgs;
pub use commands::estimate_ego::EstimateEgoArgs;
pub use commands::evaluate::EvaluateArgs;
pub use commands::simulate::SimulateArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Msg(String),
    #[error(transparent)]
    Io(#[from] radar_accum::io::IoError),
    #[error(transparent)]
    Synth(#[from] radar_accum::synth::SynthError),
    #[error(transparent)]
    Estimate(#[from] radar_accum::ego_motion::EstimateError),
    #[error(transparent)]
    Accumulate(#[from] radar_accum::accumulate::AccumulateError),
    #[error(transparent)]
    Metrics(#[from] radar_accum::metrics::MetricsError),
    #[error(transparent)]
    Dynamics(#[from] radar_accum::dynamics::DynamicsError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Json { path: PathBuf, detail: String },
}

impl CliError {
    pub fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::File { path: path.to_path_buf(), source }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "radar-accum",
    version,
    about = "Accumulate automotive radar point clouds across frames"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic sequence with ground truth.
    Simulate(SimulateArgs),
    /// Estimate per-pair ego motion and write an estimates CSV.
    EstimateEgo(EstimateEgoArgs),
    /// Stack frames into accumulated clouds with age channels.
    Accumulate(AccumulateArgs),
    /// Score an estimates CSV with the Chamfer distance and pose errors.
    Evaluate(EvaluateArgs),
    /// Replay a previously written manifest.
    Rerun(RerunArgs),
}

#[derive(clap::Args, Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier command.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Redirect outputs; the replayed manifest still records the original
    /// destination, so the produced trees stay byte-identical.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one parsed command. Exit code 0 on success, 1 on runtime failure;
/// argument errors exit 2 inside clap before this is reached.
pub fn run(command: &Command) -> ExitCode {
    threads::init_thread_pool();
    let result = dispatch(command, None);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn dispatch(command: &Command, out_override: Option<&std::path::Path>) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => commands::simulate::run(args, out_override),
        Command::EstimateEgo(args) => commands::estimate_ego::run(args, out_override),
        Command::Accumulate(args) => commands::accumulate::run(args, out_override),
        Command::Evaluate(args) => commands::evaluate::run(args, out_override),
        Command::Rerun(args) => {
            let m = manifest::RunManifest::load(&args.manifest)?;
            let out = args.out.as_deref().or(out_override);
            match (&m.command, m.scenario) {
                (Command::Rerun(_), _) => {
                    Err(CliError::Msg("manifest records a rerun; nothing to replay".into()))
                }
                (Command::Simulate(sim), Some(cfg)) => commands::simulate::run_resolved(sim, cfg, out),
                (other, _) => dispatch(other, out),
            }
        }
    }
}
