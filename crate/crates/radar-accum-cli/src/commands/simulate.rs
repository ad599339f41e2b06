//! `simulate`: generate a synthetic sequence directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use radar_accum::io::write_sequence;
use radar_accum::synth::{builtin_scenario, simulate, ScenarioConfig, BUILTIN_SCENARIO_NAMES};

use crate::manifest::RunManifest;
use crate::{CliError, Command};

use super::ensure_dir;

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Builtin scenario name; see --list-scenarios.
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,
    /// Scenario config JSON, for scenes beyond the builtin catalog.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the sequence.
    #[arg(long, required_unless_present = "list_scenarios")]
    pub out: Option<PathBuf>,
    /// Override the scenario's random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario's duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Print the builtin scenario names and exit.
    #[arg(long, default_value_t = false)]
    pub list_scenarios: bool,
}

pub fn run(args: &SimulateArgs, out_override: Option<&Path>) -> Result<(), CliError> {
    if args.list_scenarios {
        for name in BUILTIN_SCENARIO_NAMES {
            println!("{name}");
        }
        return Ok(());
    }

    let mut cfg = resolve_scenario(args)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(duration) = args.duration {
        cfg.duration = duration;
    }
    run_resolved(args, cfg, out_override)
}

/// Runs with an already-resolved scenario; `rerun` enters here with the
/// manifest's stored config so replays cannot drift with the catalog.
pub fn run_resolved(
    args: &SimulateArgs,
    cfg: ScenarioConfig,
    out_override: Option<&Path>,
) -> Result<(), CliError> {
    let (seq, _truth) = simulate(&cfg)?;
    let out = out_override
        .map(Path::to_path_buf)
        .or_else(|| args.out.clone())
        .ok_or_else(|| CliError::Msg("--out is required".into()))?;
    ensure_dir(&out)?;
    write_sequence(&out, &seq)?;
    RunManifest::with_scenario(Command::Simulate(args.clone()), cfg).write_in_dir(&out)?;
    println!("wrote {} frames to {}", seq.frames.len(), out.display());
    Ok(())
}

fn resolve_scenario(args: &SimulateArgs) -> Result<ScenarioConfig, CliError> {
    match (&args.scenario, &args.config) {
        (Some(name), None) => builtin_scenario(name).ok_or_else(|| {
            CliError::Msg(format!(
                "unknown scenario {name:?}; available: {}",
                BUILTIN_SCENARIO_NAMES.join(", ")
            ))
        }),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
            let cfg: ScenarioConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Json { path: path.clone(), detail: e.to_string() })?;
            Ok(cfg)
        }
        (None, None) => Err(CliError::Msg("pass --scenario or --config".into())),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    }
}
