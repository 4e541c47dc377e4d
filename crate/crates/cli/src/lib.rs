//! Runner behind the `compliance` binary: configuration, experiments and
//! artifact output.

pub mod artifacts;
pub mod config;
pub mod experiments;

use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;

pub use experiments::{list_experiments, EXPERIMENTS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<compliance_core::Error> for CliError {
    fn from(e: compliance_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub experiment: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

/// Loads, validates and executes one experiment. Returns the manifest path.
pub fn run(opts: &RunOptions) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let mut raw = config::load(opts.config.as_deref(), opts.experiment.as_deref(), &opts.overrides)?;
    if let Some(s) = opts.seed {
        raw.seed = s;
    }
    if let Some(o) = &opts.out {
        raw.output = o.clone();
    }
    let exp = experiments::prepare(&raw)?;
    let resolved = json!({
        "experiment": raw.experiment,
        "seed": raw.seed,
        "output": raw.output.display().to_string(),
        raw.experiment.clone(): exp.resolved(),
    });
    let mut art = artifacts::Artifacts::create(&raw.output, &raw.experiment)?;
    log::info!("running {} (seed {})", raw.experiment, raw.seed);
    exp.run(raw.seed, &mut art)?;
    art.finish(resolved, raw.seed, start.elapsed().as_secs_f64())
}
