//! Experiment registry. Each experiment is a strict config block that knows
//! how to validate and run itself.

mod hopper;
mod nav;
mod oscillators;
mod springs;
mod structure;
mod walker;

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::{bind, merge, RawConfig};
use crate::CliError;

pub struct ExperimentInfo {
    pub name: &'static str,
    pub figure: &'static str,
    pub summary: &'static str,
}

pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "spring-curves",
        figure: "Fig. 6",
        summary: "pneumatic spring force and stiffness over compression, one curve per dead volume",
    },
    ExperimentInfo {
        name: "hopper-sweep",
        figure: "Fig. 8",
        summary: "up and down frequency sweeps of the hopper; jump frequencies and hysteresis width",
    },
    ExperimentInfo {
        name: "resonance-map",
        figure: "Fig. 9",
        summary: "amplitude over the frequency-pressure plane, ridge line, and resonance versus ground stiffness (Fig. 10 left)",
    },
    ExperimentInfo {
        name: "track",
        figure: "Fig. 10",
        summary: "perturb-and-observe tracker re-tuning the leg after a ground stiffness step",
    },
    ExperimentInfo {
        name: "vibrobot",
        figure: "Fig. 11",
        summary: "rigid two-rotor walker; mean velocity against centre-of-mass offset",
    },
    ExperimentInfo {
        name: "entrain",
        figure: "Fig. 15",
        summary: "adaptive-frequency Hopf oscillator entraining to a plant; initial-frequency and phase-lag sweeps",
    },
    ExperimentInfo {
        name: "kuramoto",
        figure: "Fig. 16",
        summary: "order parameter of one Kuramoto community against coupling strength",
    },
    ExperimentInfo {
        name: "quad-communities",
        figure: "Fig. 16",
        summary: "four Kuramoto communities driving the hips of a compliant quadruped; phase locking between limbs",
    },
    ExperimentInfo {
        name: "modes",
        figure: "Fig. 18",
        summary: "normal modes of a plate on four springs, gait labels and single-mode forcing",
    },
    ExperimentInfo {
        name: "identify",
        figure: "Fig. 19",
        summary: "damped-oscillation fits of front and rear leg drops; inferred mass ratio",
    },
    ExperimentInfo {
        name: "nav-sim",
        figure: "Fig. 20(a)",
        summary: "synthetic IMU, gait sensor and ground-truth streams for a legged robot on a closed path",
    },
    ExperimentInfo {
        name: "nav-fuse",
        figure: "Fig. 20(b)",
        summary: "strapdown INS versus error-state fusion with the virtual odometer over Monte-Carlo seeds",
    },
    ExperimentInfo {
        name: "correlate",
        figure: "Fig. 21",
        summary: "correlation matrix between per-stride gait indicators and stride length / heading change",
    },
];

pub fn list_experiments() -> String {
    let mut out = String::new();
    let width = EXPERIMENTS.iter().map(|e| e.name.len()).max().unwrap_or(0);
    for e in EXPERIMENTS {
        let _ = writeln!(out, "{:width$}  [{} analogue] {}", e.name, e.figure, e.summary);
    }
    out.push_str(
        "\nOUT-OF-SCOPE: swimming (underwater platform) and morphology/control co-evolution \
         experiments are not reproduced.\n",
    );
    out
}

/// A validated experiment ready to run.
pub trait Experiment {
    fn resolved(&self) -> serde_json::Value;
    fn run(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError>;
}

/// Schema side of an experiment block. Keys left out of the config take
/// their values from `Default`.
pub(crate) trait Block: Serialize + DeserializeOwned + Default + 'static {
    /// Semantic checks after parsing; may fold the run seed into the block.
    fn check(&mut self, seed: u64) -> Result<(), String>;
    fn execute(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError>;
}

struct Bound<B>(B);

impl<B: Block> Experiment for Bound<B> {
    fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(&self.0).unwrap_or(serde_json::Value::Null)
    }

    fn run(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        self.0.execute(seed, art)
    }
}

fn bound<B: Block>(raw: &RawConfig) -> Result<Box<dyn Experiment>, CliError> {
    let mut block = toml::Value::try_from(B::default())
        .map_err(|e| CliError::Runtime(format!("default [{}] block: {e}", raw.experiment)))?;
    merge(&mut block, raw.block.clone());
    let mut b: B = bind(&raw.experiment, block)?;
    b.check(raw.seed)
        .map_err(|m| CliError::Config(format!("[{}]: {m}", raw.experiment)))?;
    Ok(Box::new(Bound(b)))
}

pub fn prepare(raw: &RawConfig) -> Result<Box<dyn Experiment>, CliError> {
    match raw.experiment.as_str() {
        "spring-curves" => bound::<springs::SpringCurves>(raw),
        "hopper-sweep" => bound::<hopper::HopperSweep>(raw),
        "resonance-map" => bound::<hopper::ResonanceMapBlock>(raw),
        "track" => bound::<hopper::Track>(raw),
        "vibrobot" => bound::<walker::Vibrobot>(raw),
        "entrain" => bound::<oscillators::Entrain>(raw),
        "kuramoto" => bound::<oscillators::Kuramoto>(raw),
        "quad-communities" => bound::<oscillators::QuadCommunities>(raw),
        "modes" => bound::<structure::Modes>(raw),
        "identify" => bound::<structure::Identify>(raw),
        "nav-sim" => bound::<nav::NavSim>(raw),
        "nav-fuse" => bound::<nav::NavFuse>(raw),
        "correlate" => bound::<nav::Correlate>(raw),
        other => Err(CliError::Config(format!("key `experiment`: unknown experiment `{other}`"))),
    }
}

/// Maps a core validation error to a config message.
pub(crate) fn checked(r: compliance_core::Result<()>, what: &str) -> Result<(), String> {
    r.map_err(|e| format!("{what}: {e}"))
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
