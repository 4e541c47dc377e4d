use std::fs::File;
use std::path::PathBuf;

use compliance_core::analysis::correlation_matrix;
use compliance_core::nav::fusion::InitialSigma;
use compliance_core::nav::{
    build_indicator_table, detect_strides, generate_gait_data, ins_only, io, kf_fuse, odometer_stream, stride_stats,
    stride_truth, ErrorState, FusionConfig, GaitSensorFrame, ImuSample, Indicator, NavState, OdometerModel, Scenario,
    LEGS,
};
use compliance_core::svg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{checked, median, Block};
use crate::artifacts::{csv_table, Artifacts};
use crate::CliError;

const IMU_UNITS: &[(&str, &str)] = &[("t", "s"), ("ax", "m/s^2"), ("ay", "m/s^2"), ("gz", "rad/s")];
const TRUTH_UNITS: &[(&str, &str)] = &[("t", "s"), ("x", "m"), ("y", "m"), ("psi", "rad")];

fn gait_unit(name: &str) -> String {
    match name {
        "t" => "s",
        "fmotor" => "Hz",
        n if n.starts_with('p') => "1",
        _ => "rad",
    }
    .to_string()
}

fn indicator_unit(name: &str) -> String {
    match name {
        "stride_length" => "m",
        n if n.starts_with("duty") => "1",
        n if n.starts_with("impulse") => "s",
        _ => "rad",
    }
    .to_string()
}

fn check_scenario(sc: &mut Scenario, seed: u64) -> Result<(), String> {
    sc.seed = seed;
    checked(sc.validate(), "scenario")
}

fn path_plot(title: &str, runs: &[(&str, &[NavState])]) -> String {
    let xy: Vec<(&str, Vec<f64>, Vec<f64>)> = runs
        .iter()
        .map(|(l, s)| (*l, s.iter().map(|p| p.position[0]).collect(), s.iter().map(|p| p.position[1]).collect()))
        .collect();
    let series: Vec<(&str, &[f64], &[f64])> = xy.iter().map(|(l, x, y)| (*l, x.as_slice(), y.as_slice())).collect();
    svg::line_plot(title, "x (m)", "y (m)", &series)
}

/// Synthetic sensor streams for one scenario.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavSim {
    /// Its `seed` is replaced by the run seed.
    pub scenario: Scenario,
}

impl Block for NavSim {
    fn check(&mut self, seed: u64) -> Result<(), String> {
        check_scenario(&mut self.scenario, seed)
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let d = generate_gait_data(&self.scenario)?;
        art.csv("imu", "body-frame specific force and yaw rate", &io::imu_to_csv(&d.imu)?, IMU_UNITS)?;
        art.csv_with("gait", "hip and knee angles, normalised foot pressures, motor frequency", &io::gait_to_csv(&d.frames)?, gait_unit)?;
        art.csv("truth", "ground-truth pose at every IMU epoch", &io::truth_to_csv(&d.truth)?, TRUTH_UNITS)?;
        art.json("touchdowns", "generated touchdown times per leg (s), FL FR RL RR", &d.touchdowns)?;
        art.svg("path", "ground-truth path", &path_plot("Ground truth", &[("truth", &d.truth)]))
    }
}

/// INS-only versus fused dead reckoning over Monte-Carlo seeds, or over
/// recorded streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavFuse {
    pub scenario: Scenario,
    pub fusion: FusionConfig,
    /// Defaults to the model matching the scenario's gait.
    pub odometer: Option<OdometerModel>,
    /// Leg whose touchdowns delimit strides.
    pub leg: usize,
    /// Draw i uses seed + i; ignored with `input`.
    pub seeds: usize,
    /// Directory holding imu.csv, gait.csv and truth.csv to fuse instead
    /// of generated data.
    pub input: Option<PathBuf>,
}

impl Default for NavFuse {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            fusion: FusionConfig::default(),
            odometer: None,
            leg: 0,
            seeds: 20,
            input: None,
        }
    }
}

struct Streams {
    imu: Vec<ImuSample>,
    frames: Vec<GaitSensorFrame>,
    truth: Vec<NavState>,
}

#[derive(Serialize, Clone)]
struct SeedResult {
    seed: u64,
    duration: f64,
    fused_error: f64,
    ins_error: f64,
    ratio: f64,
    gyro_bias: f64,
    accel_bias: [f64; 2],
    scale: f64,
    updates: usize,
    rejected: usize,
}

#[derive(Serialize)]
struct FuseReport {
    runs: Vec<SeedResult>,
    median_fused_error: f64,
    median_ins_error: f64,
    median_ratio: f64,
    median_accel_bias: [f64; 2],
    median_gyro_bias: f64,
    planted_accel_bias: Option<[f64; 2]>,
    planted_gyro_bias: Option<f64>,
}

fn read_streams(dir: &std::path::Path) -> Result<Streams, CliError> {
    let open = |name: &str| {
        let p = dir.join(name);
        File::open(&p).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", p.display())))
    };
    Ok(Streams {
        imu: io::read_imu(open("imu.csv")?)?,
        frames: io::read_gait(open("gait.csv")?)?,
        truth: io::read_truth(open("truth.csv")?)?,
    })
}

impl NavFuse {
    fn fuse(&self, s: &Streams, seed: u64) -> Result<(SeedResult, Vec<NavState>, Vec<NavState>), CliError> {
        let events = detect_strides(&s.frames, self.leg)?;
        let stats = stride_stats(&s.frames, &events)?;
        let om = self.odometer.clone().unwrap_or_else(|| OdometerModel::matching(&self.scenario.gait));
        let odo = odometer_stream(&om, &stats)?;
        let init = *s.truth.first().ok_or_else(|| CliError::Runtime("empty truth stream".into()))?;
        let run = kf_fuse(&s.imu, &odo, init, ErrorState::initial(&self.fusion.initial), &self.fusion)?;
        let ins = ins_only(&s.imu, init, &ErrorState::initial(&InitialSigma::default()))?;
        let end = s.truth.last().expect("non-empty");
        let fused_error = run.states.last().map_or(f64::NAN, |x| x.distance_to(end));
        let ins_error = ins.last().map_or(f64::NAN, |x| x.distance_to(end));
        let fe = &run.final_error;
        let result = SeedResult {
            seed,
            duration: end.t - init.t,
            fused_error,
            ins_error,
            ratio: fused_error / ins_error,
            gyro_bias: fe.gyro_bias,
            accel_bias: fe.accel_bias,
            scale: fe.scale,
            updates: run.history.len(),
            rejected: run.rejected(),
        };
        Ok((result, run.states, ins))
    }
}

impl Block for NavFuse {
    fn check(&mut self, seed: u64) -> Result<(), String> {
        check_scenario(&mut self.scenario, seed)?;
        checked(self.fusion.validate(), "fusion")?;
        if let Some(om) = &self.odometer {
            checked(om.validate(), "odometer")?;
        }
        if self.leg >= LEGS {
            return Err(format!("leg must be below {LEGS}"));
        }
        if self.seeds == 0 {
            return Err("seeds must be at least 1".into());
        }
        if let Some(dir) = &self.input {
            if !dir.is_dir() {
                return Err(format!("input `{}` is not a directory", dir.display()));
            }
        }
        Ok(())
    }

    fn execute(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let outcomes = match &self.input {
            Some(dir) => {
                let s = read_streams(dir)?;
                let (r, fused, ins) = self.fuse(&s, seed)?;
                vec![(r, fused, ins, s.truth)]
            }
            None => (0..self.seeds as u64)
                .into_par_iter()
                .map(|i| {
                    let sc = Scenario { seed: seed.wrapping_add(i), ..self.scenario.clone() };
                    let d = generate_gait_data(&sc)?;
                    let s = Streams { imu: d.imu, frames: d.frames, truth: d.truth };
                    let (r, fused, ins) = self.fuse(&s, sc.seed)?;
                    Ok((r, fused, ins, s.truth))
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        };
        let runs: Vec<SeedResult> = outcomes.iter().map(|o| o.0.clone()).collect();
        let col = |f: fn(&SeedResult) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
        let planted = self.input.is_none();
        let report = FuseReport {
            median_fused_error: col(|r| r.fused_error),
            median_ins_error: col(|r| r.ins_error),
            median_ratio: col(|r| r.ratio),
            median_accel_bias: [col(|r| r.accel_bias[0]), col(|r| r.accel_bias[1])],
            median_gyro_bias: col(|r| r.gyro_bias),
            planted_accel_bias: planted.then_some(self.scenario.noise.accel_bias),
            planted_gyro_bias: planted.then_some(self.scenario.noise.gyro_bias),
            runs,
        };
        let rows = report.runs.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.fused_error.to_string(),
                r.ins_error.to_string(),
                r.ratio.to_string(),
                r.gyro_bias.to_string(),
                r.accel_bias[0].to_string(),
                r.accel_bias[1].to_string(),
                r.scale.to_string(),
                r.rejected.to_string(),
            ]
        });
        art.csv(
            "seeds",
            "end-position errors and final estimates per seed",
            &csv_table(&["seed", "fused_error", "ins_error", "ratio", "gyro_bias", "accel_bias_x", "accel_bias_y", "scale", "rejected"], rows),
            &[
                ("seed", "1"),
                ("fused_error", "m"),
                ("ins_error", "m"),
                ("ratio", "1"),
                ("gyro_bias", "rad/s"),
                ("accel_bias_x", "m/s^2"),
                ("accel_bias_y", "m/s^2"),
                ("scale", "1"),
                ("rejected", "1"),
            ],
        )?;
        art.json("report", "Monte-Carlo summary: medians, planted biases and per-seed results (SI units)", &report)?;

        let (_, fused, ins, truth) = &outcomes[0];
        let rows = truth
            .iter()
            .zip(fused)
            .zip(ins)
            .step_by(10)
            .map(|((t, f), i)| {
                vec![
                    t.t.to_string(),
                    t.position[0].to_string(),
                    t.position[1].to_string(),
                    f.position[0].to_string(),
                    f.position[1].to_string(),
                    i.position[0].to_string(),
                    i.position[1].to_string(),
                ]
            });
        art.csv(
            "trajectory",
            "truth, fused and INS-only positions of the first run, every tenth epoch",
            &csv_table(&["t", "x_true", "y_true", "x_fused", "y_fused", "x_ins", "y_ins"], rows),
            &[
                ("t", "s"),
                ("x_true", "m"),
                ("y_true", "m"),
                ("x_fused", "m"),
                ("y_fused", "m"),
                ("x_ins", "m"),
                ("y_ins", "m"),
            ],
        )?;
        art.svg(
            "trajectory",
            "truth, fused and INS-only paths of the first run",
            &path_plot("Dead reckoning", &[("truth", truth), ("fused", fused), ("INS only", ins)]),
        )
    }
}

/// Correlation between per-stride indicators and the true stride.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Correlate {
    pub scenario: Scenario,
    pub indicators: Vec<Indicator>,
    pub leg: usize,
}

impl Default for Correlate {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            indicators: Indicator::standard_set(),
            leg: 0,
        }
    }
}

impl Block for Correlate {
    fn check(&mut self, seed: u64) -> Result<(), String> {
        check_scenario(&mut self.scenario, seed)?;
        if self.indicators.is_empty() {
            return Err("indicators must not be empty".into());
        }
        if self.leg >= LEGS {
            return Err(format!("leg must be below {LEGS}"));
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let d = generate_gait_data(&self.scenario)?;
        let events = detect_strides(&d.frames, self.leg)?;
        let truth = stride_truth(&d.truth, &events)?;
        let table = build_indicator_table(&d.frames, &truth, &self.indicators)?;
        let names: Vec<&str> = table.iter().map(|c| c.0.as_str()).collect();
        let n = table.first().map_or(0, |c| c.1.len());
        let rows = (0..n).map(|i| table.iter().map(|c| c.1[i].to_string()).collect());
        art.csv_with("table", "per-stride truth and indicator values", &csv_table(&names, rows), indicator_unit)?;
        let m = correlation_matrix(&table)?;
        let mut header = vec!["variable"];
        header.extend(m.labels.iter().map(String::as_str));
        let rows = m.labels.iter().zip(&m.r).map(|(l, row)| {
            let mut r = vec![l.clone()];
            r.extend(row.iter().map(f64::to_string));
            r
        });
        art.csv_with("matrix", "Pearson correlation matrix", &csv_table(&header, rows), |_| "1".to_string())?;
        art.json("matrix", "correlation matrix with labels and sample count", &m)?;
        art.svg("hinton", "Hinton diagram of the correlation matrix", &svg::hinton("Gait indicator correlation", &m.labels, &m.r))
    }
}
