use compliance_core::analysis::{
    frequency_grid, frequency_sweep, ground_resonance, hysteresis_width, resonance_map, Direction, SweepResult,
    SweepSettings,
};
use compliance_core::controllers::{resonance_tracker, tracker_plant, GroundStep, TrackerParams};
use compliance_core::plant::HopperPlant;
use compliance_core::springs::Tunable;
use compliance_core::svg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{checked, Block};
use crate::artifacts::{cell, csv_table, Artifacts};
use crate::CliError;

fn at_pressure(plant: &HopperPlant, p: f64) -> compliance_core::Result<HopperPlant> {
    let mut pl = plant.clone();
    pl.spring = plant.spring.with_tunable(Tunable::Pressure, p)?;
    pl.validate()?;
    Ok(pl)
}

fn check_grid(lo: f64, hi: f64, step: f64) -> Result<(), String> {
    frequency_grid(lo, hi, step).map(|_| ()).map_err(|e| format!("frequency grid: {e}"))
}

fn check_sweep(s: &SweepSettings) -> Result<(), String> {
    if s.dwell_cycles < 4 || !(s.dt > 0.0) {
        return Err("sweep needs dwell_cycles >= 4 and dt > 0".into());
    }
    Ok(())
}

/// Quasi-static up and down sweeps at each pressure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopperSweep {
    pub plant: HopperPlant,
    /// Upper chamber pressures (Pa).
    pub pressures: Vec<f64>,
    /// Swept drive frequencies, inclusive (Hz).
    pub f_min: f64,
    pub f_max: f64,
    pub f_step: f64,
    pub sweep: SweepSettings,
}

impl Default for HopperSweep {
    fn default() -> Self {
        Self {
            plant: HopperPlant::reference(),
            pressures: vec![2.5e5, 3.0e5],
            f_min: 2.0,
            f_max: 4.5,
            f_step: 0.05,
            sweep: SweepSettings::default(),
        }
    }
}

#[derive(Serialize)]
struct Hysteresis {
    pressure: f64,
    jump_up: Option<f64>,
    jump_down: Option<f64>,
    width: Option<f64>,
}

impl Block for HopperSweep {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        if self.pressures.is_empty() {
            return Err("pressures must not be empty".into());
        }
        check_grid(self.f_min, self.f_max, self.f_step)?;
        check_sweep(&self.sweep)?;
        for &p in &self.pressures {
            checked(at_pressure(&self.plant, p).map(|_| ()), &format!("pressure {p}"))?;
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let jobs: Vec<(f64, Direction)> = self
            .pressures
            .iter()
            .flat_map(|&p| [(p, Direction::Up), (p, Direction::Down)])
            .collect();
        let results: Vec<SweepResult> = jobs
            .par_iter()
            .map(|&(p, d)| {
                let pl = at_pressure(&self.plant, p)?;
                frequency_sweep(&pl, (self.f_min, self.f_max), self.f_step, d, &self.sweep)
            })
            .collect::<compliance_core::Result<_>>()?;

        let mut rows = Vec::new();
        for ((p, _), r) in jobs.iter().zip(&results) {
            let dir = match r.direction {
                Direction::Up => "up",
                Direction::Down => "down",
            };
            for i in 0..r.frequencies.len() {
                rows.push(vec![
                    p.to_string(),
                    dir.to_string(),
                    r.frequencies[i].to_string(),
                    r.amplitudes[i].to_string(),
                    u8::from(r.flight[i]).to_string(),
                ]);
            }
        }
        art.csv(
            "sweeps",
            "steady amplitude at each step of each sweep",
            &csv_table(&["pressure", "direction", "frequency", "amplitude", "flight"], rows),
            &[("pressure", "Pa"), ("direction", "1"), ("frequency", "Hz"), ("amplitude", "m"), ("flight", "1")],
        )?;
        let summary: Vec<Hysteresis> = results
            .chunks(2)
            .zip(&self.pressures)
            .map(|(pair, &pressure)| Hysteresis {
                pressure,
                jump_up: pair[0].jump_frequency,
                jump_down: pair[1].jump_frequency,
                width: hysteresis_width(&pair[0], &pair[1]),
            })
            .collect();
        art.json("hysteresis", "jump frequencies (Hz) and loop width (Hz) per pressure", &summary)?;

        let labels: Vec<String> = jobs
            .iter()
            .map(|(p, d)| format!("{:.2} bar {}", p / 1e5, if *d == Direction::Up { "up" } else { "down" }))
            .collect();
        let series: Vec<(&str, &[f64], &[f64])> = labels
            .iter()
            .zip(&results)
            .map(|(l, r)| (l.as_str(), r.frequencies.as_slice(), r.amplitudes.as_slice()))
            .collect();
        art.svg("sweeps", "amplitude against frequency", &svg::line_plot("Frequency sweeps", "frequency (Hz)", "amplitude (m)", &series))
    }
}

/// Fresh-start amplitude over frequency × pressure, and resonance against
/// ground stiffness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceMapBlock {
    pub plant: HopperPlant,
    pub f_min: f64,
    pub f_max: f64,
    pub f_step: f64,
    /// Pressure grid (Pa).
    pub pressures: Vec<f64>,
    /// Ground stiffness levels at the plant's own pressure (N/m); may be empty.
    pub ground_stiffness: Vec<f64>,
    pub sweep: SweepSettings,
}

impl Default for ResonanceMapBlock {
    fn default() -> Self {
        Self {
            plant: HopperPlant::reference(),
            f_min: 2.0,
            f_max: 4.0,
            f_step: 0.05,
            pressures: vec![2.5e5, 2.75e5, 3.0e5, 3.3e5],
            ground_stiffness: vec![5000.0, 2500.0, 1500.0, 1000.0],
            sweep: SweepSettings::default(),
        }
    }
}

impl Block for ResonanceMapBlock {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        if self.pressures.is_empty() {
            return Err("pressures must not be empty".into());
        }
        check_grid(self.f_min, self.f_max, self.f_step)?;
        check_sweep(&self.sweep)?;
        for &p in &self.pressures {
            checked(at_pressure(&self.plant, p).map(|_| ()), &format!("pressure {p}"))?;
        }
        for &k in &self.ground_stiffness {
            checked(self.plant.with_ground_stiffness(k).validate(), &format!("ground stiffness {k}"))?;
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let f = frequency_grid(self.f_min, self.f_max, self.f_step)?;
        let map = resonance_map(&self.plant, &f, &self.pressures, &self.sweep)?;
        art.csv(
            "map",
            "steady amplitude per (frequency, pressure) cell; empty where the run failed",
            &map.to_csv(),
            &[("frequency", "Hz"), ("pressure", "Pa"), ("amplitude", "m")],
        )?;
        let rows = self.pressures.iter().zip(&map.ridge).map(|(p, r)| vec![p.to_string(), cell(*r)]);
        art.csv(
            "ridge",
            "frequency of largest amplitude per pressure",
            &csv_table(&["pressure", "ridge_frequency"], rows),
            &[("pressure", "Pa"), ("ridge_frequency", "Hz")],
        )?;
        let overlay: Vec<(f64, f64)> = map.ridge.iter().zip(&self.pressures).filter_map(|(r, p)| r.map(|f| (f, p / 1e5))).collect();
        let bars: Vec<f64> = self.pressures.iter().map(|p| p / 1e5).collect();
        art.svg(
            "map",
            "amplitude heat map with the ridge line",
            &svg::heat_map("Resonance map", "frequency (Hz)", "pressure (bar)", &f, &bars, &map.amplitudes, &overlay),
        )?;
        if !self.ground_stiffness.is_empty() {
            let g = ground_resonance(&self.plant, &f, &self.ground_stiffness, &self.sweep)?;
            let rows = self.ground_stiffness.iter().zip(&g).map(|(k, r)| vec![k.to_string(), cell(*r)]);
            art.csv(
                "ground",
                "resonance frequency per ground stiffness",
                &csv_table(&["ground_stiffness", "resonance_frequency"], rows),
                &[("ground_stiffness", "N/m"), ("resonance_frequency", "Hz")],
            )?;
            let pts: Vec<(f64, f64)> = self.ground_stiffness.iter().zip(&g).filter_map(|(k, r)| r.map(|f| (*k, f))).collect();
            let (ks, fs): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            art.svg(
                "ground",
                "resonance frequency against ground stiffness",
                &svg::line_plot("Ground stiffness", "ground stiffness (N/m)", "resonance (Hz)", &[("resonance", &ks, &fs)]),
            )?;
        }
        Ok(())
    }
}

/// Resonance tracking through a schedule of ground stiffness changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Track {
    pub plant: HopperPlant,
    /// Fixed drive frequency (Hz).
    pub drive_frequency: f64,
    pub tracker: TrackerParams,
    pub schedule: Vec<GroundStep>,
    pub epochs: usize,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for Track {
    fn default() -> Self {
        Self {
            plant: tracker_plant(),
            drive_frequency: 2.05,
            tracker: TrackerParams::default(),
            schedule: vec![GroundStep { epoch: 20, stiffness: 600.0 }],
            epochs: 55,
            dt: 5e-4,
        }
    }
}

#[derive(Serialize)]
struct TrackSummary {
    step_epoch: Option<usize>,
    amplitude_before: Option<f64>,
    series_stiffness_before: Option<f64>,
    /// Epochs after the step until the amplitude is back to 90 %.
    recovery_epochs: Option<usize>,
    final_amplitude: f64,
    final_series_stiffness: f64,
    final_tunable: f64,
}

impl Block for Track {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        checked(self.plant.validate(), "plant")?;
        checked(self.tracker.validate(), "tracker")?;
        if !(self.drive_frequency > 0.0 && self.dt > 0.0) || self.epochs == 0 {
            return Err("drive_frequency, dt and epochs must be positive".into());
        }
        if self.schedule.iter().any(|s| !(s.stiffness > 0.0) || s.epoch >= self.epochs) {
            return Err("schedule steps need stiffness > 0 and an epoch inside the run".into());
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let run = resonance_tracker(&self.plant, &self.tracker, self.drive_frequency, &self.schedule, self.epochs, self.dt)?;
        let unit = match self.tracker.tunable {
            Tunable::Pressure => "Pa",
            Tunable::JackTap => "1",
            Tunable::CoilCurrent => "A",
        };
        art.csv(
            "epochs",
            "one row per tracker epoch",
            &run.to_csv(),
            &[
                ("epoch", "1"),
                ("tunable", unit),
                ("amplitude", "m"),
                ("amplitude_plus", "m"),
                ("amplitude_minus", "m"),
                ("ground_stiffness", "N/m"),
                ("leg_stiffness", "N/m"),
                ("series_stiffness", "N/m"),
                ("step", unit),
                ("saturated", "1"),
            ],
        )?;
        let first = self.schedule.iter().map(|s| s.epoch).min();
        let before = first.and_then(|e| e.checked_sub(1)).and_then(|e| run.epochs.get(e));
        let recovery = match (first, before) {
            (Some(e0), Some(b)) => run.epochs[e0..].iter().position(|r| r.amplitude >= 0.9 * b.amplitude),
            _ => None,
        };
        let last = run.epochs.last().ok_or_else(|| CliError::Runtime("tracker produced no epochs".into()))?;
        let summary = TrackSummary {
            step_epoch: first,
            amplitude_before: before.map(|b| b.amplitude),
            series_stiffness_before: before.map(|b| b.series_stiffness),
            recovery_epochs: recovery,
            final_amplitude: last.amplitude,
            final_series_stiffness: last.series_stiffness,
            final_tunable: last.tunable,
        };
        art.json("summary", "amplitude recovery and stiffness before and after the step (SI units)", &summary)?;
        let ep: Vec<f64> = run.epochs.iter().map(|e| e.epoch as f64).collect();
        let amp: Vec<f64> = run.epochs.iter().map(|e| e.amplitude * 1e3).collect();
        let tun: Vec<f64> = run.epochs.iter().map(|e| e.tunable).collect();
        let ks: Vec<f64> = run.epochs.iter().map(|e| e.series_stiffness).collect();
        art.svg("amplitude", "amplitude per epoch", &svg::line_plot("Tracker amplitude", "epoch", "amplitude (mm)", &[("amplitude", &ep, &amp)]))?;
        art.svg("tunable", "tunable per epoch", &svg::line_plot("Tracker setting", "epoch", unit, &[("tunable", &ep, &tun)]))?;
        art.svg(
            "stiffness",
            "series stiffness per epoch",
            &svg::line_plot("Series stiffness", "epoch", "stiffness (N/m)", &[("series", &ep, &ks)]),
        )
    }
}
