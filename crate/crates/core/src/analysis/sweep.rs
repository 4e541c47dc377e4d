//! Frequency sweeps and frequency–tunable resonance maps of the hopper.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::envelope::steady_amplitude;
use crate::error::{invalid, Error, Result};
use crate::plant::hopper::{simulate_hopper, simulate_hopper_from, HopperPlant};
use crate::springs::Tunable;
use crate::timeseries::TimeSeries;

/// Channel whose oscillation defines the hopping amplitude.
pub const AMPLITUDE_CHANNEL: &str = "y_body";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// Drive cycles simulated at each frequency.
    pub dwell_cycles: usize,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            dwell_cycles: 24,
            dt: 5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub direction: Direction,
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Whether the settled half of each dwell contained a liftoff.
    pub flight: Vec<bool>,
    pub jump_frequency: Option<f64>,
}

/// Width of the hysteresis loop between an up and a down sweep.
pub fn hysteresis_width(up: &SweepResult, down: &SweepResult) -> Option<f64> {
    Some((up.jump_frequency? - down.jump_frequency?).abs())
}

struct Dwell {
    amplitude: f64,
    flight: bool,
}

fn measure(ts: &TimeSeries, f: f64, settings: &SweepSettings) -> Result<Dwell> {
    let cycles = (settings.dwell_cycles / 3).max(1);
    let amplitude = steady_amplitude(ts, AMPLITUDE_CHANNEL, cycles, f)?;
    let settle = ts.t0 + 0.5 * ts.duration();
    let flight = ts.events().iter().any(|e| e.kind == "liftoff" && e.time >= settle);
    Ok(Dwell { amplitude, flight })
}

fn check_settings(settings: &SweepSettings) -> Result<()> {
    if settings.dwell_cycles < 3 || !(settings.dt > 0.0) {
        return Err(invalid("sweeps need dwell_cycles >= 3 and dt > 0"));
    }
    Ok(())
}

fn dwell_duration(f: f64, settings: &SweepSettings) -> f64 {
    settings.dwell_cycles as f64 / f
}

/// Frequency grid from `lo` to `hi` inclusive in steps of `step`.
pub fn frequency_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && step > 0.0) {
        return Err(invalid("frequency range must be positive and ordered with step > 0"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// Quasi-static sweep carrying the hybrid state (and drive phase) from one
/// frequency to the next.
pub fn frequency_sweep(
    plant: &HopperPlant,
    f_range: (f64, f64),
    step: f64,
    direction: Direction,
    settings: &SweepSettings,
) -> Result<SweepResult> {
    check_settings(settings)?;
    let mut frequencies = frequency_grid(f_range.0, f_range.1, step)?;
    if direction == Direction::Down {
        frequencies.reverse();
    }
    let static_deflection = plant.static_deflection()?;
    let mut state = plant.static_state()?;
    let mut amplitudes = Vec::with_capacity(frequencies.len());
    let mut flight = Vec::with_capacity(frequencies.len());
    for &f in &frequencies {
        let at = |e: Error| Error::AtFrequency {
            frequency: f,
            source: Box::new(e),
        };
        let (ts, next) = simulate_hopper_from(plant, f, dwell_duration(f, settings), settings.dt, state).map_err(at)?;
        let d = measure(&ts, f, settings).map_err(at)?;
        amplitudes.push(d.amplitude);
        flight.push(d.flight);
        state = next;
    }
    let jump_frequency = flight.iter().position(|&b| b).map(|i| frequencies[i]).or_else(|| {
        amplitudes
            .iter()
            .position(|&a| a > 3.0 * static_deflection.abs())
            .map(|i| frequencies[i])
    });
    Ok(SweepResult {
        direction,
        frequencies,
        amplitudes,
        flight,
        jump_frequency,
    })
}

/// Steady amplitude from a fresh static start; `None` if the run fails.
fn fresh_amplitude(plant: &HopperPlant, f: f64, settings: &SweepSettings) -> Option<f64> {
    let ts = simulate_hopper(plant, f, dwell_duration(f, settings), settings.dt).ok()?;
    measure(&ts, f, settings).ok().map(|d| d.amplitude)
}

fn argmax(freqs: &[f64], amps: &[Option<f64>]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (&f, a) in freqs.iter().zip(amps) {
        if let Some(a) = *a {
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((f, a));
            }
        }
    }
    best.map(|(f, _)| f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceMap {
    pub frequencies: Vec<f64>,
    /// Values of the swept tunable (Pa for pressure).
    pub pressures: Vec<f64>,
    /// `amplitudes[p][f]`; `None` marks a failed cell.
    pub amplitudes: Vec<Vec<Option<f64>>>,
    /// Per-pressure frequency of maximum amplitude.
    pub ridge: Vec<Option<f64>>,
}

impl ResonanceMap {
    /// Long-format CSV: `frequency,pressure,amplitude` (empty for failed cells).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency,pressure,amplitude\n");
        for (p, row) in self.pressures.iter().zip(&self.amplitudes) {
            for (f, a) in self.frequencies.iter().zip(row) {
                match a {
                    Some(a) => out.push_str(&format!("{f},{p},{a}\n")),
                    None => out.push_str(&format!("{f},{p},\n")),
                }
            }
        }
        out
    }
}

fn amplitude_grid(plants: &[HopperPlant], f_grid: &[f64], settings: &SweepSettings) -> Vec<Vec<Option<f64>>> {
    let cells: Vec<(usize, usize)> = (0..plants.len())
        .flat_map(|p| (0..f_grid.len()).map(move |f| (p, f)))
        .collect();
    let values: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(p, f)| fresh_amplitude(&plants[p], f_grid[f], settings))
        .collect();
    values.chunks(f_grid.len().max(1)).map(|c| c.to_vec()).collect()
}

/// Amplitude over the frequency × pressure plane, each cell from rest.
pub fn resonance_map(
    plant: &HopperPlant,
    f_grid: &[f64],
    pressure_grid: &[f64],
    settings: &SweepSettings,
) -> Result<ResonanceMap> {
    check_settings(settings)?;
    if f_grid.is_empty() || pressure_grid.is_empty() {
        return Err(invalid("resonance map needs non-empty frequency and pressure grids"));
    }
    let plants = pressure_grid
        .iter()
        .map(|&p| {
            let mut pl = plant.clone();
            pl.spring = plant.spring.with_tunable(Tunable::Pressure, p)?;
            pl.validate()?;
            Ok(pl)
        })
        .collect::<Result<Vec<_>>>()?;
    let amplitudes = amplitude_grid(&plants, f_grid, settings);
    let ridge = amplitudes.iter().map(|row| argmax(f_grid, row)).collect();
    Ok(ResonanceMap {
        frequencies: f_grid.to_vec(),
        pressures: pressure_grid.to_vec(),
        amplitudes,
        ridge,
    })
}

/// Resonance frequency (fresh-start amplitude maximum) for each ground
/// stiffness.
pub fn ground_resonance(
    plant: &HopperPlant,
    f_grid: &[f64],
    ground_stiffness: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<Option<f64>>> {
    check_settings(settings)?;
    if f_grid.is_empty() || ground_stiffness.is_empty() {
        return Err(invalid("ground scan needs non-empty grids"));
    }
    let plants = ground_stiffness
        .iter()
        .map(|&k| {
            let pl = plant.with_ground_stiffness(k);
            pl.validate()?;
            Ok(pl)
        })
        .collect::<Result<Vec<_>>>()?;
    let amplitudes = amplitude_grid(&plants, f_grid, settings);
    Ok(amplitudes.iter().map(|row| argmax(f_grid, row)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let g = frequency_grid(2.0, 3.0, 0.25).unwrap();
        assert_eq!(g, vec![2.0, 2.25, 2.5, 2.75, 3.0]);
        assert!(frequency_grid(3.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn empty_pressure_grid_is_rejected() {
        let p = HopperPlant::reference();
        assert!(resonance_map(&p, &[2.0], &[], &SweepSettings::default()).is_err());
    }

    #[test]
    fn unforced_hopper_has_no_amplitude() {
        let mut p = HopperPlant::reference();
        p.drive_amplitude = 0.0;
        let ts = simulate_hopper(&p, 3.0, 8.0, 5e-4).unwrap();
        let a = steady_amplitude(&ts, AMPLITUDE_CHANNEL, 8, 3.0).unwrap();
        assert!(a < 1e-6, "{a}");
    }

    #[test]
    fn sweep_failure_names_the_frequency() {
        let mut p = HopperPlant::reference();
        p.drive_amplitude = 0.2;
        let err = frequency_sweep(&p, (2.4, 2.8), 0.2, Direction::Up, &SweepSettings::default()).unwrap_err();
        assert!(matches!(err, Error::AtFrequency { .. }), "{err}");
    }
}
