//! Extremum-seeking resonance keeper: the drive frequency is fixed and the
//! leg's tunable is moved to hold the hopping amplitude at its peak.

use serde::{Deserialize, Serialize};

use crate::analysis::envelope::steady_amplitude;
use crate::analysis::sweep::AMPLITUDE_CHANNEL;
use crate::error::{invalid, Result};
use crate::plant::hopper::{simulate_hopper_from, HopperPlant};
use crate::springs::{SpringModel, Tunable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerParams {
    /// Probe offset in tunable units.
    pub probe: f64,
    /// Drive cycles per epoch, split evenly between the two probes.
    pub epoch_cycles: usize,
    /// Step in probe units per unit of relative amplitude difference.
    pub gain: f64,
    /// Relative amplitude difference below which no step is taken.
    pub deadband: f64,
    /// Largest step per epoch (tunable units).
    pub max_step: f64,
    pub tunable: Tunable,
    pub bounds: (f64, f64),
    /// Drive cycles at the end of each probe used to read the amplitude.
    pub measure_cycles: usize,
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.probe > 0.0 && self.max_step > 0.0 && self.gain.is_finite()) {
            return Err(invalid("tracker needs probe > 0, max_step > 0 and finite gain"));
        }
        if self.epoch_cycles < 2 {
            return Err(invalid("tracker epoch must span at least 2 drive cycles"));
        }
        if !(self.bounds.0 < self.bounds.1) {
            return Err(invalid("tracker bounds must be ordered"));
        }
        if !(self.deadband >= 0.0) {
            return Err(invalid("deadband must be ≥ 0"));
        }
        if self.measure_cycles == 0 || 3 * self.measure_cycles > self.epoch_cycles / 2 {
            return Err(invalid("measure_cycles must be ≥ 1 and fit three times into half an epoch"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStep {
    /// Epoch at whose start the new ground applies.
    pub epoch: usize,
    pub stiffness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Tunable value the epoch was probed around.
    pub tunable: f64,
    pub amplitude_plus: f64,
    pub amplitude_minus: f64,
    /// Mean of the two probe amplitudes.
    pub amplitude: f64,
    pub ground_stiffness: f64,
    pub leg_stiffness: f64,
    pub series_stiffness: f64,
    pub step: f64,
    /// The step was clipped by a tunable bound.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerRun {
    pub drive_frequency: f64,
    pub epochs: Vec<EpochRecord>,
}

impl TrackerRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,tunable,amplitude,amplitude_plus,amplitude_minus,ground_stiffness,leg_stiffness,series_stiffness,step,saturated\n",
        );
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.epoch,
                e.tunable,
                e.amplitude,
                e.amplitude_plus,
                e.amplitude_minus,
                e.ground_stiffness,
                e.leg_stiffness,
                e.series_stiffness,
                e.step,
                u8::from(e.saturated)
            ));
        }
        out
    }
}

fn with_knob(plant: &HopperPlant, knob: Tunable, u: f64) -> Result<HopperPlant> {
    let mut p = plant.clone();
    p.spring = plant.spring.with_tunable(knob, u)?;
    Ok(p)
}

/// Runs `epochs` epochs at drive frequency `f` (Hz), applying ground
/// stiffness steps at the scheduled epochs.
pub fn resonance_tracker(
    plant: &HopperPlant,
    t: &TrackerParams,
    f: f64,
    schedule: &[GroundStep],
    epochs: usize,
    dt: f64,
) -> Result<TrackerRun> {
    plant.validate()?;
    t.validate()?;
    if !(f > 0.0) {
        return Err(invalid("drive frequency must be positive"));
    }
    let mut u = plant
        .spring
        .tunable_value(t.tunable)
        .ok_or_else(|| invalid(format!("{:?} does not apply to the plant's spring", t.tunable)))?;
    let (lo, hi) = t.bounds;
    if !(lo..=hi).contains(&u) {
        return Err(invalid("initial tunable lies outside the tracker bounds"));
    }
    if schedule.iter().any(|s| !(s.stiffness > 0.0)) {
        return Err(invalid("scheduled ground stiffness must be positive"));
    }
    let half = t.epoch_cycles as f64 / 2.0 / f;
    let mut current = plant.clone();
    let mut state = current.static_state()?;
    let mut records = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        for s in schedule.iter().filter(|s| s.epoch == epoch) {
            current = current.with_ground_stiffness(s.stiffness);
        }
        let mut probe_amp = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let v = (u + sign * t.probe).clamp(lo, hi);
            let probed = with_knob(&current, t.tunable, v)?;
            let (ts, next) = simulate_hopper_from(&probed, f, half, dt, state)?;
            state = next;
            probe_amp[k] = steady_amplitude(&ts, AMPLITUDE_CHANNEL, t.measure_cycles, f)?;
        }
        let amplitude = 0.5 * (probe_amp[0] + probe_amp[1]);
        let at_u = with_knob(&current, t.tunable, u)?;
        let x_op = at_u.equilibrium_compression()?;
        let leg = at_u.spring.tangent_stiffness(x_op)?;
        let series = at_u.series_stiffness(x_op)?;
        let rel = if amplitude > 0.0 {
            (probe_amp[0] - probe_amp[1]) / amplitude
        } else {
            0.0
        };
        let mut step = 0.0;
        let mut saturated = false;
        if rel.abs() > t.deadband {
            let want = (t.gain * t.probe * rel).clamp(-t.max_step, t.max_step);
            let next = (u + want).clamp(lo, hi);
            saturated = next != u + want;
            step = next - u;
            u = next;
        }
        records.push(EpochRecord {
            epoch,
            tunable: u - step,
            amplitude_plus: probe_amp[0],
            amplitude_minus: probe_amp[1],
            amplitude,
            ground_stiffness: current.ground.stiffness(),
            leg_stiffness: leg,
            series_stiffness: series,
            step,
            saturated,
        });
    }
    Ok(TrackerRun {
        drive_frequency: f,
        epochs: records,
    })
}

/// Scenario used by the tracker experiment: the reference hopper with a
/// short stroke, light leg damping and a ground about as stiff as the leg,
/// so the series stiffness is sensitive to both.
pub fn tracker_plant() -> HopperPlant {
    let mut p = HopperPlant::reference();
    p.drive_amplitude = 0.008;
    p.spring_damping = 1.0;
    p.with_ground_stiffness(400.0)
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            probe: 4.0e3,
            epoch_cycles: 48,
            gain: 10.0,
            deadband: 0.02,
            max_step: 1.0e4,
            tunable: Tunable::Pressure,
            bounds: (1.5e5, 3.5e5),
            measure_cycles: 3,
        }
    }
}

/// Direction of a tunable change in stiffness terms (+1 stiffer).
pub fn stiffness_direction(knob: Tunable, delta: f64) -> f64 {
    SpringModel::stiffening_sign(knob) * delta.signum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 2.05;

    fn at_pressure(p: f64) -> HopperPlant {
        let mut plant = tracker_plant();
        plant.spring = plant.spring.with_tunable(Tunable::Pressure, p).unwrap();
        plant
    }

    #[test]
    fn converged_start_holds_still() {
        let warm = resonance_tracker(&at_pressure(2.45e5), &TrackerParams::default(), F, &[], 12, 5e-4).unwrap();
        let settled = warm.epochs.last().unwrap().tunable;
        let run = resonance_tracker(&at_pressure(settled), &TrackerParams::default(), F, &[], 15, 5e-4).unwrap();
        for e in &run.epochs {
            assert!((e.tunable - settled).abs() <= TrackerParams::default().probe, "{e:?}");
        }
    }

    #[test]
    fn bounds_are_hard() {
        let t = TrackerParams {
            bounds: (2.4e5, 2.5e5),
            ..TrackerParams::default()
        };
        let run = resonance_tracker(&at_pressure(2.45e5), &t, F, &[GroundStep { epoch: 2, stiffness: 600.0 }], 8, 5e-4).unwrap();
        assert!(run.epochs.iter().all(|e| (2.4e5..=2.5e5).contains(&e.tunable)));
        assert!(run.epochs.iter().any(|e| e.saturated));
    }

    #[test]
    fn invalid_settings() {
        let bad = [
            TrackerParams { probe: 0.0, ..TrackerParams::default() },
            TrackerParams { epoch_cycles: 1, ..TrackerParams::default() },
            TrackerParams { bounds: (3.0e5, 2.0e5), ..TrackerParams::default() },
            TrackerParams { measure_cycles: 20, ..TrackerParams::default() },
        ];
        for t in bad {
            assert!(t.validate().is_err(), "{t:?}");
        }
        let t = TrackerParams { tunable: Tunable::JackTap, ..TrackerParams::default() };
        assert!(resonance_tracker(&tracker_plant(), &t, F, &[], 1, 5e-4).is_err());
        assert!(resonance_tracker(&at_pressure(1.0e5), &TrackerParams::default(), F, &[], 1, 5e-4).is_err());
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let run = resonance_tracker(&tracker_plant(), &TrackerParams::default(), F, &[], 2, 5e-4).unwrap();
        assert_eq!(run.to_csv().lines().count(), 3);
    }
}
