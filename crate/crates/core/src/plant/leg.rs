//! Single-degree-of-freedom leg released from a compressed rest.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::springs::SpringModel;
use crate::timeseries::{Recorder, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegModel {
    /// Mass seen by the spring (kg).
    pub m_eff: f64,
    pub spring: SpringModel,
    /// Viscous damping (N·s/m).
    pub damping: f64,
}

impl LegModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_eff > 0.0 && self.m_eff.is_finite()) {
            return Err(invalid("leg m_eff must be positive"));
        }
        if !(self.damping >= 0.0) {
            return Err(invalid("leg damping must be >= 0"));
        }
        self.spring.validate()
    }

    fn accel(&self, x: f64, v: f64) -> Result<f64> {
        Ok(-(self.spring.force(x)? + self.damping * v) / self.m_eff)
    }
}

/// Free decay from compression `x0` at rest; channels `x`, `v`, `energy`.
pub fn step_response(leg: &LegModel, x0: f64, duration: f64, dt: f64) -> Result<TimeSeries> {
    leg.validate()?;
    if !(dt > 0.0) || !(duration > dt) {
        return Err(invalid("step response needs dt > 0 and duration > dt"));
    }
    leg.spring.force(x0)?;
    let steps = (duration / dt).round() as usize;
    let mut rec = Recorder::new(&["x", "v", "energy"], steps + 1);
    let (mut x, mut v) = (x0, 0.0);
    let energy = |x: f64, v: f64| -> Result<f64> { Ok(0.5 * leg.m_eff * v * v + leg.spring.potential(x)?) };
    rec.push(&[x, v, energy(x, v)?]);
    for n in 0..steps {
        let (k1x, k1v) = (v, leg.accel(x, v)?);
        let (k2x, k2v) = (v + 0.5 * dt * k1v, leg.accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)?);
        let (k3x, k3v) = (v + 0.5 * dt * k2v, leg.accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)?);
        let (k4x, k4v) = (v + dt * k3v, leg.accel(x + dt * k3x, v + dt * k3v)?);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::NonFinite { time: (n + 1) as f64 * dt });
        }
        rec.push(&[x, v, energy(x, v)?]);
    }
    rec.finish(dt, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::springs::LinearSpringParams;
    use std::f64::consts::PI;

    fn leg(damping: f64) -> LegModel {
        LegModel {
            m_eff: 0.4,
            spring: SpringModel::Linear(LinearSpringParams { k: 250.0, rest_length: 0.1 }),
            damping,
        }
    }

    #[test]
    fn undamped_period_matches_harmonic_oscillator() {
        let ts = step_response(&leg(0.0), 0.01, 5.0, 1e-4).unwrap();
        let x = ts.channel("x").unwrap();
        // Downward zero crossings, linearly interpolated.
        let mut crossings = Vec::new();
        for i in 1..x.len() {
            if x[i - 1] > 0.0 && x[i] <= 0.0 {
                crossings.push(ts.time(i - 1) + ts.dt * x[i - 1] / (x[i - 1] - x[i]));
            }
        }
        let period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        let expected = (250.0f64 / 0.4).sqrt() / (2.0 * PI);
        assert!(((1.0 / period) - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn damped_energy_never_increases() {
        let ts = step_response(&leg(0.8), 0.01, 5.0, 1e-3).unwrap();
        let e = ts.channel("energy").unwrap();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(e.last().unwrap() < &(1e-3 * e[0]));
    }

    #[test]
    fn rejects_start_outside_range() {
        assert!(step_response(&leg(0.0), 0.2, 1.0, 1e-3).is_err());
    }
}
