//! Adaptive-frequency Hopf oscillator and its closed loop with a plant.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::plant::hopper::{advance_hopper, HopperPlant};
use crate::timeseries::TimeSeries;

/// Relative drift rate of ω below which a run counts as converged.
pub const CONVERGENCE_RATE: f64 = 1e-4;
/// Band around ω_final that defines the convergence time.
pub const SETTLING_BAND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackTap {
    Position,
    Velocity,
    /// Quadrature amplitude `√(q² + (q̇/ω)²)`.
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfParams {
    /// Squared limit-cycle radius.
    pub mu: f64,
    pub gamma_relax: f64,
    pub epsilon: f64,
    pub omega_init: f64,
    pub phase_lag: f64,
    pub feedback_tap: FeedbackTap,
    pub drive_gain: f64,
}

impl HopfParams {
    /// Settings used by the entrainment experiment.
    pub fn reference(omega_init: f64) -> Self {
        Self {
            mu: 1.0,
            gamma_relax: 5.0,
            epsilon: 2.0,
            omega_init,
            phase_lag: 0.0,
            feedback_tap: FeedbackTap::Position,
            drive_gain: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.gamma_relax > 0.0 && self.omega_init > 0.0) {
            return Err(invalid("Hopf oscillator needs mu, gamma_relax and omega_init > 0"));
        }
        if !(0.0..2.0 * PI).contains(&self.phase_lag) {
            return Err(invalid("phase_lag must lie in [0, 2π)"));
        }
        if !self.epsilon.is_finite() || !self.drive_gain.is_finite() {
            return Err(invalid("epsilon and drive_gain must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfState {
    pub x: f64,
    pub y: f64,
    pub omega: f64,
}

impl HopfState {
    pub fn new(p: &HopfParams) -> Self {
        Self {
            x: p.mu.sqrt(),
            y: 0.0,
            omega: p.omega_init,
        }
    }

    pub fn r(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn phase(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

fn hopf_deriv(s: &HopfState, p: &HopfParams, f: f64) -> [f64; 3] {
    let r2 = s.x * s.x + s.y * s.y;
    let r = r2.sqrt().max(1e-9);
    let radial = p.gamma_relax * (p.mu - r2);
    [
        radial * s.x - s.omega * s.y + p.epsilon * f,
        radial * s.y + s.omega * s.x,
        -p.epsilon * f * s.y / r,
    ]
}

/// One RK4 step with the feedback held constant over the step.
pub fn hopf_step(state: HopfState, p: &HopfParams, feedback: f64, dt: f64) -> Result<HopfState> {
    if !feedback.is_finite() {
        return Err(domain("non-finite feedback"));
    }
    if !(dt > 0.0) || dt * state.omega.abs() >= 0.1 {
        return Err(invalid(format!("dt·ω = {} must be below 0.1", dt * state.omega)));
    }
    let at = |s: &HopfState, k: &[f64; 3], h: f64| HopfState {
        x: s.x + h * k[0],
        y: s.y + h * k[1],
        omega: s.omega + h * k[2],
    };
    let k1 = hopf_deriv(&state, p, feedback);
    let k2 = hopf_deriv(&at(&state, &k1, 0.5 * dt), p, feedback);
    let k3 = hopf_deriv(&at(&state, &k2, 0.5 * dt), p, feedback);
    let k4 = hopf_deriv(&at(&state, &k3, dt), p, feedback);
    let mut k = [0.0; 3];
    for i in 0..3 {
        k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    Ok(at(&state, &k, dt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EntrainPlant {
    /// `m q̈ + c q̇ + k q = drive_gain · x`, released from rest at `q0`.
    Harmonic { m: f64, k: f64, c: f64, q0: f64 },
    /// The hopper with its yoke phase slaved to the oscillator phase and the
    /// stroke scaled by `drive_gain`. Taps read the body displacement.
    Hopper(HopperPlant),
}

impl EntrainPlant {
    /// 1 Hz mass-spring plant released from a unit displacement.
    pub fn reference(c: f64) -> Self {
        let w = 2.0 * PI;
        EntrainPlant::Harmonic { m: 1.0, k: w * w, c, q0: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EntrainPlant::Harmonic { m, k, c, q0 } => {
                if !(*m > 0.0 && *k >= 0.0 && *c >= 0.0 && q0.is_finite()) {
                    return Err(invalid("harmonic plant needs m > 0, k ≥ 0, c ≥ 0"));
                }
                Ok(())
            }
            EntrainPlant::Hopper(h) => h.validate(),
        }
    }

    pub fn natural_frequency(&self) -> Option<f64> {
        match self {
            EntrainPlant::Harmonic { m, k, .. } => Some((k / m).sqrt()),
            EntrainPlant::Hopper(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntrainRun {
    /// Channels: omega, x, y, q, q_dot, feedback, amplitude.
    pub series: TimeSeries,
    pub omega_final: f64,
    pub converged: bool,
    /// Set when ω left `[ω_init/10, 10·ω_init]`; the run stops there.
    pub diverged: bool,
    /// Time after which the period-averaged ω stays within
    /// [`SETTLING_BAND`] of `omega_final`.
    pub convergence_time: Option<f64>,
}

// Delay line with fractional read-out.
struct DelayLine {
    buf: VecDeque<f64>,
    cap: usize,
}

impl DelayLine {
    fn new(cap: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(cap),
            cap,
        }
    }

    fn push(&mut self, v: f64) {
        if self.buf.len() == self.cap {
            self.buf.pop_back();
        }
        self.buf.push_front(v);
    }

    /// Sample `delay` steps ago; zero before the line has filled.
    fn read(&self, delay: f64) -> f64 {
        let i = delay.floor() as usize;
        let frac = delay - i as f64;
        let at = |k: usize| self.buf.get(k).copied().unwrap_or(0.0);
        at(i) * (1.0 - frac) + at(i + 1) * frac
    }
}

enum PlantState {
    Harmonic { q: f64, v: f64 },
    Hopper { plant: HopperPlant, state: crate::plant::HybridState, rest: f64 },
}

impl PlantState {
    fn position_velocity(&self) -> (f64, f64) {
        match self {
            PlantState::Harmonic { q, v } => (*q, *v),
            PlantState::Hopper { state, rest, .. } => (state.y_body - rest, state.v_body),
        }
    }
}

fn harmonic_step(m: f64, k: f64, c: f64, q: f64, v: f64, u0: f64, u1: f64, dt: f64) -> (f64, f64) {
    let acc = |q: f64, v: f64, u: f64| (u - c * v - k * q) / m;
    let um = 0.5 * (u0 + u1);
    let (k1q, k1v) = (v, acc(q, v, u0));
    let (k2q, k2v) = (v + 0.5 * dt * k1v, acc(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v, um));
    let (k3q, k3v) = (v + 0.5 * dt * k2v, acc(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v, um));
    let (k4q, k4v) = (v + dt * k3v, acc(q + dt * k3q, v + dt * k3v, u1));
    (
        q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Closes the loop between a Hopf oscillator and a plant.
///
/// The tap signal is delayed by `phase_lag / ω` seconds, with ω the current
/// adapted frequency, before it enters the oscillator.
pub fn entrain(plant: &EntrainPlant, p: &HopfParams, duration: f64, dt: f64) -> Result<EntrainRun> {
    plant.validate()?;
    p.validate()?;
    if !(duration > 0.0 && dt > 0.0) {
        return Err(invalid("duration and dt must be positive"));
    }
    let steps = (duration / dt).round() as usize;
    let (omega_lo, omega_hi) = (p.omega_init / 10.0, p.omega_init * 10.0);
    let cap = (2.0 * PI / (omega_lo * dt)).ceil() as usize + 2;
    let mut line = DelayLine::new(cap);
    let mut osc = HopfState::new(p);
    let mut ps = match plant {
        EntrainPlant::Harmonic { q0, .. } => PlantState::Harmonic { q: *q0, v: 0.0 },
        EntrainPlant::Hopper(h) => {
            let mut driven = h.clone();
            driven.drive_amplitude *= p.drive_gain;
            let mut state = h.static_state()?;
            state.drive_phase = osc.phase();
            let rest = state.y_body;
            PlantState::Hopper { plant: driven, state, rest }
        }
    };

    let names = ["omega", "x", "y", "q", "q_dot", "feedback", "amplitude"];
    let mut cols: Vec<Vec<f64>> = names.iter().map(|_| Vec::with_capacity(steps + 1)).collect();
    let mut diverged = false;
    let mut feedback = 0.0;
    for n in 0..=steps {
        let (q, qd) = ps.position_velocity();
        let amplitude = q.hypot(qd / osc.omega);
        let tap = match p.feedback_tap {
            FeedbackTap::Position => q,
            FeedbackTap::Velocity => qd,
            FeedbackTap::Envelope => amplitude,
        };
        line.push(tap);
        if n > 0 || p.phase_lag == 0.0 {
            feedback = line.read(p.phase_lag / (osc.omega * dt));
        }
        for (col, v) in cols.iter_mut().zip([osc.omega, osc.x, osc.y, q, qd, feedback, amplitude]) {
            col.push(v);
        }
        if n == steps {
            break;
        }
        let next = hopf_step(osc, p, feedback, dt)?;
        match &mut ps {
            PlantState::Harmonic { q, v } => {
                let EntrainPlant::Harmonic { m, k, c, .. } = plant else { unreachable!() };
                (*q, *v) = harmonic_step(*m, *k, *c, *q, *v, p.drive_gain * osc.x, p.drive_gain * next.x, dt);
            }
            PlantState::Hopper { plant, state, .. } => {
                state.drive_phase = osc.phase();
                advance_hopper(plant, state, osc.omega, dt)?;
            }
        }
        osc = next;
        if !(omega_lo..=omega_hi).contains(&osc.omega) {
            diverged = true;
            break;
        }
    }

    let omega = cols[0].clone();
    let series = TimeSeries::from_columns(
        dt,
        0.0,
        names.iter().map(|s| s.to_string()).zip(cols).collect(),
    )?;
    let (omega_final, converged, convergence_time) = if diverged {
        (*omega.last().unwrap(), false, None)
    } else {
        assess(&omega, dt)
    };
    Ok(EntrainRun {
        series,
        omega_final,
        converged,
        diverged,
        convergence_time,
    })
}

// Period-averaged ω, drift over the final 10% and settling time.
fn assess(omega: &[f64], dt: f64) -> (f64, bool, Option<f64>) {
    let n = omega.len();
    let tail = (n / 10).max(2);
    let last = &omega[n - tail..];
    let omega_final = last.iter().sum::<f64>() / tail as f64;
    let half = tail / 2;
    let m1 = last[..half].iter().sum::<f64>() / half as f64;
    let m2 = last[half..].iter().sum::<f64>() / (tail - half) as f64;
    let span = (tail - half) as f64 * dt;
    let converged = omega_final > 0.0 && ((m2 - m1) / span).abs() / omega_final < CONVERGENCE_RATE;

    // Moving average over one period of the final frequency.
    let w = ((2.0 * PI / (omega_final.abs().max(1e-12) * dt)).round() as usize).clamp(1, n);
    let mut avg = Vec::with_capacity(n + 1 - w);
    let mut acc: f64 = omega[..w].iter().sum();
    avg.push(acc / w as f64);
    for i in w..n {
        acc += omega[i] - omega[i - w];
        avg.push(acc / w as f64);
    }
    let band = SETTLING_BAND * omega_final.abs();
    let settle = match avg.iter().rposition(|a| (a - omega_final).abs() > band) {
        None => Some(0.0),
        Some(i) if i + 1 < avg.len() => Some((i + w) as f64 * dt),
        Some(_) => None,
    };
    (omega_final, converged, if converged { settle } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(omega_init: f64) -> HopfParams {
        HopfParams {
            mu: 1.0,
            gamma_relax: 5.0,
            epsilon: 0.0,
            omega_init,
            phase_lag: 0.0,
            feedback_tap: FeedbackTap::Position,
            drive_gain: 1.0,
        }
    }

    #[test]
    fn unforced_cycle_settles_on_the_radius() {
        let p = HopfParams { mu: 2.0, ..params(3.0) };
        let dt = 1e-3;
        let mut s = HopfState { x: 0.1, y: 0.0, omega: 3.0 };
        let mut prev = f64::INFINITY;
        let mut t = 0.0;
        while t < 20.0 / p.gamma_relax {
            s = hopf_step(s, &p, 0.0, dt).unwrap();
            t += dt;
            let err = (s.r() - p.mu.sqrt()).abs();
            if t > 1.0 / p.gamma_relax {
                assert!(err <= prev + 1e-15);
            }
            prev = err;
        }
        assert!(prev < 1e-6);
        assert_eq!(s.omega, 3.0);
    }

    #[test]
    fn zero_feedback_matches_zero_gain() {
        let a = HopfParams { epsilon: 0.7, ..params(2.0) };
        let b = params(2.0);
        let (mut sa, mut sb) = (HopfState::new(&a), HopfState::new(&b));
        for _ in 0..1000 {
            sa = hopf_step(sa, &a, 0.0, 1e-3).unwrap();
            sb = hopf_step(sb, &b, 0.0, 1e-3).unwrap();
        }
        assert_eq!(sa, sb);
    }

    #[test]
    fn rejects_bad_input() {
        let p = params(2.0);
        let s = HopfState::new(&p);
        assert!(hopf_step(s, &p, f64::NAN, 1e-3).is_err());
        assert!(hopf_step(s, &p, 0.0, 0.06).is_err());
        assert!(HopfParams { phase_lag: 2.0 * PI, ..p }.validate().is_err());
    }

    fn adapt_to_sine(omega_init: f64, big: f64, sign: f64) -> f64 {
        let p = HopfParams { epsilon: 0.8, ..params(omega_init) };
        let mut s = HopfState::new(&p);
        let dt = 1e-3;
        for n in 0..200_000 {
            let t = n as f64 * dt;
            s = hopf_step(s, &p, sign * (big * t).sin(), dt).unwrap();
        }
        s.omega
    }

    #[test]
    fn locks_onto_a_sinusoid() {
        for w0 in [7.0, 10.0, 13.0] {
            let w = adapt_to_sine(w0, 10.0, 1.0);
            assert!((w - 10.0).abs() < 0.1, "{w0}: {w}");
        }
    }

    #[test]
    fn adaptation_is_odd_in_the_feedback() {
        let a = adapt_to_sine(8.0, 10.0, 1.0);
        let b = adapt_to_sine(8.0, 10.0, -1.0);
        assert!((a - b).abs() < 0.01 * a);
    }

    #[test]
    fn undamped_plant_pulls_omega_to_resonance() {
        let plant = EntrainPlant::reference(0.0);
        let w0 = plant.natural_frequency().unwrap();
        let run = entrain(&plant, &HopfParams::reference(0.6 * w0), 60.0, 1e-3).unwrap();
        assert!(run.converged && !run.diverged);
        assert!((run.omega_final - w0).abs() < 0.02 * w0, "{}", run.omega_final / w0);
        assert!(run.convergence_time.unwrap() < 60.0);
    }

    #[test]
    fn taps_disagree_on_a_damped_plant() {
        let plant = EntrainPlant::reference(0.3);
        let w0 = plant.natural_frequency().unwrap();
        let pos = entrain(&plant, &HopfParams::reference(0.8 * w0), 100.0, 1e-3).unwrap();
        let vel = entrain(
            &plant,
            &HopfParams {
                feedback_tap: FeedbackTap::Velocity,
                ..HopfParams::reference(0.8 * w0)
            },
            100.0,
            1e-3,
        )
        .unwrap();
        assert!((vel.omega_final - w0).abs() < 0.02 * w0);
        assert!((pos.omega_final - vel.omega_final).abs() > 0.02 * w0);
    }

    #[test]
    fn delay_line_interpolates() {
        let mut d = DelayLine::new(8);
        for v in 0..10 {
            d.push(v as f64);
        }
        assert_eq!(d.read(0.0), 9.0);
        assert_eq!(d.read(2.5), 6.5);
        assert_eq!(d.read(20.0), 0.0);
    }
}
