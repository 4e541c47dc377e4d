//! Two-mass hopper on compliant unilateral ground.
//!
//! The upper body (frame plus the yoke-driven mass) sits on the leg spring;
//! the foot below it touches a massless spring-damper ground. The yoke mass
//! moves sinusoidally relative to the frame, which reacts with
//! `m_drive·a·(2πf)²·sin(φ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::springs::{PneumaticSpringParams, SpringModel};
use crate::timeseries::{Recorder, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundModel {
    /// Beam coefficient `c_b` (N·m²); tip stiffness is `c_b / L³`.
    pub beam_coefficient: f64,
    /// Distance between the beam supports (m).
    pub support_distance: f64,
    /// Contact damping (N·s/m).
    pub damping: f64,
    /// Height of the undeflected surface (m).
    pub surface_height: f64,
}

impl GroundModel {
    /// Ground with the given tip stiffness and a damping ratio relative to
    /// a `mass` resting on it.
    pub fn with_stiffness(stiffness: f64, support_distance: f64, damping_ratio: f64, mass: f64) -> Self {
        Self {
            beam_coefficient: stiffness * support_distance.powi(3),
            support_distance,
            damping: 2.0 * damping_ratio * (stiffness * mass).sqrt(),
            surface_height: 0.0,
        }
    }

    pub fn stiffness(&self) -> f64 {
        self.beam_coefficient / self.support_distance.powi(3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.support_distance > 0.0) {
            return Err(invalid("ground support distance must be positive"));
        }
        if !(self.stiffness() > 0.0 && self.stiffness().is_finite()) {
            return Err(invalid("ground stiffness must be positive"));
        }
        if !(self.damping >= 0.0) {
            return Err(invalid("ground damping must be >= 0"));
        }
        Ok(())
    }
}

/// Free function form of [`GroundModel::stiffness`].
pub fn ground_stiffness(ground: &GroundModel) -> f64 {
    ground.stiffness()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopperPlant {
    /// Frame mass including the actuator housing (kg).
    pub m_body: f64,
    pub m_foot: f64,
    /// Yoke-driven mass (kg).
    pub m_drive: f64,
    /// Yoke stroke amplitude (m).
    pub drive_amplitude: f64,
    pub spring: SpringModel,
    /// Viscous damping across the leg spring (N·s/m).
    pub spring_damping: f64,
    /// Body-to-foot distance at zero compression (m).
    pub rest_length: f64,
    /// Stiffness of the end stop that catches the leg below its range (N/m).
    pub stop_stiffness: f64,
    pub stop_damping: f64,
    pub ground: GroundModel,
    pub gravity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Stance,
    Flight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub mode: Mode,
    pub y_body: f64,
    pub y_foot: f64,
    pub v_body: f64,
    pub v_foot: f64,
    /// Ground deflection under the foot (m); zero in flight.
    pub ground_deflection: f64,
    /// Yoke phase (rad), carried so sweeps stay phase-continuous.
    pub drive_phase: f64,
    pub time: f64,
}

// Integrated vector: y_b, y_f, v_b, v_f, phase, drive work, dissipated energy.
type Vec7 = [f64; 7];

const CHANNELS: &[&str] = &[
    "y_body",
    "y_foot",
    "v_body",
    "v_foot",
    "compression",
    "spring_force",
    "body_foot_distance",
    "contact_force",
    "ground_deflection",
    "stance",
    "energy",
    "drive_work",
    "dissipated",
    "energy_residual",
];

impl HopperPlant {
    /// Desk-scale hopper on the bench cylinder, resonating near 2.7 Hz.
    pub fn reference() -> Self {
        let m_foot = 0.1;
        Self {
            m_body: 0.9,
            m_foot,
            m_drive: 0.1,
            drive_amplitude: 0.045,
            spring: SpringModel::Pneumatic(PneumaticSpringParams {
                max_compression: 0.075,
                ..PneumaticSpringParams::hopper_reference(1.0e-5)
            }),
            spring_damping: 2.5,
            rest_length: 0.3,
            stop_stiffness: 2.0e4,
            stop_damping: 20.0,
            ground: GroundModel::with_stiffness(5000.0, 0.5, 0.05, m_foot),
            gravity: 9.81,
        }
    }

    /// Same plant with a different ground stiffness (beam length changed).
    pub fn with_ground_stiffness(&self, k_g: f64) -> Self {
        let mut out = self.clone();
        let c_b = self.ground.beam_coefficient;
        out.ground.support_distance = (c_b / k_g).cbrt();
        out
    }

    pub fn upper_mass(&self) -> f64 {
        self.m_body + self.m_drive
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_body", self.m_body), ("m_foot", self.m_foot), ("m_drive", self.m_drive)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("hopper {name} must be positive")));
            }
        }
        if !(self.drive_amplitude >= 0.0) {
            return Err(invalid("hopper drive_amplitude must be >= 0"));
        }
        if !(self.spring_damping >= 0.0 && self.stop_stiffness > 0.0 && self.stop_damping >= 0.0) {
            return Err(invalid("hopper damping must be >= 0 and stop stiffness > 0"));
        }
        if !(self.gravity >= 0.0 && self.rest_length > 0.0) {
            return Err(invalid("hopper gravity and rest_length must be valid"));
        }
        self.spring.validate()?;
        self.ground.validate()?;
        self.equilibrium_compression()?;
        Ok(())
    }

    /// Leg force (spring, stop and damping) pushing body and foot apart.
    pub fn leg_force(&self, x: f64, x_dot: f64) -> Result<f64> {
        let (lo, _) = self.spring.working_range();
        let damping = self.spring_damping * x_dot;
        if x < lo {
            Ok(self.spring.force(lo)? + self.stop_stiffness * (x - lo) + self.stop_damping * x_dot + damping)
        } else {
            Ok(self.spring.force(x)? + damping)
        }
    }

    fn leg_potential(&self, x: f64) -> Result<f64> {
        let (lo, _) = self.spring.working_range();
        if x < lo {
            let d = x - lo;
            Ok(self.spring.potential(lo)? + self.spring.force(lo)? * d + 0.5 * self.stop_stiffness * d * d)
        } else {
            self.spring.potential(x)
        }
    }

    /// Compression at which the leg carries the upper body.
    pub fn equilibrium_compression(&self) -> Result<f64> {
        let load = self.upper_mass() * self.gravity;
        let (lo, hi) = self.spring.working_range();
        let mut a = if lo.is_finite() { lo - (load.abs() + 1.0) / self.stop_stiffness - 1.0 } else { -1.0 };
        let mut b = hi.min(a.abs() + 10.0);
        let g = |x: f64| self.leg_force(x, 0.0).map(|f| f - load);
        if g(a)? > 0.0 || g(b)? < 0.0 {
            return Err(Error::NoSolution("no static equilibrium in the spring range".into()));
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m)? < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Resting state: leg carries the body, ground carries everything.
    pub fn static_state(&self) -> Result<HybridState> {
        let x_s = self.equilibrium_compression()?;
        let k_g = self.ground.stiffness();
        let deflection = (self.upper_mass() + self.m_foot) * self.gravity / k_g;
        let y_foot = self.ground.surface_height - deflection;
        Ok(HybridState {
            mode: Mode::Stance,
            y_body: y_foot + self.rest_length - x_s,
            y_foot,
            v_body: 0.0,
            v_foot: 0.0,
            ground_deflection: deflection,
            drive_phase: 0.0,
            time: 0.0,
        })
    }

    /// Static compression of the leg for the current spring setting.
    pub fn static_deflection(&self) -> Result<f64> {
        self.equilibrium_compression()
    }

    /// Linearised stance stiffness of leg and ground in series.
    pub fn series_stiffness(&self, compression: f64) -> Result<f64> {
        let k_leg = self.spring.tangent_stiffness(compression)?;
        let k_g = self.ground.stiffness();
        Ok(1.0 / (1.0 / k_leg + 1.0 / k_g))
    }

    fn contact_force(&self, y_foot: f64, v_foot: f64) -> f64 {
        let g = &self.ground;
        g.stiffness() * (g.surface_height - y_foot) - g.damping * v_foot
    }

    fn deriv(&self, mode: Mode, omega: f64, s: &Vec7) -> Result<Vec7> {
        let [y_b, y_f, v_b, v_f, phase, _, _] = *s;
        let x = self.rest_length - (y_b - y_f);
        let (_, hi) = self.spring.working_range();
        if x > hi {
            // Time is filled in by the integrator loop.
            return Err(Error::OverCompression {
                time: f64::NAN,
                compression: x,
                max: hi,
            });
        }
        let x_dot = v_f - v_b;
        let leg = self.leg_force(x, x_dot)?;
        let drive = self.m_drive * self.drive_amplitude * omega * omega * phase.sin();
        let contact = match mode {
            Mode::Stance => self.contact_force(y_f, v_f),
            Mode::Flight => 0.0,
        };
        let (lo, _) = self.spring.working_range();
        let mut c_leg = self.spring_damping;
        if x < lo {
            c_leg += self.stop_damping;
        }
        let mut dissipation = c_leg * x_dot * x_dot;
        if mode == Mode::Stance {
            dissipation += self.ground.damping * v_f * v_f;
        }
        Ok([
            v_b,
            v_f,
            (leg + drive) / self.upper_mass() - self.gravity,
            (contact - leg) / self.m_foot - self.gravity,
            omega,
            drive * v_b,
            dissipation,
        ])
    }

    fn rk4(&self, mode: Mode, omega: f64, s: &Vec7, h: f64) -> Result<Vec7> {
        let add = |a: &Vec7, k: &Vec7, f: f64| -> Vec7 {
            let mut o = *a;
            for i in 0..7 {
                o[i] += f * k[i];
            }
            o
        };
        let k1 = self.deriv(mode, omega, s)?;
        let k2 = self.deriv(mode, omega, &add(s, &k1, 0.5 * h))?;
        let k3 = self.deriv(mode, omega, &add(s, &k2, 0.5 * h))?;
        let k4 = self.deriv(mode, omega, &add(s, &k3, h))?;
        let mut o = *s;
        for i in 0..7 {
            o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(o)
    }

    /// Mechanical energy (J): kinetic, gravitational, leg and ground storage.
    fn energy(&self, mode: Mode, s: &Vec7) -> Result<f64> {
        let [y_b, y_f, v_b, v_f, ..] = *s;
        let x = self.rest_length - (y_b - y_f);
        let mut e = 0.5 * self.upper_mass() * v_b * v_b
            + 0.5 * self.m_foot * v_f * v_f
            + self.gravity * (self.upper_mass() * y_b + self.m_foot * y_f)
            + self.leg_potential(x)?;
        if mode == Mode::Stance {
            let d = self.ground.surface_height - y_f;
            e += 0.5 * self.ground.stiffness() * d * d;
        }
        Ok(e)
    }

    // Liftoff when the contact force drops through zero; touchdown when the
    // foot reaches the surface, or starts descending while still below it.
    fn guard(&self, mode: Mode, s: &Vec7) -> f64 {
        match mode {
            Mode::Stance => self.contact_force(s[1], s[3]),
            Mode::Flight => s[1] - self.ground.surface_height,
        }
    }

    fn switches(&self, mode: Mode, before: &Vec7, after: &Vec7) -> bool {
        let (g0, g1) = (self.guard(mode, before), self.guard(mode, after));
        match mode {
            Mode::Stance => g0 >= 0.0 && g1 < 0.0,
            Mode::Flight => (g0 > 0.0 && g1 <= 0.0) || (g1 < 0.0 && before[3] > 0.0 && after[3] <= 0.0),
        }
    }

    fn check_state(&self, s: &Vec7, time: f64) -> Result<()> {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time });
        }
        let x = self.rest_length - (s[0] - s[1]);
        let (_, hi) = self.spring.working_range();
        if x > hi {
            return Err(Error::OverCompression {
                time,
                compression: x,
                max: hi,
            });
        }
        Ok(())
    }

    fn row(&self, mode: Mode, s: &Vec7, energy0: f64) -> Result<[f64; 14]> {
        let [y_b, y_f, v_b, v_f, _, work, dissipated] = *s;
        let x = self.rest_length - (y_b - y_f);
        let (lo, _) = self.spring.working_range();
        let spring_force = self.spring.force(x.max(lo))?;
        let (contact, deflection, stance) = match mode {
            Mode::Stance => (
                self.contact_force(y_f, v_f),
                self.ground.surface_height - y_f,
                1.0,
            ),
            Mode::Flight => (0.0, 0.0, 0.0),
        };
        let e = self.energy(mode, s)?;
        Ok([
            y_b,
            y_f,
            v_b,
            v_f,
            x,
            spring_force,
            y_b - y_f,
            contact,
            deflection,
            stance,
            e,
            work,
            dissipated,
            e - energy0 - work + dissipated,
        ])
    }
}

/// Simulates from the static equilibrium.
pub fn simulate_hopper(plant: &HopperPlant, f: f64, duration: f64, dt: f64) -> Result<TimeSeries> {
    let init = plant.static_state()?;
    simulate_hopper_from(plant, f, duration, dt, init).map(|(ts, _)| ts)
}

/// Integrates the hybrid dynamics from `init` for `duration` seconds and
/// returns the recording and the final state.
pub fn simulate_hopper_from(
    plant: &HopperPlant,
    f: f64,
    duration: f64,
    dt: f64,
    init: HybridState,
) -> Result<(TimeSeries, HybridState)> {
    plant.validate()?;
    if !(f > 0.0) || !(duration > 0.0) {
        return Err(invalid("drive frequency and duration must be positive"));
    }
    if !(dt > 0.0) || dt * f > 1.0 / 200.0 + 1e-12 {
        return Err(invalid(format!(
            "dt = {dt} s gives fewer than 200 steps per drive period at {f} Hz"
        )));
    }
    let omega = 2.0 * PI * f;
    let steps = (duration / dt).round() as usize;
    let mut mode = init.mode;
    let mut s: Vec7 = [
        init.y_body,
        init.y_foot,
        init.v_body,
        init.v_foot,
        init.drive_phase,
        0.0,
        0.0,
    ];
    let e0 = plant.energy(mode, &s)?;
    let mut rec = Recorder::new(CHANNELS, steps + 1);
    rec.push(&plant.row(mode, &s, e0)?);
    let t0 = init.time;

    for n in 0..steps {
        let t_start = t0 + n as f64 * dt;
        step_hybrid(plant, omega, dt, t_start, &mut mode, &mut s, &mut rec).map_err(|e| match e {
            Error::OverCompression { compression, max, .. } => Error::OverCompression {
                time: t_start,
                compression,
                max,
            },
            other => other,
        })?;
        let t_end = t_start + dt;
        plant.check_state(&s, t_end)?;
        rec.push(&plant.row(mode, &s, e0)?);
    }

    let t_final = t0 + steps as f64 * dt;
    let ts = rec.finish(dt, t0)?;
    let deflection = match mode {
        Mode::Stance => plant.ground.surface_height - s[1],
        Mode::Flight => 0.0,
    };
    let state = HybridState {
        mode,
        y_body: s[0],
        y_foot: s[1],
        v_body: s[2],
        v_foot: s[3],
        ground_deflection: deflection,
        drive_phase: s[4].rem_euclid(2.0 * PI),
        time: t_final,
    };
    Ok((ts, state))
}

// Advances one fixed step, splitting it at any mode transition found.
/// Advances `state` by one step of `dt` with the yoke turning at `omega`
/// rad/s. Events are not recorded. Used by closed-loop controllers that set
/// `drive_phase` themselves between steps.
pub fn advance_hopper(plant: &HopperPlant, state: &mut HybridState, omega: f64, dt: f64) -> Result<()> {
    let mut s: Vec7 = [
        state.y_body,
        state.y_foot,
        state.v_body,
        state.v_foot,
        state.drive_phase,
        0.0,
        0.0,
    ];
    let mut mode = state.mode;
    let mut rec = Recorder::new(&[], 0);
    let t_start = state.time;
    step_hybrid(plant, omega, dt, t_start, &mut mode, &mut s, &mut rec).map_err(|e| match e {
        Error::OverCompression { compression, max, .. } => Error::OverCompression {
            time: t_start,
            compression,
            max,
        },
        other => other,
    })?;
    plant.check_state(&s, t_start + dt)?;
    state.mode = mode;
    state.y_body = s[0];
    state.y_foot = s[1];
    state.v_body = s[2];
    state.v_foot = s[3];
    state.ground_deflection = match mode {
        Mode::Stance => plant.ground.surface_height - s[1],
        Mode::Flight => 0.0,
    };
    state.drive_phase = s[4].rem_euclid(2.0 * PI);
    state.time = t_start + dt;
    Ok(())
}

fn step_hybrid(
    plant: &HopperPlant,
    omega: f64,
    dt: f64,
    t_start: f64,
    mode: &mut Mode,
    s: &mut Vec7,
    rec: &mut Recorder,
) -> Result<()> {
    let tol = dt * 1e-3;
    let mut t_local = 0.0;
    // Each pass either finishes the step or stops at one transition.
    for _ in 0..16 {
        let h = dt - t_local;
        if h <= 0.0 {
            break;
        }
        let next = plant.rk4(*mode, omega, s, h)?;
        if !plant.switches(*mode, s, &next) {
            *s = next;
            break;
        }
        let (mut a, mut b) = (0.0, h);
        let mut at_b = next;
        while b - a > tol {
            let m = 0.5 * (a + b);
            let sm = plant.rk4(*mode, omega, s, m)?;
            if plant.switches(*mode, s, &sm) {
                b = m;
                at_b = sm;
            } else {
                a = m;
            }
        }
        *s = at_b;
        t_local += b;
        let t_event = t_start + t_local;
        plant.check_state(s, t_event)?;
        match *mode {
            Mode::Stance => {
                // The massless ground gives back nothing it still stores.
                let d = plant.ground.surface_height - s[1];
                s[6] += 0.5 * plant.ground.stiffness() * d * d;
                *mode = Mode::Flight;
                rec.event(t_event, "liftoff");
            }
            Mode::Flight => {
                let d = plant.ground.surface_height - s[1];
                s[6] -= 0.5 * plant.ground.stiffness() * d * d;
                *mode = Mode::Stance;
                rec.event(t_event, "touchdown");
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::springs::LinearSpringParams;

    fn half_range(y: &[f64]) -> f64 {
        let max = y.iter().cloned().fold(f64::MIN, f64::max);
        let min = y.iter().cloned().fold(f64::MAX, f64::min);
        0.5 * (max - min)
    }

    fn linear_plant() -> HopperPlant {
        HopperPlant {
            m_body: 4.0,
            m_foot: 0.2,
            m_drive: 0.05,
            drive_amplitude: 0.002,
            spring: SpringModel::Linear(LinearSpringParams { k: 1500.0, rest_length: 0.2 }),
            spring_damping: 8.0,
            rest_length: 0.3,
            stop_stiffness: 1e4,
            stop_damping: 10.0,
            ground: GroundModel::with_stiffness(8000.0, 0.4, 0.05, 0.2),
            gravity: 9.81,
        }
    }

    // Complex 2x2 solve for the linearised body/foot chain.
    fn linear_body_amplitude(p: &HopperPlant, f: f64) -> f64 {
        let w = 2.0 * PI * f;
        let k = p.spring.tangent_stiffness(0.0).unwrap();
        let (c, kg, cg) = (p.spring_damping, p.ground.stiffness(), p.ground.damping);
        type C = (f64, f64);
        let mul = |a: C, b: C| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        let sub = |a: C, b: C| (a.0 - b.0, a.1 - b.1);
        let a11 = (k - p.upper_mass() * w * w, w * c);
        let a12 = (-k, -w * c);
        let a22 = (k + kg - p.m_foot * w * w, w * (c + cg));
        let det = sub(mul(a11, a22), mul(a12, a12));
        let f0 = p.m_drive * p.drive_amplitude * w * w;
        let num = (a22.0 * f0, a22.1 * f0);
        (num.0.hypot(num.1)) / det.0.hypot(det.1)
    }

    #[test]
    fn unforced_plant_settles_to_rest() {
        let mut p = HopperPlant::reference();
        p.drive_amplitude = 0.0;
        let mut init = p.static_state().unwrap();
        init.y_body += 0.005;
        let ts = simulate_hopper_from(&p, 3.0, 20.0, 5e-4, init).unwrap().0;
        let n = ts.len() - 1;
        let vb = ts.channel("v_body").unwrap()[n];
        let vf = ts.channel("v_foot").unwrap()[n];
        let ke = 0.5 * p.upper_mass() * vb * vb + 0.5 * p.m_foot * vf * vf;
        assert!(ke < 1e-9, "kinetic energy {ke}");
    }

    #[test]
    fn small_drive_matches_linear_response() {
        let p = linear_plant();
        for f in [2.0, 3.0, 4.5] {
            let ts = simulate_hopper(&p, f, 12.0, 2e-4).unwrap();
            assert!(ts.events().is_empty());
            let y = ts.channel("y_body").unwrap();
            let sim = half_range(&y[y.len() * 3 / 4..]);
            let exact = linear_body_amplitude(&p, f);
            assert!((sim - exact).abs() / exact < 0.05, "f={f} sim={sim} exact={exact}");
        }
    }

    #[test]
    fn resonance_drive_produces_flight() {
        let p = HopperPlant::reference();
        let ts = simulate_hopper(&p, 2.75, 10.0, 5e-4).unwrap();
        let late = ts.events().iter().filter(|e| e.kind == "liftoff" && e.time > 5.0).count();
        assert!(late as f64 >= 5.0 * 2.75 * 0.9, "{late} liftoffs");
    }

    #[test]
    fn events_alternate_and_contact_stays_compressive() {
        let p = HopperPlant::reference();
        let ts = simulate_hopper(&p, 2.75, 6.0, 5e-4).unwrap();
        let kinds: Vec<&str> = ts.events().iter().map(|e| e.kind.as_str()).collect();
        assert!(!kinds.is_empty());
        assert_eq!(kinds[0], "liftoff");
        assert!(kinds.windows(2).all(|w| w[0] != w[1]));
        let stance = ts.channel("stance").unwrap();
        let contact = ts.channel("contact_force").unwrap();
        for (s, c) in stance.iter().zip(contact) {
            if *s > 0.5 {
                assert!(*c >= -1e-9, "contact {c}");
            } else {
                assert_eq!(*c, 0.0);
            }
        }
    }

    #[test]
    fn energy_bookkeeping_closes() {
        let p = HopperPlant::reference();
        for f in [2.0, 2.75, 3.5] {
            let ts = simulate_hopper(&p, f, 8.0, 5e-4).unwrap();
            let work: f64 = ts.channel("drive_work").unwrap().iter().map(|w| w.abs()).fold(0.0, f64::max);
            let residual = ts.channel("energy_residual").unwrap().iter().map(|r| r.abs()).fold(0.0, f64::max);
            assert!(residual < 1e-3 * work, "f={f} residual={residual} work={work}");
        }
    }

    #[test]
    fn halving_dt_keeps_amplitude() {
        let p = HopperPlant::reference();
        let amp = |dt: f64| {
            let ts = simulate_hopper(&p, 3.3, 8.0, dt).unwrap();
            let y = ts.channel("y_body").unwrap();
            half_range(&y[y.len() * 3 / 4..])
        };
        let (a, b) = (amp(5e-4), amp(2.5e-4));
        assert!((a - b).abs() / b < 5e-3, "{a} vs {b}");
    }

    #[test]
    fn ground_stiffness_follows_cubic_law() {
        let g = GroundModel::with_stiffness(4000.0, 0.4, 0.05, 0.1);
        let mut half = g;
        half.support_distance = 0.2;
        assert!((ground_stiffness(&half) / ground_stiffness(&g) - 8.0).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for l in [0.5, 1.0, 2.0, 10.0, 100.0] {
            let k = ground_stiffness(&GroundModel { support_distance: l, ..g });
            assert!(k < last && k > 0.0);
            last = k;
        }
    }

    #[test]
    fn equal_tip_stiffness_grounds_are_equivalent() {
        let a = HopperPlant::reference();
        let mut b = a.clone();
        b.ground.support_distance *= 2.0;
        b.ground.beam_coefficient *= 8.0;
        let ta = simulate_hopper(&a, 2.75, 3.0, 5e-4).unwrap();
        let tb = simulate_hopper(&b, 2.75, 3.0, 5e-4).unwrap();
        let (ya, yb) = (ta.channel("y_body").unwrap(), tb.channel("y_body").unwrap());
        let diff = ya.iter().zip(yb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
        assert_eq!(ta.events().len(), tb.events().len());
    }

    #[test]
    fn coarse_step_is_rejected() {
        let p = HopperPlant::reference();
        assert!(matches!(simulate_hopper(&p, 3.0, 1.0, 0.01), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn over_compression_is_reported() {
        let mut p = HopperPlant::reference();
        p.drive_amplitude = 0.2;
        match simulate_hopper(&p, 2.6, 10.0, 5e-4) {
            Err(Error::OverCompression { time, compression, max }) => {
                assert!(time > 0.0 && compression > max);
            }
            other => panic!("expected over-compression, got {other:?}"),
        }
    }
}
