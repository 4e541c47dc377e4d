//! Planar vibration-driven walker: a rigid foot, a body hinged to it through
//! a torsional spring, and a counter-rotating imbalance shaking the body
//! vertically. Coordinates are `q = (x, y, θ, φ)`: foot centre, foot tilt
//! and joint angle.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::timeseries::{Recorder, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VibrobotParams {
    pub foot_length: f64,
    pub foot_mass: f64,
    pub foot_inertia: f64,
    pub body_mass: f64,
    pub body_inertia: f64,
    /// Joint height above the foot centre line (m).
    pub joint_height: f64,
    /// Body CoM height above the joint (m).
    pub body_height: f64,
    /// Horizontal offset of the whole-robot CoM from the foot midpoint (m).
    pub x_com: f64,
    /// Torsional joint stiffness (N·m/rad).
    pub joint_stiffness: f64,
    pub joint_damping: f64,
    /// Rotor imbalance `m_e·r` of each counter-rotating rotor pair (kg·m).
    pub imbalance: f64,
    pub spin_frequency: f64,
    pub friction_coefficient: f64,
    /// Slip speed over which friction saturates (m/s).
    pub friction_velocity_scale: f64,
    /// Penalty stiffness at each foot end (N/m).
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub penetration_tolerance: f64,
    pub gravity: f64,
}

impl Default for VibrobotParams {
    fn default() -> Self {
        Self {
            foot_length: 0.2,
            foot_mass: 0.1,
            foot_inertia: 0.1 * 0.2 * 0.2 / 12.0,
            body_mass: 0.4,
            body_inertia: 4.0e-4,
            joint_height: 0.01,
            body_height: 0.05,
            x_com: 0.0,
            joint_stiffness: 4.0,
            joint_damping: 0.01,
            imbalance: 1.0e-3,
            spin_frequency: 8.0,
            friction_coefficient: 0.3,
            friction_velocity_scale: 1.0e-4,
            contact_stiffness: 2.0e4,
            contact_damping: 20.0,
            penetration_tolerance: 0.01,
            gravity: 9.81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VibrobotRun {
    pub series: TimeSeries,
    /// Mean horizontal velocity after the first 20% of the run (m/s).
    pub mean_velocity: f64,
}

fn rot(a: f64, v: Vector2<f64>) -> Vector2<f64> {
    let (s, c) = a.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

impl VibrobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("foot_length", self.foot_length),
            ("foot_mass", self.foot_mass),
            ("foot_inertia", self.foot_inertia),
            ("body_mass", self.body_mass),
            ("body_inertia", self.body_inertia),
            ("joint_stiffness", self.joint_stiffness),
            ("spin_frequency", self.spin_frequency),
            ("friction_velocity_scale", self.friction_velocity_scale),
            ("contact_stiffness", self.contact_stiffness),
            ("penetration_tolerance", self.penetration_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("vibrobot {name} must be positive")));
            }
        }
        for (name, v) in [
            ("joint_damping", self.joint_damping),
            ("imbalance", self.imbalance),
            ("friction_coefficient", self.friction_coefficient),
            ("contact_damping", self.contact_damping),
            ("gravity", self.gravity),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("vibrobot {name} must be >= 0")));
            }
        }
        if !(self.x_com.abs() < 0.5 * self.foot_length) {
            return Err(invalid("vibrobot |x_com| must be below half the foot length"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.foot_mass + self.body_mass
    }

    // Body CoM relative to the joint in the body frame.
    fn body_offset(&self) -> Vector2<f64> {
        Vector2::new(self.x_com * self.total_mass() / self.body_mass, self.body_height)
    }

    fn joint_offset(&self) -> Vector2<f64> {
        Vector2::new(0.0, self.joint_height)
    }

    /// Generalised accelerations and the foot-end penetrations.
    fn accel(&self, t: f64, q: &Vector4<f64>, qd: &Vector4<f64>) -> Result<(Vector4<f64>, f64)> {
        let (th, ph) = (q[2], q[3]);
        let (thd, phd) = (qd[2], qd[3]);
        let r_j = rot(th, self.joint_offset());
        let r_b = rot(th + ph, self.body_offset());
        // Body CoM Jacobian columns for θ and φ.
        let jb_th = perp(r_j) + perp(r_b);
        let jb_ph = perp(r_b);
        let jb = |f: Vector2<f64>| Vector4::new(f.x, f.y, jb_th.dot(&f), jb_ph.dot(&f));

        let (mf, mb) = (self.foot_mass, self.body_mass);
        let mut m = Matrix4::zeros();
        m[(0, 0)] = mf + mb;
        m[(1, 1)] = mf + mb;
        m[(0, 2)] = mb * jb_th.x;
        m[(1, 2)] = mb * jb_th.y;
        m[(0, 3)] = mb * jb_ph.x;
        m[(1, 3)] = mb * jb_ph.y;
        m[(2, 2)] = self.foot_inertia + self.body_inertia + mb * jb_th.norm_squared();
        m[(2, 3)] = self.body_inertia + mb * jb_th.dot(&jb_ph);
        m[(3, 3)] = self.body_inertia + mb * jb_ph.norm_squared();
        for i in 0..4 {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }

        // Centripetal acceleration of the body CoM.
        let w = thd + phd;
        let centripetal = -thd * thd * r_j - w * w * r_b;

        let omega = 2.0 * PI * self.spin_frequency;
        let shake = self.imbalance * omega * omega * (omega * t).sin();
        let mut gen = jb(Vector2::new(0.0, -mb * self.gravity + shake) - mb * centripetal);
        gen[1] -= mf * self.gravity;
        gen[3] -= self.joint_stiffness * ph + self.joint_damping * phd;

        let mut depth = 0.0f64;
        for side in [-1.0, 1.0] {
            let r_e = rot(th, Vector2::new(0.5 * side * self.foot_length, 0.0));
            let p_y = q[1] + r_e.y;
            let pen = -p_y;
            if pen <= 0.0 {
                continue;
            }
            depth = depth.max(pen);
            let je = perp(r_e);
            let v = Vector2::new(qd[0], qd[1]) + thd * je;
            let normal = (self.contact_stiffness * pen - self.contact_damping * v.y).max(0.0);
            let friction = -self.friction_coefficient * normal * (v.x / self.friction_velocity_scale).tanh();
            let f = Vector2::new(friction, normal);
            gen[0] += f.x;
            gen[1] += f.y;
            gen[2] += je.dot(&f);
        }

        let qdd = m.cholesky().ok_or(Error::NotPositiveDefinite)?.solve(&gen);
        Ok((qdd, depth))
    }

    /// Whole-robot CoM horizontal position.
    fn com_x(&self, q: &Vector4<f64>) -> f64 {
        let p_b = q[0] + rot(q[2], self.joint_offset()).x + rot(q[2] + q[3], self.body_offset()).x;
        (self.foot_mass * q[0] + self.body_mass * p_b) / self.total_mass()
    }
}

/// Integrates the walker with fixed-step RK4 from rest on the ground.
pub fn simulate_vibrobot(p: &VibrobotParams, duration: f64, dt: f64) -> Result<VibrobotRun> {
    p.validate()?;
    if !(dt > 0.0) || dt * p.spin_frequency > 1.0 / 200.0 + 1e-12 {
        return Err(invalid("dt must resolve the spin period with at least 200 steps"));
    }
    if !(duration > 0.0) {
        return Err(invalid("duration must be positive"));
    }
    let steps = (duration / dt).round() as usize;
    let y0 = -p.total_mass() * p.gravity / (2.0 * p.contact_stiffness);
    let mut q = Vector4::new(0.0, y0, 0.0, 0.0);
    let mut qd = Vector4::zeros();
    let names = ["x", "y", "theta", "phi", "vx", "com_x"];
    let mut rec = Recorder::new(&names, steps + 1);
    let row = |q: &Vector4<f64>, qd: &Vector4<f64>| [q[0], q[1], q[2], q[3], qd[0], p.com_x(q)];
    rec.push(&row(&q, &qd));
    let mut com = Vec::with_capacity(steps + 1);
    com.push(p.com_x(&q));
    for n in 0..steps {
        let t = n as f64 * dt;
        let (a1, d) = p.accel(t, &q, &qd)?;
        if d > p.penetration_tolerance {
            return Err(Error::Penetration { time: t, depth: d });
        }
        let (a2, _) = p.accel(t + 0.5 * dt, &(q + 0.5 * dt * qd), &(qd + 0.5 * dt * a1))?;
        let qd2 = qd + 0.5 * dt * a1;
        let (a3, _) = p.accel(t + 0.5 * dt, &(q + 0.5 * dt * qd2), &(qd + 0.5 * dt * a2))?;
        let qd3 = qd + 0.5 * dt * a2;
        let (a4, _) = p.accel(t + dt, &(q + dt * qd3), &(qd + dt * a3))?;
        let qd4 = qd + dt * a3;
        q += dt / 6.0 * (qd + 2.0 * qd2 + 2.0 * qd3 + qd4);
        qd += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        if q.iter().chain(qd.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t + dt });
        }
        rec.push(&row(&q, &qd));
        com.push(p.com_x(&q));
    }
    let skip = steps / 5;
    let mean_velocity = (com[steps] - com[skip]) / ((steps - skip) as f64 * dt);
    Ok(VibrobotRun {
        series: rec.finish(dt, 0.0)?,
        mean_velocity,
    })
}
