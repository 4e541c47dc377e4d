//! Four oscillator communities, one per limb, closed through a shared body.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::kuramoto::{kuramoto_step, order_parameter, FrequencyDistribution, KuramotoCommunity};
use crate::error::{invalid, Result};
use crate::modes::PlateModel;
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunityParams {
    pub n: usize,
    pub distribution: FrequencyDistribution,
    pub coupling: f64,
    pub feedback_gain: f64,
}

impl CommunityParams {
    fn reference_omega(&self) -> f64 {
        match self.distribution {
            FrequencyDistribution::Lorentzian { center, .. } | FrequencyDistribution::Identical { center } => center,
        }
    }
}

/// Rigid body on four legs. Each plate spring is a knee: its position is the
/// hip attachment and its `k` the passive knee stiffness. Every leg mass
/// stands on its own ground spring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadBody {
    pub body: PlateModel,
    pub leg_mass: f64,
    pub knee_damping: f64,
    pub ground_stiffness: f64,
    pub ground_damping: f64,
    /// Hip force amplitude (N); leg i receives `A·cos Ψᵢ`.
    pub hip_amplitude: f64,
}

impl QuadBody {
    pub fn reference() -> Self {
        Self {
            body: PlateModel::uniform(2.0, 0.15, 0.08, 400.0),
            leg_mass: 0.1,
            knee_damping: 2.0,
            ground_stiffness: 2000.0,
            ground_damping: 5.0,
            hip_amplitude: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        if self.body.springs.len() != 4 {
            return Err(invalid("quadruped body needs exactly four knee springs"));
        }
        if !(self.leg_mass > 0.0 && self.ground_stiffness > 0.0) {
            return Err(invalid("leg mass and ground stiffness must be positive"));
        }
        if !(self.knee_damping >= 0.0 && self.ground_damping >= 0.0) || !self.hip_amplitude.is_finite() {
            return Err(invalid("damping must be ≥ 0 and hip amplitude finite"));
        }
        Ok(())
    }

    // State: q (heave, pitch, roll), u (4 legs), then their rates.
    fn deriv(&self, s: &[f64; 14], hip: &[f64; 4]) -> [f64; 14] {
        let b = &self.body;
        let mut out = [0.0; 14];
        out[..7].copy_from_slice(&s[7..]);
        let mut gen = [0.0; 3];
        for (i, sp) in b.springs.iter().enumerate() {
            let c = [1.0, -sp.x, sp.y];
            let corner = c[0] * s[0] + c[1] * s[1] + c[2] * s[2];
            let corner_v = c[0] * s[7] + c[1] * s[8] + c[2] * s[9];
            let knee = s[3 + i] - corner;
            let knee_v = s[10 + i] - corner_v;
            let f = sp.k * knee + self.knee_damping * knee_v - hip[i];
            for j in 0..3 {
                gen[j] += c[j] * f;
            }
            out[10 + i] = (-f - self.ground_stiffness * s[3 + i] - self.ground_damping * s[10 + i]) / self.leg_mass;
        }
        out[7] = gen[0] / b.mass;
        out[8] = gen[1] / b.i_pitch;
        out[9] = gen[2] / b.i_roll;
        out
    }

    fn rk4(&self, s: &[f64; 14], hip: &[f64; 4], dt: f64) -> [f64; 14] {
        let at = |k: &[f64; 14], h: f64| {
            let mut o = *s;
            for i in 0..14 {
                o[i] += h * k[i];
            }
            o
        };
        let k1 = self.deriv(s, hip);
        let k2 = self.deriv(&at(&k1, 0.5 * dt), hip);
        let k3 = self.deriv(&at(&k2, 0.5 * dt), hip);
        let k4 = self.deriv(&at(&k3, dt), hip);
        let mut o = *s;
        for i in 0..14 {
            o[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        o
    }

    fn knees(&self, s: &[f64; 14]) -> [(f64, f64); 4] {
        let mut k = [(0.0, 0.0); 4];
        for (i, sp) in self.body.springs.iter().enumerate() {
            let c = [1.0, -sp.x, sp.y];
            let corner = c[0] * s[0] + c[1] * s[1] + c[2] * s[2];
            let corner_v = c[0] * s[7] + c[1] * s[8] + c[2] * s[9];
            k[i] = (s[3 + i] - corner, s[10 + i] - corner_v);
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadParams {
    pub plant: QuadBody,
    pub communities: Vec<CommunityParams>,
    /// Start every oscillator at this phase instead of a random draw.
    #[serde(default)]
    pub initial_phase: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadRun {
    /// Channels: psi_i, r_i and knee_i for each limb.
    pub series: TimeSeries,
    /// Pairwise phase-locking values over the second half of the run.
    pub plv: Vec<Vec<f64>>,
}

/// Knee phase from its quadrature pair at the community's centre frequency.
fn knee_phase(knee: f64, knee_v: f64, omega: f64) -> f64 {
    (-knee_v / omega).atan2(knee).rem_euclid(2.0 * PI)
}

pub fn phase_locking(a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (si, co) = (x - y).sin_cos();
        s += si;
        c += co;
    }
    let n = a.len().max(1) as f64;
    (s / n).hypot(c / n)
}

pub fn quad_community_run(p: &QuadParams, duration: f64, dt: f64) -> Result<QuadRun> {
    p.plant.validate()?;
    if p.communities.len() != 4 {
        return Err(invalid("exactly four communities are required"));
    }
    if !(duration > 0.0 && dt > 0.0) {
        return Err(invalid("duration and dt must be positive"));
    }
    let mut comms = Vec::with_capacity(4);
    for (i, cp) in p.communities.iter().enumerate() {
        let mut c = KuramotoCommunity::sample(cp.n, cp.distribution, cp.coupling, cp.feedback_gain, p.seed.wrapping_add(i as u64))?;
        if let Some(phase) = p.initial_phase {
            c.theta.iter_mut().for_each(|t| *t = phase.rem_euclid(2.0 * PI));
        }
        comms.push(c);
    }
    let reference: Vec<f64> = p.communities.iter().map(|c| c.reference_omega().abs().max(1e-9)).collect();
    let steps = (duration / dt).round() as usize;
    let mut state = [0.0; 14];
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); 12];
    for n in 0..=steps {
        let knees = p.plant.knees(&state);
        let mut hip = [0.0; 4];
        for i in 0..4 {
            let (r, psi) = order_parameter(&comms[i]);
            hip[i] = p.plant.hip_amplitude * psi.cos();
            cols[i].push(psi);
            cols[4 + i].push(r);
            cols[8 + i].push(knees[i].0);
        }
        if n == steps {
            break;
        }
        for i in 0..4 {
            let ext = knee_phase(knees[i].0, knees[i].1, reference[i]);
            let ext = if p.communities[i].feedback_gain != 0.0 { Some(ext) } else { None };
            kuramoto_step(&mut comms[i], ext, dt)?;
        }
        state = p.plant.rk4(&state, &hip, dt);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::NonFinite { time: (n + 1) as f64 * dt });
        }
    }
    let half = cols[0].len() / 2;
    let mut plv = vec![vec![1.0; 4]; 4];
    for a in 0..4 {
        for b in 0..a {
            let v = phase_locking(&cols[a][half..], &cols[b][half..]);
            plv[a][b] = v;
            plv[b][a] = v;
        }
    }
    let names = ["psi", "r", "knee"];
    let named = cols
        .into_iter()
        .enumerate()
        .map(|(k, c)| (format!("{}_{}", names[k / 4], k % 4), c))
        .collect();
    Ok(QuadRun {
        series: TimeSeries::from_columns(dt, 0.0, named)?,
        plv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn community(center: f64, eta: f64) -> CommunityParams {
        CommunityParams {
            n: 20,
            distribution: FrequencyDistribution::Identical { center },
            coupling: 2.0,
            feedback_gain: eta,
        }
    }

    #[test]
    fn detuned_communities_drift_without_feedback() {
        let p = QuadParams {
            plant: QuadBody::reference(),
            communities: [1.0, 1.3, 1.6, 1.9].iter().map(|f| community(2.0 * PI * f, 0.0)).collect(),
            initial_phase: None,
            seed: 3,
        };
        let run = quad_community_run(&p, 60.0, 2e-3).unwrap();
        for a in 0..4 {
            for b in 0..a {
                assert!(run.plv[a][b] < 0.2, "{a}{b}: {}", run.plv[a][b]);
            }
        }
    }

    #[test]
    fn symmetric_setup_stays_locked() {
        let p = QuadParams {
            plant: QuadBody::reference(),
            communities: vec![community(2.0 * PI * 2.0, 1.0); 4],
            initial_phase: Some(0.3),
            seed: 0,
        };
        let run = quad_community_run(&p, 10.0, 2e-3).unwrap();
        for row in &run.plv {
            for v in row {
                assert!((v - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn needs_four_communities() {
        let p = QuadParams {
            plant: QuadBody::reference(),
            communities: vec![community(1.0, 0.0); 3],
            initial_phase: None,
            seed: 0,
        };
        assert!(quad_community_run(&p, 1.0, 1e-3).is_err());
    }
}
