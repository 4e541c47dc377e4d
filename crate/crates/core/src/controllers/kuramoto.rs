//! All-to-all Kuramoto communities with an optional external phase pull.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrequencyDistribution {
    /// Cauchy density centred on `center` with half-width `width` (rad/s).
    Lorentzian { center: f64, width: f64 },
    Identical { center: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoCommunity {
    /// Phases wrapped to [0, 2π).
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub coupling: f64,
    pub feedback_gain: f64,
}

fn wrap(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

impl KuramotoCommunity {
    /// Draws frequencies and uniform initial phases from `seed`.
    pub fn sample(n: usize, dist: FrequencyDistribution, coupling: f64, feedback_gain: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = (0..n)
            .map(|_| match dist {
                FrequencyDistribution::Lorentzian { center, width } => {
                    center + width * (PI * (rng.gen::<f64>() - 0.5)).tan()
                }
                FrequencyDistribution::Identical { center } => center,
            })
            .collect();
        let theta = (0..n).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
        let c = Self {
            theta,
            omega,
            coupling,
            feedback_gain,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_empty() || self.theta.len() != self.omega.len() {
            return Err(invalid("community needs N ≥ 1 phases with matching frequencies"));
        }
        if !(self.coupling >= 0.0) || !self.feedback_gain.is_finite() {
            return Err(invalid("coupling must be ≥ 0 and feedback gain finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// `(r, Ψ)` with `r·e^{iΨ} = (1/N) Σ e^{iθⱼ}`.
pub fn order_parameter(c: &KuramotoCommunity) -> (f64, f64) {
    mean_field(&c.theta)
}

fn mean_field(theta: &[f64]) -> (f64, f64) {
    let (mut s, mut co) = (0.0, 0.0);
    for t in theta {
        let (a, b) = t.sin_cos();
        s += a;
        co += b;
    }
    let n = theta.len().max(1) as f64;
    let (s, co) = (s / n, co / n);
    (s.hypot(co).min(1.0), wrap(s.atan2(co)))
}

fn rates(c: &KuramotoCommunity, theta: &[f64], psi: Option<f64>, sc: &mut [(f64, f64)], out: &mut [f64]) {
    // (K/N) Σ sin(θⱼ − θᵢ) = K r sin(Ψ − θᵢ), expanded to reuse sin θᵢ, cos θᵢ.
    let (mut s, mut co) = (0.0, 0.0);
    for (t, slot) in theta.iter().zip(sc.iter_mut()) {
        *slot = t.sin_cos();
        s += slot.0;
        co += slot.1;
    }
    let n = theta.len() as f64;
    let (ks, kc) = (c.coupling * s / n, c.coupling * co / n);
    let ext = psi.map(|p| p.sin_cos());
    for i in 0..theta.len() {
        let (si, ci) = sc[i];
        let mut d = c.omega[i] + ks * ci - kc * si;
        if let Some((ps, pc)) = ext {
            d += c.feedback_gain * (ps * ci - pc * si);
        }
        out[i] = d;
    }
}

/// Typical rate used for the step-size check: the median |ωᵢ| plus the
/// coupling scales. Heavy-tailed frequency draws would otherwise force a
/// step set by a handful of free-running outliers.
pub fn typical_rate(c: &KuramotoCommunity) -> f64 {
    let mut w: Vec<f64> = c.omega.iter().map(|w| w.abs()).collect();
    w.sort_by(|a, b| a.total_cmp(b));
    w[w.len() / 2] + c.coupling + c.feedback_gain.abs()
}

/// One RK4 step.
pub fn kuramoto_step(c: &mut KuramotoCommunity, external_phase: Option<f64>, dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt * typical_rate(c) >= 0.1 {
        return Err(invalid(format!("dt = {dt} too coarse for the community's rates")));
    }
    let n = c.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut sc = vec![(0.0, 0.0); n];
    rates(c, &c.theta, external_phase, &mut sc, &mut k[0]);
    for (stage, h) in [(1usize, 0.5 * dt), (2, 0.5 * dt), (3, dt)] {
        for i in 0..n {
            tmp[i] = c.theta[i] + h * k[stage - 1][i];
        }
        rates(c, &tmp, external_phase, &mut sc, &mut k[stage]);
    }
    for i in 0..n {
        let d = (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) / 6.0;
        c.theta[i] = wrap(c.theta[i] + dt * d);
    }
    Ok(())
}

/// Mean order parameter over `[settle, duration]` without external input.
pub fn time_averaged_order(c: &mut KuramotoCommunity, duration: f64, settle: f64, dt: f64) -> Result<f64> {
    let steps = (duration / dt).round() as usize;
    let first = (settle / dt).round() as usize;
    if first >= steps {
        return Err(invalid("settling time must be shorter than the run"));
    }
    let mut acc = 0.0;
    for n in 0..steps {
        kuramoto_step(c, None, dt)?;
        if n + 1 > first {
            acc += order_parameter(c).0;
        }
    }
    Ok(acc / (steps - first) as f64)
}
