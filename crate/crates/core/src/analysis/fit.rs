//! Least-squares fit of a damped oscillation and mass-ratio inference.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-9;

/// `offset + amplitude·e^{−σt}·cos(ω_d·t + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedFit {
    pub amplitude: f64,
    pub sigma: f64,
    pub omega_d: f64,
    pub phase: f64,
    pub offset: f64,
    pub rmse: f64,
    pub iterations: usize,
}

impl DampedFit {
    /// Undamped natural angular frequency squared.
    pub fn natural_frequency_sq(&self) -> f64 {
        self.omega_d * self.omega_d + self.sigma * self.sigma
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (-self.sigma * t).exp() * (self.omega_d * t + self.phase).cos()
    }
}

// Parameters p = [c, a, b, σ, ω]: y = c + e^{−σt}(a cos ωt + b sin ωt).
fn residuals(p: &[f64; 5], y: &[f64], dt: f64) -> (Vec<f64>, f64) {
    let mut r = Vec::with_capacity(y.len());
    let mut sse = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let t = i as f64 * dt;
        let (s, c) = (p[4] * t).sin_cos();
        let model = p[0] + (-p[3] * t).exp() * (p[1] * c + p[2] * s);
        let e = yi - model;
        sse += e * e;
        r.push(e);
    }
    (r, sse)
}

// Offset and quadrature amplitudes for fixed (σ, ω).
fn linear_part(y: &[f64], dt: f64, sigma: f64, omega: f64) -> Option<([f64; 5], f64)> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (i, &yi) in y.iter().enumerate() {
        let t = i as f64 * dt;
        let e = (-sigma * t).exp();
        let (s, c) = (omega * t).sin_cos();
        let row = Vector3::new(1.0, e * c, e * s);
        ata += row * row.transpose();
        atb += row * yi;
    }
    let x = ata.cholesky()?.solve(&atb);
    let p = [x[0], x[1], x[2], sigma, omega];
    let sse = residuals(&p, y, dt).1;
    Some((p, sse))
}

// Mean-level crossings with hysteresis: a crossing counts only once the
// signal has left the ±band around the level, so noise in the decayed
// tail does not add spurious crossings.
fn crossings(y: &[f64], level: f64, band: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut side = 0i8;
    let mut last_i = 0usize;
    for i in 0..y.len() {
        let d = y[i] - level;
        let now = if d > band {
            1
        } else if d < -band {
            -1
        } else {
            0
        };
        if now != 0 && now != side {
            if side != 0 {
                // Interpolate the exact crossing between the last excursion and here.
                let j = (last_i + 1..=i)
                    .find(|&j| (y[j - 1] - level) * (y[j] - level) <= 0.0 && y[j - 1] != y[j])
                    .unwrap_or(i);
                let (a, b) = (y[j - 1] - level, y[j] - level);
                out.push((j - 1) as f64 + a / (a - b));
            }
            side = now;
        }
        if now != 0 {
            last_i = i;
        }
    }
    out
}

// ω from mean zero-crossing spacing, σ from the decay of successive peaks.
fn initial_guess(y: &[f64], dt: f64) -> Result<(f64, f64)> {
    let n = y.len();
    let tail = &y[n - n / 5..];
    let level = tail.iter().sum::<f64>() / tail.len() as f64;
    let swing = y.iter().map(|v| (v - level).abs()).fold(0.0, f64::max);
    let zc = crossings(y, level, 0.1 * swing);
    if zc.len() < 2 {
        return Err(Error::NonConvergence("no oscillation: the input does not cross its mean".into()));
    }
    let half_period = (zc[zc.len() - 1] - zc[0]) / (zc.len() - 1) as f64 * dt;
    let omega = std::f64::consts::PI / half_period;
    // Largest deviation between consecutive crossings, one per half cycle.
    let mut peaks = Vec::new();
    for w in zc.windows(2) {
        let (a, b) = (w[0].ceil() as usize, (w[1].floor() as usize).min(n - 1));
        if let Some((i, v)) = (a..=b).map(|i| (i, (y[i] - level).abs())).max_by(|x, y| x.1.total_cmp(&y.1)) {
            if v > 0.0 {
                peaks.push((i as f64 * dt, v.ln()));
            }
        }
    }
    let sigma = if peaks.len() >= 2 {
        let m = peaks.len() as f64;
        let (st, sl) = peaks.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let (tm, lm) = (st / m, sl / m);
        let (num, den) = peaks
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + (p.0 - tm) * (p.1 - lm), acc.1 + (p.0 - tm).powi(2)));
        (-num / den).max(0.0)
    } else {
        0.0
    };
    Ok((sigma, omega))
}

/// Fits a damped cosine by Gauss–Newton with step halving.
pub fn fit_damped_oscillation(series: &[f64], dt: f64) -> Result<DampedFit> {
    if series.len() < 16 {
        return Err(Error::TooShort {
            len: series.len(),
            min: 16,
        });
    }
    if !(dt > 0.0) || series.iter().any(|v| !v.is_finite()) {
        return Err(invalid("fit needs dt > 0 and finite samples"));
    }
    let (sigma0, omega0) = initial_guess(series, dt)?;

    // Small grid around the estimates; keep the best linear solve.
    let mut best: Option<([f64; 5], f64)> = None;
    for ds in [0.5, 1.0, 1.5] {
        for dw in [0.97, 1.0, 1.03] {
            if let Some(cand) = linear_part(series, dt, sigma0 * ds, omega0 * dw) {
                if best.map_or(true, |b| cand.1 < b.1) {
                    best = Some(cand);
                }
            }
        }
    }
    let (mut p, mut sse) = best.ok_or_else(|| Error::NonConvergence("singular initial solve".into()))?;

    let n = series.len();
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let (r, _) = residuals(&p, series, dt);
        let mut jac = DMatrix::zeros(n, 5);
        for i in 0..n {
            let t = i as f64 * dt;
            let e = (-p[3] * t).exp();
            let (s, c) = (p[4] * t).sin_cos();
            let osc = p[1] * c + p[2] * s;
            jac[(i, 0)] = 1.0;
            jac[(i, 1)] = e * c;
            jac[(i, 2)] = e * s;
            jac[(i, 3)] = -t * e * osc;
            jac[(i, 4)] = e * t * (-p[1] * s + p[2] * c);
        }
        let jt = jac.transpose();
        let Some(chol) = (&jt * &jac).cholesky() else {
            return Err(Error::NonConvergence("singular normal equations".into()));
        };
        let delta = chol.solve(&(&jt * DVector::from_vec(r)));
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut step_size = 0.0f64;
        for _ in 0..40 {
            let mut trial = p;
            for k in 0..5 {
                trial[k] += lambda * delta[k];
            }
            trial[3] = trial[3].max(0.0);
            let trial_sse = residuals(&trial, series, dt).1;
            if trial_sse <= sse {
                step_size = (0..5)
                    .map(|k| (trial[k] - p[k]).abs() / p[k].abs().max(1e-12))
                    .fold(0.0, f64::max);
                p = trial;
                sse = trial_sse;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || step_size < STEP_TOLERANCE {
            break;
        }
    }
    if !sse.is_finite() || !(p[4] > 0.0) {
        return Err(Error::NonConvergence("fit diverged".into()));
    }
    let amplitude = p[1].hypot(p[2]);
    Ok(DampedFit {
        amplitude,
        sigma: p[3],
        omega_d: p[4],
        phase: (-p[2]).atan2(p[1]),
        offset: p[0],
        rmse: (sse / n as f64).sqrt(),
        iterations,
    })
}

/// `m_a / m_b` for two oscillators sharing the same spring.
pub fn infer_mass_ratio(fit_a: &DampedFit, fit_b: &DampedFit) -> Result<f64> {
    let (wa, wb) = (fit_a.natural_frequency_sq(), fit_b.natural_frequency_sq());
    if !(wa > 0.0 && wb > 0.0 && wa.is_finite() && wb.is_finite()) {
        return Err(invalid("degenerate fit: natural frequency must be positive"));
    }
    Ok(wb / wa)
}
