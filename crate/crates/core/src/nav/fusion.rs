//! Error-state Kalman fusion of strapdown navigation with the stride
//! odometer.
//!
//! Error vector: δp (2), δv (2), δψ, δb_g, δb_a (2), δs, each the estimate
//! minus the truth. Navigation errors are fed back into the strapdown
//! solution and reset after every update; sensor-error estimates are kept
//! in the [`ErrorState`] and used to compensate the next samples.

use nalgebra::{Matrix2, SMatrix, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::strapdown::{integrate, strapdown_update};
use super::{rotate, wrap_angle, Biases, ImuSample, NavState};
use crate::error::{invalid, Error, Result};

pub const STATES: usize = 9;
const P: usize = 0;
const V: usize = 2;
const PSI: usize = 4;
const BG: usize = 5;
const BA: usize = 6;
const S: usize = 8;

/// Most negative covariance eigenvalue tolerated.
pub const PSD_TOLERANCE: f64 = 1e-10;

type Mat = SMatrix<f64, STATES, STATES>;
type Vec9 = SVector<f64, STATES>;
type Hm = SMatrix<f64, 2, STATES>;

/// Odometer output over one stride window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometerSample {
    pub t_start: f64,
    pub t_end: f64,
    pub speed: f64,
    pub delta_heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorState {
    /// Navigation errors not yet fed back.
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub heading: f64,
    /// Current sensor-error estimates.
    pub gyro_bias: f64,
    pub accel_bias: [f64; 2],
    /// Relative odometer speed error; the odometer speed is divided by
    /// `1 + scale`.
    pub scale: f64,
    pub covariance: [[f64; STATES]; STATES],
}

impl ErrorState {
    /// Zero errors with independent initial uncertainties.
    pub fn initial(sigma: &InitialSigma) -> Self {
        let d = sigma.diagonal();
        let mut covariance = [[0.0; STATES]; STATES];
        for i in 0..STATES {
            covariance[i][i] = d[i] * d[i];
        }
        Self {
            position: [0.0; 2],
            velocity: [0.0; 2],
            heading: 0.0,
            gyro_bias: 0.0,
            accel_bias: [0.0; 2],
            scale: 0.0,
            covariance,
        }
    }

    pub fn biases(&self) -> Biases {
        Biases {
            gyro: self.gyro_bias,
            accel: self.accel_bias,
        }
    }

    fn p(&self) -> Mat {
        Mat::from_fn(|i, j| self.covariance[i][j])
    }

    fn set_p(&mut self, p: &Mat) {
        for i in 0..STATES {
            for j in 0..STATES {
                self.covariance[i][j] = p[(i, j)];
            }
        }
    }

    /// Standard deviations of the nine error components.
    pub fn sigma(&self) -> [f64; STATES] {
        std::array::from_fn(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    /// Symmetric and positive semidefinite within [`PSD_TOLERANCE`].
    pub fn check_covariance(&self, time: f64) -> Result<()> {
        let p = self.p();
        let asym = (p - p.transpose()).abs().max();
        if !(asym <= 1e-12 * p.abs().max().max(1.0)) {
            return Err(Error::CovarianceNotPsd {
                time,
                min_eigenvalue: f64::NAN,
            });
        }
        let min = SymmetricEigen::new(p).eigenvalues.min();
        if !(min >= -PSD_TOLERANCE) {
            return Err(Error::CovarianceNotPsd {
                time,
                min_eigenvalue: min,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSigma {
    pub position: f64,
    pub velocity: f64,
    pub heading: f64,
    pub gyro_bias: f64,
    pub accel_bias: f64,
    pub scale: f64,
}

impl InitialSigma {
    fn diagonal(&self) -> [f64; STATES] {
        [
            self.position,
            self.position,
            self.velocity,
            self.velocity,
            self.heading,
            self.gyro_bias,
            self.accel_bias,
            self.accel_bias,
            self.scale,
        ]
    }
}

impl Default for InitialSigma {
    fn default() -> Self {
        Self {
            position: 0.0,
            velocity: 0.01,
            heading: 0.01,
            gyro_bias: 0.01,
            accel_bias: 0.1,
            scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Per-sample accelerometer and gyro white noise.
    pub accel_noise: f64,
    pub gyro_noise: f64,
    /// Random-walk densities of the sensor errors (unit/√s).
    pub accel_bias_walk: f64,
    pub gyro_bias_walk: f64,
    pub scale_walk: f64,
    /// Odometer velocity noise per axis (m/s); infinite disables updates.
    pub odometer_noise: f64,
    /// Innovation components beyond this many standard deviations are
    /// rejected.
    pub gate: f64,
    pub initial: InitialSigma,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            accel_noise: 0.02,
            gyro_noise: 0.002,
            accel_bias_walk: 1e-4,
            gyro_bias_walk: 1e-5,
            scale_walk: 1e-4,
            odometer_noise: 0.03,
            gate: 5.0,
            initial: InitialSigma::default(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.accel_noise,
            self.gyro_noise,
            self.accel_bias_walk,
            self.gyro_bias_walk,
            self.scale_walk,
        ];
        if rates.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("process noise levels must be finite and non-negative"));
        }
        if !(self.odometer_noise > 0.0) || !(self.gate > 0.0) {
            return Err(invalid("odometer_noise and gate must be positive"));
        }
        if self.initial.diagonal().iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("initial sigmas must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub t: f64,
    /// INS minus odometer mean velocity over the stride.
    pub innovation: [f64; 2],
    pub accepted: bool,
    /// Error state after feedback.
    pub state: ErrorState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRun {
    /// Corrected navigation solution at t0 and every IMU timestamp.
    pub states: Vec<NavState>,
    pub history: Vec<UpdateRecord>,
    pub final_error: ErrorState,
}

impl FusionRun {
    pub fn rejected(&self) -> usize {
        self.history.iter().filter(|u| !u.accepted).count()
    }
}

/// Strapdown navigation without aiding, compensating the sensor errors held
/// in `es`.
pub fn ins_only(imu: &[ImuSample], init: NavState, es: &ErrorState) -> Result<Vec<NavState>> {
    integrate(imu, init, &es.biases())
}

/// `J v`: vector rotated by +90°.
fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

fn feed_back(nav: &mut NavState, es: &mut ErrorState, dx: &Vec9) {
    nav.position[0] -= dx[P] + es.position[0];
    nav.position[1] -= dx[P + 1] + es.position[1];
    nav.velocity[0] -= dx[V] + es.velocity[0];
    nav.velocity[1] -= dx[V + 1] + es.velocity[1];
    nav.heading = wrap_angle(nav.heading - dx[PSI] - es.heading);
    es.gyro_bias -= dx[BG];
    es.accel_bias[0] -= dx[BA];
    es.accel_bias[1] -= dx[BA + 1];
    es.scale -= dx[S];
    es.position = [0.0; 2];
    es.velocity = [0.0; 2];
    es.heading = 0.0;
}

/// Quantities of the INS solution over a stride window, taken from the
/// samples since the window start so that earlier feedback jumps do not
/// enter the displacement.
struct Window {
    mean_velocity: [f64; 2],
    mean_heading: f64,
    mean_force: [f64; 2],
    duration: f64,
}

fn window(states: &[NavState], forces: &[[f64; 2]], t_start: f64, t_end: f64) -> Option<Window> {
    let j = states.partition_point(|s| s.t < t_start);
    let m = states.len() - 1;
    if j > m || t_end <= t_start {
        return None;
    }
    let (a, b) = (&states[j], &states[m]);
    let back = |s: &NavState, t: f64| [s.position[0] - s.velocity[0] * (s.t - t), s.position[1] - s.velocity[1] * (s.t - t)];
    let (pa, pb) = (back(a, t_start), back(b, t_end));
    let duration = t_end - t_start;
    let mut psi = 0.0;
    let mut unwrapped = a.heading;
    for w in states[j..].windows(2) {
        psi += unwrapped;
        unwrapped += wrap_angle(w[1].heading - w[0].heading);
    }
    psi += unwrapped;
    let n = (m - j + 1) as f64;
    let mut f = [0.0; 2];
    for g in &forces[j..m] {
        f[0] += g[0];
        f[1] += g[1];
    }
    let nf = (m - j).max(1) as f64;
    Some(Window {
        mean_velocity: [(pb[0] - pa[0]) / duration, (pb[1] - pa[1]) / duration],
        mean_heading: psi / n,
        mean_force: [f[0] / nf, f[1] / nf],
        duration,
    })
}

/// Runs the filter over the IMU stream, applying an odometer update at the
/// first IMU sample at or after each stride end.
pub fn kf_fuse(
    imu: &[ImuSample],
    odometer: &[OdometerSample],
    init: NavState,
    initial: ErrorState,
    cfg: &FusionConfig,
) -> Result<FusionRun> {
    cfg.validate()?;
    initial.check_covariance(init.t)?;
    let mut es = initial;
    let mut nav = init;
    feed_back(&mut nav, &mut es, &Vec9::zeros());
    let mut p = es.p();
    let mut states = Vec::with_capacity(imu.len() + 1);
    states.push(nav);
    // Navigation-frame specific force of the interval ending at each state.
    let mut forces: Vec<[f64; 2]> = Vec::with_capacity(imu.len());
    let mut history = Vec::new();
    let mut next = 0;
    let r_var = cfg.odometer_noise * cfg.odometer_noise;
    let r = Matrix2::identity() * r_var;
    for sample in imu {
        let dt = sample.t - nav.t;
        let b = es.biases();
        let updated = strapdown_update(&nav, &b, sample, dt)?;
        let mid = nav.heading + 0.5 * wrap_angle(updated.heading - nav.heading);
        let f = rotate(mid, [sample.ax - b.accel[0], sample.ay - b.accel[1]]);
        let (s, c) = mid.sin_cos();
        let mut fm = Mat::zeros();
        fm[(P, V)] = 1.0;
        fm[(P + 1, V + 1)] = 1.0;
        let jf = perp(f);
        fm[(V, PSI)] = jf[0];
        fm[(V + 1, PSI)] = jf[1];
        fm[(V, BA)] = -c;
        fm[(V, BA + 1)] = s;
        fm[(V + 1, BA)] = -s;
        fm[(V + 1, BA + 1)] = -c;
        fm[(PSI, BG)] = -1.0;
        let fd = fm * dt;
        let phi = Mat::identity() + fd + 0.5 * fd * fd;
        let mut q = Vec9::zeros();
        q[V] = (cfg.accel_noise * dt).powi(2);
        q[V + 1] = q[V];
        q[PSI] = (cfg.gyro_noise * dt).powi(2);
        q[BG] = cfg.gyro_bias_walk.powi(2) * dt;
        q[BA] = cfg.accel_bias_walk.powi(2) * dt;
        q[BA + 1] = q[BA];
        q[S] = cfg.scale_walk.powi(2) * dt;
        p = phi * p * phi.transpose() + Mat::from_diagonal(&q);
        p = 0.5 * (p + p.transpose());
        nav = updated;
        states.push(nav);
        forces.push(f);

        while next < odometer.len() && odometer[next].t_end <= nav.t + 1e-9 {
            let od = odometer[next];
            next += 1;
            let Some(w) = window(&states, &forces, od.t_start, od.t_end) else {
                continue;
            };
            if !r_var.is_finite() {
                continue;
            }
            let speed = od.speed / (1.0 + es.scale);
            let u = [w.mean_heading.cos(), w.mean_heading.sin()];
            let vo = [speed * u[0], speed * u[1]];
            let z = [w.mean_velocity[0] - vo[0], w.mean_velocity[1] - vo[1]];
            let half = 0.5 * w.duration;
            let (sm, cm) = w.mean_heading.sin_cos();
            let jv = perp(vo);
            let jf = perp(w.mean_force);
            let mut h = Hm::zeros();
            h[(0, V)] = 1.0;
            h[(1, V + 1)] = 1.0;
            for k in 0..2 {
                h[(k, PSI)] = -jv[k] - half * jf[k];
                h[(k, BG)] = -half * jv[k];
                h[(k, S)] = vo[k];
            }
            h[(0, BA)] = half * cm;
            h[(0, BA + 1)] = -half * sm;
            h[(1, BA)] = half * sm;
            h[(1, BA + 1)] = half * cm;
            let s_mat = h * p * h.transpose() + r;
            let accepted = (0..2).all(|k| z[k].abs() <= cfg.gate * s_mat[(k, k)].sqrt());
            if accepted {
                let s_inv = s_mat
                    .try_inverse()
                    .ok_or_else(|| invalid(format!("singular innovation covariance at t = {}", nav.t)))?;
                let k_gain = p * h.transpose() * s_inv;
                let dx = k_gain * nalgebra::Vector2::new(z[0], z[1]);
                let ikh = Mat::identity() - k_gain * h;
                p = ikh * p * ikh.transpose() + k_gain * r * k_gain.transpose();
                p = 0.5 * (p + p.transpose());
                feed_back(&mut nav, &mut es, &dx);
                *states.last_mut().expect("state pushed above") = nav;
            } else {
                log::warn!(
                    "odometer update at t = {:.3} s rejected: innovation ({:.4}, {:.4}) m/s",
                    nav.t,
                    z[0],
                    z[1]
                );
            }
            es.set_p(&p);
            es.check_covariance(nav.t)?;
            history.push(UpdateRecord {
                t: nav.t,
                innovation: z,
                accepted,
                state: es.clone(),
            });
        }
    }
    es.set_p(&p);
    Ok(FusionRun {
        states,
        history,
        final_error: es,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::generate::{generate_gait_data, Scenario};
    use crate::nav::stride::{detect_strides, odometer_stream, stride_stats, OdometerModel};

    fn cruise(v: f64, seconds: f64) -> (Vec<ImuSample>, Vec<OdometerSample>, NavState) {
        let dt = 0.01;
        let imu = (1..=(seconds / dt) as usize)
            .map(|k| ImuSample { t: k as f64 * dt, ax: 0.0, ay: 0.0, gz: 0.0 })
            .collect();
        let odo = (0..(2.0 * seconds) as usize - 1)
            .map(|k| OdometerSample {
                t_start: 0.13 + 0.5 * k as f64,
                t_end: 0.63 + 0.5 * k as f64,
                speed: v,
                delta_heading: 0.0,
            })
            .collect();
        let init = NavState {
            t: 0.0,
            position: [0.0; 2],
            velocity: [v, 0.0],
            heading: 0.0,
        };
        (imu, odo, init)
    }

    #[test]
    fn consistent_streams_need_no_correction() {
        let (imu, odo, init) = cruise(0.4, 60.0);
        let cfg = FusionConfig::default();
        let run = kf_fuse(&imu, &odo, init, ErrorState::initial(&cfg.initial), &cfg).unwrap();
        assert!(run.history.len() > 100);
        let last = run.states.last().unwrap();
        let err = (last.position[0] - 0.4 * last.t).hypot(last.position[1]);
        assert!(err < 1e-6, "{err}");
        assert!(run.history.iter().all(|u| u.accepted && u.innovation[0].abs() < 1e-9));
    }

    #[test]
    fn accel_bias_is_estimated_on_a_cruise() {
        let (mut imu, odo, init) = cruise(0.4, 60.0);
        for s in &mut imu {
            s.ax += 0.05;
        }
        let cfg = FusionConfig::default();
        let run = kf_fuse(&imu, &odo, init, ErrorState::initial(&cfg.initial), &cfg).unwrap();
        let b = run.final_error.accel_bias[0];
        assert!((b - 0.05).abs() < 0.005, "{b}");
    }

    #[test]
    fn huge_odometer_noise_reduces_to_ins() {
        let sc = Scenario {
            waypoints: vec![[0.0, 0.0], [4.0, 0.0], [4.0, 3.0]],
            ..Scenario::default()
        };
        let d = generate_gait_data(&sc).unwrap();
        let ev = detect_strides(&d.frames, 0).unwrap();
        let odo = odometer_stream(&OdometerModel::matching(&sc.gait), &stride_stats(&d.frames, &ev).unwrap()).unwrap();
        let ins = ins_only(&d.imu, d.truth[0], &ErrorState::initial(&InitialSigma::default())).unwrap();
        for noise in [f64::INFINITY, 1e30] {
            let cfg = FusionConfig {
                odometer_noise: noise,
                ..FusionConfig::default()
            };
            let run = kf_fuse(&d.imu, &odo, d.truth[0], ErrorState::initial(&cfg.initial), &cfg).unwrap();
            for (a, b) in run.states.iter().zip(&ins) {
                assert!(a.distance_to(b) < 1e-9);
                assert!((a.heading - b.heading).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn outliers_are_skipped() {
        let (imu, mut odo, init) = cruise(0.4, 20.0);
        odo[20].speed = 5.0;
        let cfg = FusionConfig::default();
        let run = kf_fuse(&imu, &odo, init, ErrorState::initial(&cfg.initial), &cfg).unwrap();
        assert_eq!(run.rejected(), 1);
        let last = run.states.last().unwrap();
        assert!((last.position[0] - 0.4 * last.t).abs() < 1e-6);
    }

    #[test]
    fn indefinite_covariance_is_fatal() {
        let cfg = FusionConfig::default();
        let mut es = ErrorState::initial(&cfg.initial);
        es.covariance[0][0] = -1.0;
        let (imu, odo, init) = cruise(0.4, 1.0);
        assert!(matches!(
            kf_fuse(&imu, &odo, init, es, &cfg),
            Err(Error::CovarianceNotPsd { .. })
        ));
    }
}
