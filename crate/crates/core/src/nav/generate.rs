//! Synthetic walking runs: a true trajectory along a rounded polyline, the
//! IMU stream it implies, and trotting-gait joint and foot-pressure signals
//! whose per-stride statistics follow planted linear models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::path::{Path, SpeedProfile};
use super::{wrap_angle, GaitSensorFrame, ImuSample, NavState, LEGS};
use crate::error::{invalid, Result};

/// Phase offset of each leg within the motor cycle (trot).
pub const TROT_OFFSETS: [f64; LEGS] = [0.0, 0.5, 0.5, 0.0];
/// +1 for left legs, −1 for right legs.
const SIDE: [f64; LEGS] = [1.0, -1.0, 1.0, -1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitParams {
    /// Motor (stride) frequency (Hz).
    pub motor_frequency: f64,
    /// Nominal stance fraction of a cycle.
    pub duty: f64,
    /// Half-width of the uniform per-cycle duty jitter.
    pub duty_jitter: f64,
    /// Planted model: sum of the four hip amplitudes = `hip_offset + hip_gain · stride length`.
    pub hip_offset: f64,
    pub hip_gain: f64,
    /// Hip amplitude added on the left legs and removed on the right per
    /// radian of heading change in the cycle.
    pub turn_gain: f64,
    /// Knee amplitudes are drawn uniformly from this range, independent of
    /// the motion.
    pub knee_range: [f64; 2],
    /// Fastest yaw rate the gait can produce (rad/s).
    pub max_turn_rate: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            motor_frequency: 2.0,
            duty: 0.6,
            duty_jitter: 0.05,
            hip_offset: 0.4,
            hip_gain: 1.6,
            turn_gain: 0.1,
            knee_range: [0.3, 0.5],
            max_turn_rate: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    pub gyro_bias: f64,
    pub accel_bias: [f64; 2],
    /// Per-sample white-noise standard deviations.
    pub gyro_noise: f64,
    pub accel_noise: f64,
    /// Per-cycle standard deviation of each hip amplitude (rad).
    pub hip_noise: f64,
    /// Relative spread of the per-cycle pressure peak.
    pub pressure_spread: f64,
    /// Per-sample pressure noise.
    pub pressure_noise: f64,
}

impl NoiseParams {
    pub fn none() -> Self {
        Self {
            gyro_bias: 0.0,
            accel_bias: [0.0; 2],
            gyro_noise: 0.0,
            accel_noise: 0.0,
            hip_noise: 0.0,
            pressure_spread: 0.0,
            pressure_noise: 0.0,
        }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            gyro_bias: 0.005,
            accel_bias: [0.05, 0.0],
            gyro_noise: 0.002,
            accel_noise: 0.02,
            hip_noise: 0.01,
            pressure_spread: 0.05,
            pressure_noise: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub waypoints: Vec<[f64; 2]>,
    pub corner_radius: f64,
    /// Cruise speeds visited in turn (m/s).
    pub speeds: Vec<f64>,
    /// Time spent at each cruise speed (s).
    pub speed_hold: f64,
    /// Duration of each speed change (s).
    pub ramp_time: f64,
    /// Time spent stepping in place before setting off and after arriving (s).
    pub standstill: f64,
    pub imu_rate: f64,
    /// Gait frames are recorded every this many IMU samples.
    pub gait_decimation: usize,
    pub gait: GaitParams,
    pub noise: NoiseParams,
    pub seed: u64,
}

impl Default for Scenario {
    /// A closed 7 m square walked in about a minute at changing speeds.
    fn default() -> Self {
        Self {
            waypoints: vec![[0.0, 0.0], [7.0, 0.0], [7.0, 7.0], [0.0, 7.0], [0.0, 0.0]],
            corner_radius: 0.75,
            speeds: vec![0.35, 0.65, 0.45, 0.75, 0.3],
            speed_hold: 5.0,
            ramp_time: 1.5,
            standstill: 2.0,
            imu_rate: 100.0,
            gait_decimation: 1,
            gait: GaitParams::default(),
            noise: NoiseParams::default(),
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let g = &self.gait;
        if !(self.imu_rate > 0.0 && self.imu_rate.is_finite()) || self.gait_decimation == 0 {
            return Err(invalid("imu_rate must be positive and gait_decimation at least 1"));
        }
        if !(g.motor_frequency > 0.0 && self.imu_rate / self.gait_decimation as f64 >= 8.0 * g.motor_frequency) {
            return Err(invalid("gait frames must sample each motor cycle at least 8 times"));
        }
        if !(g.duty > 0.0 && g.duty_jitter >= 0.0 && g.duty + g.duty_jitter < 1.0 && g.duty - g.duty_jitter > 0.0) {
            return Err(invalid("duty factor with jitter must stay inside (0, 1)"));
        }
        if !(g.knee_range[0] <= g.knee_range[1]) || !(g.max_turn_rate > 0.0) || !(self.standstill >= 0.0) {
            return Err(invalid("knee_range must be ordered, max_turn_rate positive, standstill non-negative"));
        }
        let n = &self.noise;
        if [n.gyro_noise, n.accel_noise, n.hip_noise, n.pressure_spread, n.pressure_noise]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(invalid("noise levels must be non-negative"));
        }
        Ok(())
    }
}

/// Output of [`generate_gait_data`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitData {
    pub imu: Vec<ImuSample>,
    pub frames: Vec<GaitSensorFrame>,
    /// True state at t = 0 and at every IMU timestamp.
    pub truth: Vec<NavState>,
    /// Per leg, the touchdowns whose stance rises to half its peak inside the
    /// recording.
    pub touchdowns: Vec<Vec<f64>>,
}

struct Motion {
    path: Path,
    profile: SpeedProfile,
    start: f64,
}

impl Motion {
    fn s(&self, t: f64) -> (f64, f64, f64) {
        self.profile.at(t - self.start)
    }

    fn heading(&self, t: f64) -> f64 {
        self.path.heading_unwrapped(self.s(t).0)
    }

    fn state(&self, t: f64) -> NavState {
        let (s, v, _) = self.s(t);
        let (p, _, _) = self.path.at(s);
        let psi = self.path.heading_unwrapped(s);
        NavState {
            t,
            position: p,
            velocity: [v * psi.cos(), v * psi.sin()],
            heading: wrap_angle(psi),
        }
    }

    /// Body-frame acceleration averaged over `(a, b)`.
    fn mean_accel(&self, a: f64, b: f64) -> [f64; 2] {
        const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = [0.0; 2];
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            let (s, v, dv) = self.s(mid + half * x);
            let kappa = self.path.at(s).2;
            acc[0] += 0.5 * w * dv;
            acc[1] += 0.5 * w * kappa * v * v;
        }
        acc
    }
}

struct Cycle {
    hip: f64,
    knee: f64,
    duty: f64,
    peak: f64,
}

/// Generates a run deterministically from the scenario and its seed.
pub fn generate_gait_data(sc: &Scenario) -> Result<GaitData> {
    sc.validate()?;
    let path = Path::new(&sc.waypoints, sc.corner_radius)?;
    let profile = SpeedProfile::new(path.length(), &sc.speeds, sc.speed_hold, sc.ramp_time)?;
    let turn = profile.max_speed() * path.max_curvature();
    if turn > sc.gait.max_turn_rate {
        return Err(invalid(format!(
            "path needs a yaw rate of {turn:.3} rad/s, above the gait limit of {} rad/s",
            sc.gait.max_turn_rate
        )));
    }
    let motion = Motion {
        path,
        profile,
        start: sc.standstill,
    };
    let g = &sc.gait;
    let fm = g.motor_frequency;
    let dt = 1.0 / sc.imu_rate;
    let cycles = ((2.0 * sc.standstill + motion.profile.duration()) * fm - 1e-9).ceil().max(1.0) as i64;
    let n = (cycles as f64 / fm / dt - 1e-9).ceil() as usize;
    let t_end = n as f64 * dt;

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let normal = move |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    // Per-leg cycle table, cycle k stored at index k + 1 (leg phases can
    // start one cycle early).
    let mut table: Vec<Vec<Cycle>> = Vec::with_capacity(LEGS);
    for (leg, &offset) in TROT_OFFSETS.iter().enumerate() {
        let mut rows = Vec::new();
        for k in -1..=cycles {
            let t0 = (k as f64 + offset) / fm;
            let t1 = t0 + 1.0 / fm;
            let stride = motion.s(t1).0 - motion.s(t0).0;
            let dpsi = motion.heading(t1) - motion.heading(t0);
            let hip = 0.25 * (g.hip_offset + g.hip_gain * stride)
                + SIDE[leg] * g.turn_gain * dpsi
                + sc.noise.hip_noise * normal(&mut rng);
            let knee = rng.gen_range(g.knee_range[0]..=g.knee_range[1]);
            let duty = g.duty + g.duty_jitter * rng.gen_range(-1.0..=1.0);
            let peak = (1.0 + sc.noise.pressure_spread * normal(&mut rng)).max(0.1);
            rows.push(Cycle { hip, knee, duty, peak });
        }
        table.push(rows);
    }
    let touchdowns = TROT_OFFSETS
        .iter()
        .zip(&table)
        .map(|(&offset, rows)| {
            (0..=cycles)
                .map(|k| ((k as f64 + offset) / fm, &rows[(k + 1) as usize]))
                .filter(|(t0, c)| t0 + c.duty / (6.0 * fm) <= t_end)
                .map(|(t0, _)| t0)
                .collect()
        })
        .collect();

    let mut truth = Vec::with_capacity(n + 1);
    truth.push(motion.state(0.0));
    let mut imu = Vec::with_capacity(n);
    let nz = &sc.noise;
    let mut psi_prev = motion.heading(0.0);
    for k in 1..=n {
        let (a, b) = ((k - 1) as f64 * dt, k as f64 * dt);
        let psi = motion.heading(b);
        let acc = motion.mean_accel(a, b);
        imu.push(ImuSample {
            t: b,
            ax: acc[0] + nz.accel_bias[0] + nz.accel_noise * normal(&mut rng),
            ay: acc[1] + nz.accel_bias[1] + nz.accel_noise * normal(&mut rng),
            gz: (psi - psi_prev) / dt + nz.gyro_bias + nz.gyro_noise * normal(&mut rng),
        });
        truth.push(motion.state(b));
        psi_prev = psi;
    }

    let frames = (0..=n / sc.gait_decimation)
        .map(|j| {
            let t = (j * sc.gait_decimation) as f64 * dt;
            let mut f = GaitSensorFrame {
                t,
                hip: [0.0; LEGS],
                knee: [0.0; LEGS],
                pressure: [0.0; LEGS],
                motor_frequency: fm,
            };
            for leg in 0..LEGS {
                let phase = fm * t - TROT_OFFSETS[leg];
                let k = phase.floor();
                let tau = phase - k;
                let c = &table[leg][(k as i64 + 1) as usize];
                let arg = 2.0 * std::f64::consts::PI * tau;
                f.hip[leg] = c.hip * arg.sin();
                f.knee[leg] = 0.5 * c.knee * (1.0 - arg.cos());
                let stance = if tau < c.duty {
                    c.peak * (std::f64::consts::PI * tau / c.duty).sin()
                } else {
                    0.0
                };
                f.pressure[leg] = (stance + nz.pressure_noise * normal(&mut rng)).max(0.0);
            }
            f
        })
        .collect();

    Ok(GaitData {
        imu,
        frames,
        truth,
        touchdowns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(waypoints: Vec<[f64; 2]>, speeds: Vec<f64>) -> Scenario {
        Scenario {
            waypoints,
            speeds,
            noise: NoiseParams::none(),
            gait: GaitParams {
                duty_jitter: 0.0,
                ..GaitParams::default()
            },
            ..Scenario::default()
        }
    }

    #[test]
    fn stationary_run_steps_in_place() {
        let sc = Scenario {
            standstill: 5.0,
            ..quiet(vec![[1.0, 1.0]], vec![0.5])
        };
        let d = generate_gait_data(&sc).unwrap();
        assert!(d.imu.iter().all(|s| s.ax == 0.0 && s.ay == 0.0 && s.gz == 0.0));
        assert!(d.truth.iter().all(|s| s.position == [1.0, 1.0]));
        // One motor cycle is 50 frames at 100 Hz and 2 Hz.
        let p: Vec<f64> = d.frames.iter().map(|f| f.pressure[0]).collect();
        for i in 0..p.len() - 50 {
            assert!((p[i] - p[i + 50]).abs() < 1e-12);
        }
        assert!(p.iter().any(|&v| v > 0.9));
    }

    #[test]
    fn straight_cruise_stride_is_speed_over_frequency() {
        let sc = quiet(vec![[0.0, 0.0], [30.0, 0.0]], vec![0.6]);
        let d = generate_gait_data(&sc).unwrap();
        let fm = sc.gait.motor_frequency;
        // A cycle in the middle of the cruise.
        let t0 = 20.0;
        let i0 = (t0 * sc.imu_rate) as usize;
        let i1 = ((t0 + 1.0 / fm) * sc.imu_rate) as usize;
        let stride = d.truth[i1].position[0] - d.truth[i0].position[0];
        assert!((stride - 0.6 / fm).abs() < 1e-9, "{stride}");
    }

    #[test]
    fn closed_square_returns_home() {
        let d = generate_gait_data(&quiet(Scenario::default().waypoints, vec![0.5])).unwrap();
        let last = d.truth.last().unwrap();
        assert!(last.position[0].hypot(last.position[1]) < 1e-9);
        assert_eq!(last.velocity, [0.0, 0.0]);
    }

    #[test]
    fn seed_determines_the_run() {
        let sc = Scenario {
            waypoints: vec![[0.0, 0.0], [3.0, 0.0]],
            speeds: vec![0.4],
            ..Scenario::default()
        };
        let a = generate_gait_data(&sc).unwrap();
        assert_eq!(a, generate_gait_data(&sc).unwrap());
        let b = generate_gait_data(&Scenario { seed: 1, ..sc }).unwrap();
        assert_ne!(a.imu, b.imu);
        assert!(a.frames.iter().flat_map(|f| f.pressure).all(|p| p >= 0.0));
    }

    #[test]
    fn sharp_fast_turns_are_infeasible() {
        let sc = Scenario {
            corner_radius: 0.2,
            speeds: vec![0.8],
            ..Scenario::default()
        };
        assert!(generate_gait_data(&sc).is_err());
    }
}
