//! Stride segmentation from foot pressure, per-stride gait indicators and
//! the virtual odometer built on them.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fusion::OdometerSample;
use super::{GaitSensorFrame, NavState, LEGS};
use crate::error::{invalid, Error, Result};

/// Touchdown threshold as a fraction of the rolling pressure maximum.
pub const TOUCHDOWN_FRACTION: f64 = 0.5;
/// Width of the centred rolling-maximum window (s).
pub const ROLLING_WINDOW: f64 = 2.0;
/// Minimum spacing between touchdowns of one foot (s).
pub const REFRACTORY: f64 = 0.05;
/// Strides needed before indicator statistics mean anything.
pub const MIN_STRIDES: usize = 10;

fn frame_step(frames: &[GaitSensorFrame]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::TooShort {
            len: frames.len(),
            min: 2,
        });
    }
    let dt = (frames[frames.len() - 1].t - frames[0].t) / (frames.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(invalid("gait frame timestamps must increase"));
    }
    Ok(dt)
}

/// Maximum of `x` over a centred window of `2 * half + 1` samples,
/// truncated at the ends.
fn rolling_max(x: &[f64], half: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut q: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..x.len() {
        let hi = (i + half).min(x.len() - 1);
        while next <= hi {
            while q.back().is_some_and(|&j| x[j] <= x[next]) {
                q.pop_back();
            }
            q.push_back(next);
            next += 1;
        }
        while q.front().is_some_and(|&j| j + half < i) {
            q.pop_front();
        }
        out.push(x[q[0]]);
    }
    out
}

fn thresholds(frames: &[GaitSensorFrame], leg: usize, dt: f64) -> Vec<f64> {
    let p: Vec<f64> = frames.iter().map(|f| f.pressure[leg]).collect();
    let half = (0.5 * ROLLING_WINDOW / dt).round() as usize;
    rolling_max(&p, half).into_iter().map(|m| TOUCHDOWN_FRACTION * m).collect()
}

/// Touchdown times of one foot (legs numbered from 0): upward crossings of
/// half the rolling pressure maximum, interpolated between frames.
pub fn detect_strides(frames: &[GaitSensorFrame], leg: usize) -> Result<Vec<f64>> {
    if leg >= LEGS {
        return Err(invalid(format!("leg index {leg} out of range")));
    }
    let dt = frame_step(frames)?;
    let th = thresholds(frames, leg, dt);
    let mut events: Vec<f64> = Vec::new();
    for i in 1..frames.len() {
        let (p0, p1) = (frames[i - 1].pressure[leg], frames[i].pressure[leg]);
        if th[i] > 0.0 && p0 < th[i] && p1 >= th[i] {
            let (t0, t1) = (frames[i - 1].t, frames[i].t);
            let t = t0 + (th[i] - p0) / (p1 - p0) * (t1 - t0);
            if events.last().map_or(true, |&e| t - e >= REFRACTORY) {
                events.push(t);
            }
        }
    }
    if events.is_empty() {
        return Err(Error::SilentChannel(format!("pressure {}", leg + 1)));
    }
    Ok(events)
}

/// Raw per-stride measurements from the gait sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideStats {
    pub t_start: f64,
    pub t_end: f64,
    pub motor_frequency: f64,
    /// Half the peak-to-peak joint excursion.
    pub hip_amplitude: [f64; LEGS],
    pub knee_amplitude: [f64; LEGS],
    /// Fraction of the stride spent above the touchdown threshold.
    pub duty: [f64; LEGS],
    /// Time integral of foot pressure.
    pub impulse: [f64; LEGS],
}

/// Statistics over consecutive windows `[events[k], events[k+1])`.
pub fn stride_stats(frames: &[GaitSensorFrame], events: &[f64]) -> Result<Vec<StrideStats>> {
    let windows: Vec<(f64, f64)> = events.windows(2).map(|w| (w[0], w[1])).collect();
    window_stats(frames, &windows)
}

fn window_stats(frames: &[GaitSensorFrame], windows: &[(f64, f64)]) -> Result<Vec<StrideStats>> {
    let dt = frame_step(frames)?;
    let th: Vec<Vec<f64>> = (0..LEGS).map(|leg| thresholds(frames, leg, dt)).collect();
    let mut out = Vec::with_capacity(windows.len());
    for &(a, b) in windows {
        let lo = frames.partition_point(|f| f.t < a);
        let hi = frames.partition_point(|f| f.t < b);
        let nan = [f64::NAN; LEGS];
        let mut s = StrideStats {
            t_start: a,
            t_end: b,
            motor_frequency: f64::NAN,
            hip_amplitude: nan,
            knee_amplitude: nan,
            duty: nan,
            impulse: nan,
        };
        // Windows without frames keep NaN and are reported by the consumer.
        if hi > lo {
            let w = &frames[lo..hi];
            let span = |get: &dyn Fn(&GaitSensorFrame) -> f64| {
                let (mn, mx) = w.iter().map(get).fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), v| {
                    (mn.min(v), mx.max(v))
                });
                0.5 * (mx - mn)
            };
            s.motor_frequency = w.iter().map(|f| f.motor_frequency).sum::<f64>() / w.len() as f64;
            for leg in 0..LEGS {
                s.hip_amplitude[leg] = span(&|f| f.hip[leg]);
                s.knee_amplitude[leg] = span(&|f| f.knee[leg]);
                let above = (lo..hi).filter(|&i| th[leg][i] > 0.0 && frames[i].pressure[leg] >= th[leg][i]).count();
                s.duty[leg] = above as f64 / w.len() as f64;
                s.impulse[leg] = w.iter().map(|f| f.pressure[leg]).sum::<f64>() * dt;
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Candidate predictor of stride length or heading change. Legs are
/// numbered from 1 in names and from 0 in the variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Indicator {
    HipAmplitude(usize),
    KneeAmplitude(usize),
    /// Sum of the four hip amplitudes.
    HipSum,
    /// Left hip amplitudes minus right.
    HipDifference,
    Duty(usize),
    PressureImpulse(usize),
}

impl Indicator {
    /// Per-leg hip and knee amplitudes, hip sum, duty factors and pressure
    /// impulses.
    pub fn standard_set() -> Vec<Indicator> {
        let mut v: Vec<Indicator> = (0..LEGS).map(Indicator::HipAmplitude).collect();
        v.extend((0..LEGS).map(Indicator::KneeAmplitude));
        v.push(Indicator::HipSum);
        v.extend((0..LEGS).map(Indicator::Duty));
        v.extend((0..LEGS).map(Indicator::PressureImpulse));
        v
    }

    pub fn value(&self, s: &StrideStats) -> f64 {
        match *self {
            Indicator::HipAmplitude(i) => s.hip_amplitude[i],
            Indicator::KneeAmplitude(i) => s.knee_amplitude[i],
            Indicator::HipSum => s.hip_amplitude.iter().sum(),
            Indicator::HipDifference => {
                s.hip_amplitude[0] + s.hip_amplitude[2] - s.hip_amplitude[1] - s.hip_amplitude[3]
            }
            Indicator::Duty(i) => s.duty[i],
            Indicator::PressureImpulse(i) => s.impulse[i],
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Indicator::HipAmplitude(i) => write!(f, "hip_amp{}", i + 1),
            Indicator::KneeAmplitude(i) => write!(f, "knee_amp{}", i + 1),
            Indicator::HipSum => write!(f, "hip_sum"),
            Indicator::HipDifference => write!(f, "hip_diff"),
            Indicator::Duty(i) => write!(f, "duty{}", i + 1),
            Indicator::PressureImpulse(i) => write!(f, "impulse{}", i + 1),
        }
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hip_sum" => return Ok(Indicator::HipSum),
            "hip_diff" => return Ok(Indicator::HipDifference),
            _ => {}
        }
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (stem, num) = s.split_at(split);
        let leg = match num.parse::<usize>() {
            Ok(n) if (1..=LEGS).contains(&n) => n - 1,
            _ => return Err(invalid(format!("unknown indicator '{s}'"))),
        };
        match stem {
            "hip_amp" => Ok(Indicator::HipAmplitude(leg)),
            "knee_amp" => Ok(Indicator::KneeAmplitude(leg)),
            "duty" => Ok(Indicator::Duty(leg)),
            "impulse" => Ok(Indicator::PressureImpulse(leg)),
            _ => Err(invalid(format!("unknown indicator '{s}'"))),
        }
    }
}

impl TryFrom<String> for Indicator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Indicator> for String {
    fn from(i: Indicator) -> String {
        i.to_string()
    }
}

/// True motion over one stride window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideTruth {
    pub t_start: f64,
    pub t_end: f64,
    /// Distance walked (m).
    pub length: f64,
    /// Net heading change (rad).
    pub delta_heading: f64,
}

fn interp(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    let i = ts.partition_point(|&x| x <= t).clamp(1, ts.len() - 1);
    let (t0, t1) = (ts[i - 1], ts[i]);
    let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// Ground-truth stride lengths and heading changes between consecutive
/// events, from a densely sampled true trajectory.
pub fn stride_truth(truth: &[NavState], events: &[f64]) -> Result<Vec<StrideTruth>> {
    if truth.len() < 2 {
        return Err(Error::TooShort {
            len: truth.len(),
            min: 2,
        });
    }
    let ts: Vec<f64> = truth.iter().map(|s| s.t).collect();
    let mut dist = vec![0.0];
    let mut psi = vec![truth[0].heading];
    for w in truth.windows(2) {
        dist.push(dist.last().unwrap() + w[1].distance_to(&w[0]));
        psi.push(psi.last().unwrap() + super::wrap_angle(w[1].heading - w[0].heading));
    }
    Ok(events
        .windows(2)
        .map(|e| StrideTruth {
            t_start: e[0],
            t_end: e[1],
            length: interp(&ts, &dist, e[1]) - interp(&ts, &dist, e[0]),
            delta_heading: interp(&ts, &psi, e[1]) - interp(&ts, &psi, e[0]),
        })
        .collect())
}

/// One row per stride: `stride_length`, `delta_heading`, then the requested
/// indicators, as named columns for `correlation_matrix`.
pub fn build_indicator_table(
    frames: &[GaitSensorFrame],
    truth: &[StrideTruth],
    indicators: &[Indicator],
) -> Result<Vec<(String, Vec<f64>)>> {
    if truth.len() < MIN_STRIDES {
        return Err(Error::TooShort {
            len: truth.len(),
            min: MIN_STRIDES,
        });
    }
    let windows: Vec<(f64, f64)> = truth.iter().map(|s| (s.t_start, s.t_end)).collect();
    let stats = window_stats(frames, &windows)?;
    let mut table = vec![
        ("stride_length".to_string(), truth.iter().map(|s| s.length).collect()),
        ("delta_heading".to_string(), truth.iter().map(|s| s.delta_heading).collect()),
    ];
    for ind in indicators {
        let col: Vec<f64> = stats.iter().map(|s| ind.value(s)).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("indicator {ind} undefined on some stride")));
        }
        table.push((ind.to_string(), col));
    }
    Ok(table)
}

/// Linear stride-length and heading-change models over gait indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometerModel {
    pub indicators: Vec<Indicator>,
    /// Stride length = `weights · indicators + offset` (m).
    pub weights: Vec<f64>,
    pub offset: f64,
    /// Heading change per stride = `heading_weights · indicators +
    /// heading_offset` (rad); empty means no turning model.
    #[serde(default)]
    pub heading_weights: Vec<f64>,
    #[serde(default)]
    pub heading_offset: f64,
}

impl OdometerModel {
    /// Inverts the generator's planted hip models.
    pub fn matching(gait: &super::GaitParams) -> Self {
        Self {
            indicators: vec![Indicator::HipSum, Indicator::HipDifference],
            weights: vec![1.0 / gait.hip_gain, 0.0],
            offset: -gait.hip_offset / gait.hip_gain,
            heading_weights: vec![0.0, 0.25 / gait.turn_gain],
            heading_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.indicators.len() {
            return Err(invalid("odometer weights must match the indicator list"));
        }
        if !self.heading_weights.is_empty() && self.heading_weights.len() != self.indicators.len() {
            return Err(invalid("odometer heading weights must match the indicator list"));
        }
        Ok(())
    }

    fn values(&self, s: &StrideStats) -> Result<Vec<f64>> {
        self.indicators
            .iter()
            .map(|ind| {
                let v = ind.value(s);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(invalid(format!("indicator {ind} missing for stride at {:.3} s", s.t_start)))
                }
            })
            .collect()
    }

    pub fn stride_length(&self, s: &StrideStats) -> Result<f64> {
        self.validate()?;
        let x = self.values(s)?;
        Ok(self.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + self.offset)
    }

    pub fn delta_heading(&self, s: &StrideStats) -> Result<f64> {
        self.validate()?;
        let x = self.values(s)?;
        Ok(self.heading_weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + self.heading_offset)
    }
}

/// Planar velocity over a stride: speed is stride length times motor
/// frequency, direction is `heading` at the stride start advanced by half
/// the modelled heading change.
pub fn odometer_velocity(om: &OdometerModel, s: &StrideStats, heading: f64) -> Result<[f64; 2]> {
    if !s.motor_frequency.is_finite() {
        return Err(invalid(format!("motor frequency missing for stride at {:.3} s", s.t_start)));
    }
    let speed = om.stride_length(s)? * s.motor_frequency;
    let dir = heading + 0.5 * om.delta_heading(s)?;
    Ok([speed * dir.cos(), speed * dir.sin()])
}

/// Per-stride odometer output for fusion.
pub fn odometer_stream(om: &OdometerModel, stats: &[StrideStats]) -> Result<Vec<OdometerSample>> {
    stats
        .iter()
        .map(|s| {
            Ok(OdometerSample {
                t_start: s.t_start,
                t_end: s.t_end,
                speed: om.stride_length(s)? * s.motor_frequency,
                delta_heading: om.delta_heading(s)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::analysis::correlation_matrix;
    use crate::nav::generate::{generate_gait_data, GaitParams, NoiseParams, Scenario};

    fn pulses(freq: f64, duration: f64, rate: f64) -> Vec<GaitSensorFrame> {
        (0..=(duration * rate) as usize)
            .map(|i| {
                let t = i as f64 / rate;
                let tau = (freq * t).fract();
                let p = if tau < 0.5 { (std::f64::consts::PI * tau / 0.5).sin() } else { 0.0 };
                GaitSensorFrame {
                    t,
                    hip: [0.0; LEGS],
                    knee: [0.0; LEGS],
                    pressure: [p; LEGS],
                    motor_frequency: freq,
                }
            })
            .collect()
    }

    #[test]
    fn two_hertz_for_ten_seconds() {
        let n = detect_strides(&pulses(2.0, 10.0, 100.0), 0).unwrap().len();
        assert!((19..=21).contains(&n), "{n}");
    }

    #[test]
    fn silent_foot_is_reported() {
        let mut f = pulses(2.0, 5.0, 100.0);
        for fr in &mut f {
            fr.pressure[2] = 0.0;
        }
        assert!(matches!(detect_strides(&f, 2), Err(Error::SilentChannel(_))));
        assert!(detect_strides(&f, 4).is_err());
    }

    #[test]
    fn rolling_max_matches_brute_force() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let r = rolling_max(&x, 4);
        for i in 0..x.len() {
            let lo = i.saturating_sub(4);
            let hi = (i + 4).min(x.len() - 1);
            assert_eq!(r[i], x[lo..=hi].iter().cloned().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn jittered_duty_matches_event_log() {
        let sc = Scenario {
            gait: GaitParams {
                duty_jitter: 0.1,
                ..GaitParams::default()
            },
            ..Scenario::default()
        };
        let d = generate_gait_data(&sc).unwrap();
        for leg in 0..LEGS {
            let ev = detect_strides(&d.frames, leg).unwrap();
            assert_eq!(ev.len(), d.touchdowns[leg].len(), "leg {leg}");
        }
    }

    #[test]
    fn indicator_names_round_trip() {
        for ind in Indicator::standard_set().into_iter().chain([Indicator::HipDifference]) {
            assert_eq!(ind.to_string().parse::<Indicator>().unwrap(), ind);
        }
        assert!("hip_amp5".parse::<Indicator>().is_err());
        assert!("elbow1".parse::<Indicator>().is_err());
    }

    fn stats_with(hip_sum: f64, fm: f64) -> StrideStats {
        StrideStats {
            t_start: 0.0,
            t_end: 1.0 / fm,
            motor_frequency: fm,
            hip_amplitude: [0.25 * hip_sum; LEGS],
            knee_amplitude: [0.0; LEGS],
            duty: [0.5; LEGS],
            impulse: [0.1; LEGS],
        }
    }

    #[test]
    fn odometer_products() {
        let om = OdometerModel {
            indicators: vec![Indicator::HipSum],
            weights: vec![0.5],
            offset: 0.0,
            heading_weights: vec![],
            heading_offset: 0.0,
        };
        let v = odometer_velocity(&om, &stats_with(0.2, 2.0), 0.0).unwrap();
        assert!((v[0] - 0.2).abs() < 1e-12 && v[1] == 0.0);
        let constant = OdometerModel {
            weights: vec![0.0],
            offset: 0.3,
            ..om.clone()
        };
        let v = odometer_velocity(&constant, &stats_with(0.9, 1.5), std::f64::consts::FRAC_PI_2).unwrap();
        assert!((v[1] - 0.45).abs() < 1e-12 && v[0].abs() < 1e-12);
        let mut missing = stats_with(0.2, 2.0);
        missing.hip_amplitude[3] = f64::NAN;
        assert!(odometer_velocity(&om, &missing, 0.0).is_err());
        let bad = OdometerModel { weights: vec![], ..om };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn matching_odometer_tracks_generator_speed() {
        let sc = Scenario {
            noise: NoiseParams {
                hip_noise: 0.0,
                ..NoiseParams::default()
            },
            waypoints: vec![[0.0, 0.0], [40.0, 0.0]],
            ..Scenario::default()
        };
        let d = generate_gait_data(&sc).unwrap();
        let ev = detect_strides(&d.frames, 0).unwrap();
        let truth = stride_truth(&d.truth, &ev).unwrap();
        let stats = stride_stats(&d.frames, &ev).unwrap();
        let om = OdometerModel::matching(&sc.gait);
        let mut checked = 0;
        for k in 1..truth.len() - 1 {
            let (s, tr) = (&stats[k], &truth[k]);
            let speed = om.stride_length(s).unwrap() * s.motor_frequency;
            let true_speed = tr.length / (tr.t_end - tr.t_start);
            // Strides at steady speed; the legs out of phase with the
            // reference foot straddle neighbouring strides.
            let steady = (truth[k - 1].length - tr.length).abs() < 0.01 * tr.length
                && (truth[k + 1].length - tr.length).abs() < 0.01 * tr.length;
            if steady && true_speed > 0.1 {
                assert!((speed - true_speed).abs() < 0.02 * true_speed, "{} {speed} {true_speed}", s.t_start);
                checked += 1;
            }
        }
        assert!(checked > 20, "{checked}");
    }

    #[test]
    fn planted_and_null_indicators() {
        let sc = Scenario {
            waypoints: vec![[0.0, 0.0], [25.0, 0.0], [25.0, 8.0], [0.0, 8.0], [0.0, 0.0]],
            ..Scenario::default()
        };
        let d = generate_gait_data(&sc).unwrap();
        let ev = detect_strides(&d.frames, 0).unwrap();
        let truth = stride_truth(&d.truth, &ev).unwrap();
        assert!(truth.len() >= 200, "{}", truth.len());
        let set = Indicator::standard_set();
        let table = build_indicator_table(&d.frames, &truth, &set).unwrap();
        assert_eq!(table.len(), 2 + set.len());
        let m = correlation_matrix(&table).unwrap();
        assert!(m.get("hip_sum", "stride_length").unwrap() > 0.9);
        let knee = m.get("knee_amp1", "stride_length").unwrap();
        assert!(knee.abs() < 0.2, "{knee}");
        assert!(build_indicator_table(&d.frames, &truth[..5], &set).is_err());
    }

    proptest! {
        #[test]
        fn detection_ignores_pressure_scale(scale in 1e-3f64..1e3) {
            let f = pulses(1.7, 6.0, 100.0);
            let scaled: Vec<GaitSensorFrame> = f
                .iter()
                .map(|fr| GaitSensorFrame { pressure: fr.pressure.map(|p| p * scale), ..*fr })
                .collect();
            let a = detect_strides(&f, 1).unwrap();
            let b = detect_strides(&scaled, 1).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
