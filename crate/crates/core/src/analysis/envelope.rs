//! Amplitude envelopes from the discrete analytic signal.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::timeseries::TimeSeries;

pub const MIN_ENVELOPE_LEN: usize = 64;
/// Fraction of samples at each end whose envelope is unreliable.
pub const EDGE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub values: Vec<f64>,
    /// First reliable sample.
    pub start: usize,
    /// One past the last reliable sample.
    pub end: usize,
}

impl Envelope {
    pub fn interior(&self) -> &[f64] {
        &self.values[self.start..self.end]
    }

    pub fn is_reliable(&self, i: usize) -> bool {
        (self.start..self.end).contains(&i)
    }
}

// Dominant period in samples from the peak of the zero-padded spectrum,
// refined by parabolic interpolation on the magnitudes.
fn dominant_period(centred: &[f64], size: usize, planner: &mut FftPlanner<f64>) -> Option<f64> {
    let mut buf: Vec<Complex<f64>> = centred.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(size).process(&mut buf);
    let mag: Vec<f64> = buf[..size / 2].iter().map(|c| c.norm()).collect();
    let (k, &peak) = mag.iter().enumerate().skip(1).max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) || k + 1 >= mag.len() {
        return None;
    }
    let (a, b, c) = (mag[k - 1], peak, mag[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Some(size as f64 / (k as f64 + shift))
}

fn sample_at(x: &[f64], s: f64) -> f64 {
    let i = (s.floor() as usize).min(x.len() - 1);
    let frac = s - i as f64;
    if i + 1 < x.len() {
        x[i] * (1.0 - frac) + x[i + 1] * frac
    } else {
        x[i]
    }
}

/// Magnitude of the analytic signal of the mean-removed input.
///
/// The spectrum is taken over a power-of-two window of at least twice the
/// record length. The padding continues each end of the record periodically
/// at the dominant period instead of holding zeros, so the truncation ripple
/// of the transform stays out of the interior.
pub fn envelope(signal: &[f64], dt: f64) -> Result<Envelope> {
    let n = signal.len();
    if n < MIN_ENVELOPE_LEN {
        return Err(Error::TooShort {
            len: n,
            min: MIN_ENVELOPE_LEN,
        });
    }
    if !(dt > 0.0) {
        return Err(invalid("sample period must be positive"));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for (b, &v) in buf.iter_mut().zip(&centred) {
        b.re = v;
    }
    if let Some(period) = dominant_period(&centred, size, &mut planner).filter(|&p| p < 0.5 * n as f64) {
        let pad = size - n;
        let ahead = pad / 2;
        let last = (n - 1) as f64;
        for k in 1..=ahead {
            let t = last + k as f64;
            let s = t - period * (k as f64 / period).ceil();
            buf[n - 1 + k].re = sample_at(&centred, s);
        }
        for j in 1..=pad - ahead {
            let s = -(j as f64) + period * (j as f64 / period).ceil();
            buf[size - j].re = sample_at(&centred, s);
        }
    }
    planner.plan_fft_forward(size).process(&mut buf);
    // One-sided spectrum: keep DC and Nyquist, double positive bins.
    for (k, c) in buf.iter_mut().enumerate() {
        if k == 0 || k == size / 2 {
            continue;
        }
        if k < size / 2 {
            *c *= 2.0;
        } else {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    let values = buf[..n].iter().map(|c| c.norm() * scale).collect();
    let edge = ((n as f64) * EDGE_FRACTION).ceil() as usize;
    Ok(Envelope {
        values,
        start: edge,
        end: n - edge,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median envelope over the last `last_n_cycles` periods of `channel`.
///
/// The envelope is computed on the final `3·last_n_cycles` periods, and the
/// window is pulled back from the unreliable trailing edge.
pub fn steady_amplitude(ts: &TimeSeries, channel: &str, last_n_cycles: usize, f: f64) -> Result<f64> {
    let data = ts
        .channel(channel)
        .ok_or_else(|| invalid(format!("no channel '{channel}'")))?;
    if last_n_cycles == 0 || !(f > 0.0) {
        return Err(invalid("steady amplitude needs at least one cycle and f > 0"));
    }
    let per_cycle = 1.0 / (f * ts.dt);
    let window = (last_n_cycles as f64 * per_cycle).round() as usize;
    let span = 3 * window;
    if span > data.len() || window == 0 {
        return Err(Error::TooShort {
            len: data.len(),
            min: span.max(1),
        });
    }
    let segment = &data[data.len() - span..];
    let env = envelope(segment, ts.dt)?;
    let hi = env.end;
    let lo = hi.saturating_sub(window).max(env.start);
    Ok(median(env.values[lo..hi].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| f(i as f64 * dt)).collect()
    }

    #[test]
    fn pure_tone_envelope_is_flat() {
        let s = sampled(|t| 0.7 * (2.0 * PI * 3.0 * t).sin(), 1e-3, 10_000);
        let env = envelope(&s, 1e-3).unwrap();
        for v in env.interior() {
            assert!((v - 0.7).abs() < 0.007, "{v}");
        }
    }

    #[test]
    fn beat_envelope_follows_cosine() {
        let dt = 1e-3;
        let s = sampled(|t| (2.0 * PI * 5.0 * t).sin() + (2.0 * PI * 5.5 * t).sin(), dt, 20_000);
        let env = envelope(&s, dt).unwrap();
        let mut worst: f64 = 0.0;
        for i in env.start..env.end {
            let t = i as f64 * dt;
            let exact = 2.0 * (PI * 0.5 * t).cos().abs();
            worst = worst.max((env.values[i] - exact).abs());
        }
        assert!(worst < 0.05, "{worst}");
        let interior = env.interior();
        let max = interior.iter().cloned().fold(f64::MIN, f64::max);
        let min = interior.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max > 1.95 && min < 0.05);
    }

    #[test]
    fn silent_signal_has_zero_envelope() {
        let env = envelope(&[0.0; 100], 0.01).unwrap();
        assert!(env.values.iter().all(|&v| v == 0.0));
        assert!(envelope(&[0.0; 10], 0.01).is_err());
    }

    #[test]
    fn steady_amplitude_reads_the_final_segment() {
        let dt = 1e-3;
        let s = sampled(|t| if t < 5.0 { 0.2 } else { 0.5 } * (2.0 * PI * 4.0 * t).sin(), dt, 12_000);
        let ts = TimeSeries::from_columns(dt, 0.0, vec![("y".into(), s)]).unwrap();
        let a = steady_amplitude(&ts, "y", 8, 4.0).unwrap();
        assert!((a - 0.5).abs() < 0.005, "{a}");
        assert!(steady_amplitude(&ts, "y", 100, 4.0).is_err());
    }

    #[test]
    fn envelope_bounds_the_signal() {
        let dt = 1e-3;
        let s = sampled(|t| (2.0 * PI * 2.0 * t).sin() * (1.0 + 0.5 * (0.7 * t).sin()) + 0.3 * (2.0 * PI * 7.0 * t).cos(), dt, 8_000);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let env = envelope(&s, dt).unwrap();
        let scale = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in env.start..env.end {
            assert!(env.values[i] >= (s[i] - mean).abs() - 1e-9 * scale);
        }
    }
}
