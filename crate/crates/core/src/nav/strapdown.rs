//! Planar strapdown mechanization.

use super::{rotate, wrap_angle, Biases, ImuSample, NavState};
use crate::error::{invalid, Error, Result};

/// Advances the navigation state over one IMU interval ending at `imu.t`.
/// The attitude is propagated first and the interval's specific force is
/// rotated with the mid-interval heading; position uses the mean of the old
/// and new velocity.
pub fn strapdown_update(s: &NavState, biases: &Biases, imu: &ImuSample, dt: f64) -> Result<NavState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("strapdown step must be positive, got {dt}")));
    }
    if ![imu.t, imu.ax, imu.ay, imu.gz].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { time: imu.t });
    }
    if (imu.t - s.t - dt).abs() > 1e-3 * dt {
        return Err(invalid(format!(
            "IMU sample at {} does not follow state at {} by {dt}",
            imu.t, s.t
        )));
    }
    let dpsi = (imu.gz - biases.gyro) * dt;
    let mid = s.heading + 0.5 * dpsi;
    let a = rotate(mid, [imu.ax - biases.accel[0], imu.ay - biases.accel[1]]);
    let v = [s.velocity[0] + a[0] * dt, s.velocity[1] + a[1] * dt];
    let p = [
        s.position[0] + 0.5 * (s.velocity[0] + v[0]) * dt,
        s.position[1] + 0.5 * (s.velocity[1] + v[1]) * dt,
    ];
    Ok(NavState {
        t: imu.t,
        position: p,
        velocity: v,
        heading: wrap_angle(s.heading + dpsi),
    })
}

/// Pure inertial dead reckoning from `init` with fixed bias compensation.
/// The first element is `init`.
pub fn integrate(imu: &[ImuSample], init: NavState, biases: &Biases) -> Result<Vec<NavState>> {
    let mut out = Vec::with_capacity(imu.len() + 1);
    out.push(init);
    let mut s = init;
    for sample in imu {
        s = strapdown_update(&s, biases, sample, sample.t - s.t)?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn still(t: f64) -> ImuSample {
        ImuSample { t, ax: 0.0, ay: 0.0, gz: 0.0 }
    }

    #[test]
    fn zero_input_only_advances_time() {
        let s = NavState::at_rest(0.0, [1.0, -2.0], 0.3);
        let n = strapdown_update(&s, &Biases::default(), &still(0.01), 0.01).unwrap();
        assert_eq!(n.position, s.position);
        assert_eq!(n.velocity, s.velocity);
        assert_eq!(n.heading, s.heading);
        assert_eq!(n.t, 0.01);
    }

    #[test]
    fn gyro_bias_drifts_linearly() {
        let b = 0.004;
        let dt = 0.01;
        let imu: Vec<ImuSample> = (1..=6000)
            .map(|k| ImuSample { gz: b, ..still(k as f64 * dt) })
            .collect();
        let out = integrate(&imu, NavState::at_rest(0.0, [0.0; 2], 0.0), &Biases::default()).unwrap();
        let last = out.last().unwrap();
        assert!((last.heading - b * last.t).abs() < 1e-9);
        assert_eq!(last.position, [0.0; 2]);
    }

    #[test]
    fn circle_closes_from_exact_imu() {
        // Constant speed v on a circle of radius r, started heading east.
        let (v, r) = (0.5, 2.0);
        let w = v / r;
        let period = 2.0 * PI / w;
        let rate = 100.0;
        let n = (period * rate).round() as usize;
        let dt = period / n as f64;
        let imu: Vec<ImuSample> = (1..=n)
            .map(|k| ImuSample { t: k as f64 * dt, ax: 0.0, ay: v * w, gz: w })
            .collect();
        let init = NavState {
            t: 0.0,
            position: [0.0; 2],
            velocity: [v, 0.0],
            heading: 0.0,
        };
        let out = integrate(&imu, init, &Biases::default()).unwrap();
        let err = out.last().unwrap().distance_to(&init);
        assert!(err < 1e-3 * 2.0 * PI * r, "{err}");
    }

    #[test]
    fn bad_samples_are_rejected() {
        let s = NavState::at_rest(0.0, [0.0; 2], 0.0);
        let nan = ImuSample { ax: f64::NAN, ..still(0.01) };
        assert!(matches!(
            strapdown_update(&s, &Biases::default(), &nan, 0.01),
            Err(Error::NonFinite { .. })
        ));
        assert!(strapdown_update(&s, &Biases::default(), &still(0.02), 0.01).is_err());
    }
}
