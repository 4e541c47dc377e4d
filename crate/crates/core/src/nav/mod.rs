//! Legged dead reckoning: synthetic gait and IMU data, planar strapdown
//! navigation, stride detection, a virtual odometer and error-state Kalman
//! fusion of the two.

pub mod fusion;
pub mod generate;
pub mod io;
pub mod path;
pub mod strapdown;
pub mod stride;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use fusion::{ins_only, kf_fuse, ErrorState, FusionConfig, FusionRun, OdometerSample};
pub use generate::{generate_gait_data, GaitData, GaitParams, NoiseParams, Scenario};
pub use path::{Path, SpeedProfile};
pub use strapdown::{integrate, strapdown_update};
pub use stride::{
    build_indicator_table, detect_strides, odometer_stream, odometer_velocity, stride_stats, stride_truth, Indicator,
    OdometerModel, StrideStats, StrideTruth,
};

/// Number of legs on the robot. Legs are ordered front-left, front-right,
/// rear-left, rear-right.
pub const LEGS: usize = 4;

/// Body-frame inertial sample. `ax`, `ay` and `gz` are averages over the
/// interval `(t - dt, t]` ending at the timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub gz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitSensorFrame {
    pub t: f64,
    pub hip: [f64; LEGS],
    pub knee: [f64; LEGS],
    /// Normalized foot pressures, never negative.
    pub pressure: [f64; LEGS],
    pub motor_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    pub t: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    /// Yaw in [−π, π).
    pub heading: f64,
}

impl NavState {
    pub fn at_rest(t: f64, position: [f64; 2], heading: f64) -> Self {
        Self {
            t,
            position,
            velocity: [0.0; 2],
            heading: wrap_angle(heading),
        }
    }

    pub fn distance_to(&self, other: &NavState) -> f64 {
        (self.position[0] - other.position[0]).hypot(self.position[1] - other.position[1])
    }
}

/// Sensor offsets removed before integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Biases {
    /// Yaw-rate bias (rad/s).
    pub gyro: f64,
    /// Body-frame accelerometer bias (m/s²).
    pub accel: [f64; 2],
}

/// Wraps an angle to [−π, π).
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Rotates a body-frame vector into the navigation frame.
pub(crate) fn rotate(psi: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = psi.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}
