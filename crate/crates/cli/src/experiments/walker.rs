use compliance_core::plant::{simulate_vibrobot, VibrobotParams};
use compliance_core::svg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{checked, Block};
use crate::artifacts::{csv_table, Artifacts};
use crate::CliError;

/// Mean walking velocity of the rigid vibrating walker per CoM offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Vibrobot {
    /// Robot; `x_com` is replaced by each entry of `x_com`.
    pub robot: VibrobotParams,
    /// CoM offsets from the foot midpoint (m).
    pub x_com: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
    /// Sample stride of the written trajectories.
    pub decimate: usize,
}

impl Default for Vibrobot {
    fn default() -> Self {
        Self {
            robot: VibrobotParams::default(),
            x_com: vec![-0.04, -0.02, 0.0, 0.02, 0.04],
            duration: 6.0,
            dt: 1e-4,
            decimate: 50,
        }
    }
}

impl Block for Vibrobot {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        if self.x_com.is_empty() || self.decimate == 0 {
            return Err("x_com must not be empty and decimate must be >= 1".into());
        }
        if !(self.duration > 0.0 && self.dt > 0.0) {
            return Err("duration and dt must be positive".into());
        }
        for &x in &self.x_com {
            checked(VibrobotParams { x_com: x, ..self.robot.clone() }.validate(), &format!("x_com {x}"))?;
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let runs = self
            .x_com
            .par_iter()
            .map(|&x| simulate_vibrobot(&VibrobotParams { x_com: x, ..self.robot.clone() }, self.duration, self.dt))
            .collect::<compliance_core::Result<Vec<_>>>()?;
        let rows = self.x_com.iter().zip(&runs).map(|(x, r)| vec![x.to_string(), r.mean_velocity.to_string()]);
        art.csv(
            "velocity",
            "mean horizontal velocity over the settled half of each run",
            &csv_table(&["x_com", "mean_velocity"], rows),
            &[("x_com", "m"), ("mean_velocity", "m/s")],
        )?;
        let mut traces = Vec::new();
        for (x, r) in self.x_com.iter().zip(&runs) {
            let ts = r.series.decimate(self.decimate);
            let t: Vec<f64> = (0..ts.len()).map(|i| ts.time(i)).collect();
            let pos = ts.channel("x").unwrap_or(&[]).iter().map(|v| v * 1e3).collect::<Vec<_>>();
            traces.push((format!("x_com = {} mm", x * 1e3), t, pos));
        }
        let first = runs[0].series.decimate(self.decimate);
        art.csv_with("trajectory", "decimated state of the first configured offset", &first.to_csv(), |n| {
            match n {
                "time" => "s",
                "x" | "y" | "com_x" => "m",
                "theta" | "phi" => "rad",
                "vx" => "m/s",
                _ => "1",
            }
            .to_string()
        })?;
        let series: Vec<(&str, &[f64], &[f64])> = traces.iter().map(|(l, t, p)| (l.as_str(), t.as_slice(), p.as_slice())).collect();
        art.svg("position", "foot position over time per offset", &svg::line_plot("Vibrating walker", "time (s)", "position (mm)", &series))
    }
}
