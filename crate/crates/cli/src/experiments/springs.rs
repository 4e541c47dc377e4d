use compliance_core::springs::{concavity, Concavity, PneumaticSpringParams};
use compliance_core::svg;
use serde::{Deserialize, Serialize};

use super::{checked, Block};
use crate::artifacts::{csv_table, Artifacts};
use crate::CliError;

/// Force curves of the pneumatic leg spring for a set of upper dead volumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpringCurves {
    /// Cylinder; its `dead_upper` is replaced by each entry of `dead_volumes`.
    pub spring: PneumaticSpringParams,
    /// Upper-chamber dead volumes (m³).
    pub dead_volumes: Vec<f64>,
    /// Largest compression plotted (m).
    pub x_max: f64,
    pub points: usize,
    /// Interval over which concavity is classified (m).
    pub concavity_window: [f64; 2],
}

impl Default for SpringCurves {
    fn default() -> Self {
        Self {
            spring: PneumaticSpringParams::hopper_reference(0.0),
            dead_volumes: vec![0.0, 5e-6, 1e-5, 2e-5, 5e-5],
            x_max: 0.05,
            points: 51,
            concavity_window: [0.0, 0.01],
        }
    }
}

#[derive(Serialize)]
struct CurveSummary {
    dead_volume: f64,
    force_at_zero: f64,
    concavity_window: Concavity,
    concavity_full: Concavity,
}

impl SpringCurves {
    fn with_dead(&self, c: f64) -> PneumaticSpringParams {
        PneumaticSpringParams { dead_upper: c, ..self.spring }
    }
}

impl Block for SpringCurves {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        if self.dead_volumes.is_empty() {
            return Err("dead_volumes must not be empty".into());
        }
        if self.points < 2 {
            return Err("points must be at least 2".into());
        }
        if !(self.x_max > 0.0 && self.x_max <= self.spring.max_compression) {
            return Err("x_max must lie in (0, spring.max_compression]".into());
        }
        let [lo, hi] = self.concavity_window;
        if !(lo >= 0.0 && hi > lo && hi <= self.spring.max_compression) {
            return Err("concavity_window must be an ordered interval inside the spring range".into());
        }
        for &c in &self.dead_volumes {
            checked(self.with_dead(c).validate(), &format!("dead volume {c}"))?;
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let xs: Vec<f64> = (0..self.points)
            .map(|i| self.x_max * i as f64 / (self.points - 1) as f64)
            .collect();
        let mut rows = Vec::new();
        let mut curves = Vec::new();
        let mut summary = Vec::new();
        for &c in &self.dead_volumes {
            let s = self.with_dead(c);
            let mut f = Vec::with_capacity(xs.len());
            for &x in &xs {
                let (force, k) = (s.force(x)?, s.stiffness(x)?);
                rows.push(vec![c.to_string(), x.to_string(), force.to_string(), k.to_string()]);
                f.push(force);
            }
            curves.push((format!("C_v = {} cm3", c * 1e6), f));
            let [lo, hi] = self.concavity_window;
            summary.push(CurveSummary {
                dead_volume: c,
                force_at_zero: s.force(0.0)?,
                concavity_window: concavity(&s, lo, hi, 50)?,
                concavity_full: concavity(&s, 0.0, self.x_max, 50)?,
            });
        }
        art.csv(
            "curves",
            "spring force and tangent stiffness per dead volume",
            &csv_table(&["dead_volume", "x", "force", "stiffness"], rows),
            &[("dead_volume", "m^3"), ("x", "m"), ("force", "N"), ("stiffness", "N/m")],
        )?;
        art.json("concavity", "force at zero compression and concavity class per dead volume", &summary)?;
        let mm: Vec<f64> = xs.iter().map(|x| x * 1e3).collect();
        let series: Vec<(&str, &[f64], &[f64])> = curves.iter().map(|(l, f)| (l.as_str(), mm.as_slice(), f.as_slice())).collect();
        art.svg("curves", "force over compression", &svg::line_plot("Pneumatic spring", "compression (mm)", "force (N)", &series))
    }
}
