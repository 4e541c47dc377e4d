use compliance_core::analysis::{fit_damped_oscillation, infer_mass_ratio, DampedFit};
use compliance_core::modes::{modal_response, mode_sketch, plate_modes, NormalMode, PlateModel};
use compliance_core::plant::{step_response, LegModel};
use compliance_core::springs::{LinearSpringParams, SpringModel};
use compliance_core::svg;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{checked, Block};
use crate::artifacts::{csv_table, Artifacts};
use crate::CliError;

/// Normal modes of a plate on springs and a single-mode forcing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Modes {
    pub plate: PlateModel,
    /// Modal damping ratio applied to every mode.
    pub zeta: f64,
    /// Index (ascending frequency) of the mode driven at its own frequency.
    pub forced_mode: usize,
    /// Generalised force amplitude along `M·φ`.
    pub force_amplitude: f64,
    pub duration: f64,
    pub dt: f64,
}

impl Default for Modes {
    fn default() -> Self {
        Self {
            plate: PlateModel::uniform(2.0, 0.25, 0.1, 400.0),
            zeta: 0.0,
            forced_mode: 0,
            force_amplitude: 1.0,
            duration: 5.0,
            dt: 1e-3,
        }
    }
}

#[derive(Serialize)]
struct ModeReport<'a> {
    modes: &'a [NormalMode],
    /// ω_i / ω_0 in ascending order.
    frequency_ratios: Vec<f64>,
    forced_mode: usize,
    /// Peak energy of each mode relative to the forced one.
    relative_peak_energy: Vec<f64>,
}

impl Block for Modes {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        checked(self.plate.validate(), "plate")?;
        if self.forced_mode >= 3 {
            return Err("forced_mode must index one of the three plate modes".into());
        }
        if !(self.zeta >= 0.0 && self.duration > 0.0 && self.dt > 0.0 && self.force_amplitude.is_finite()) {
            return Err("need zeta >= 0, duration > 0, dt > 0 and a finite force".into());
        }
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let (set, m, _) = plate_modes(&self.plate)?;
        let rows = set.modes.iter().enumerate().map(|(i, md)| {
            vec![
                i.to_string(),
                format!("{:?}", md.label),
                md.omega.to_string(),
                md.shape[0].to_string(),
                md.shape[1].to_string(),
                md.shape[2].to_string(),
            ]
        });
        art.csv(
            "modes",
            "mode frequencies, labels and mass-normalised shapes",
            &csv_table(&["mode", "label", "omega", "heave", "pitch", "roll"], rows),
            &[
                ("mode", "1"),
                ("label", "1"),
                ("omega", "rad/s"),
                ("heave", "kg^-1/2"),
                ("pitch", "kg^-1/2 m^-1"),
                ("roll", "kg^-1/2 m^-1"),
            ],
        )?;

        let target = &set.modes[self.forced_mode];
        let n = target.shape.len();
        let direction: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] * target.shape[j]).sum()).collect();
        let steps = (self.duration / self.dt).round() as usize;
        let forcing: Vec<Vec<f64>> = (0..=steps)
            .map(|n| {
                let s = self.force_amplitude * (target.omega * n as f64 * self.dt).sin();
                direction.iter().map(|d| s * d).collect()
            })
            .collect();
        let zeta = vec![self.zeta; set.modes.len()];
        let initial = vec![(0.0, 0.0); set.modes.len()];
        let resp = modal_response(&set, &zeta, &forcing, &initial, self.dt)?;
        let peaks: Vec<f64> = resp.energy.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect();
        let reference = peaks[self.forced_mode].max(f64::MIN_POSITIVE);
        let report = ModeReport {
            modes: &set.modes,
            frequency_ratios: set.modes.iter().map(|md| md.omega / set.modes[0].omega).collect(),
            forced_mode: self.forced_mode,
            relative_peak_energy: peaks.iter().map(|p| p / reference).collect(),
        };
        art.json("modes", "mode set, frequency ratios and energy leakage of the forcing run", &report)?;

        let mut header = vec!["time".to_string()];
        header.extend((0..set.modes.len()).map(|j| format!("energy_{j}")));
        let rows = (0..=steps).map(|n| {
            let mut r = vec![(n as f64 * self.dt).to_string()];
            r.extend(resp.energy.iter().map(|e| e[n].to_string()));
            r
        });
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        art.csv_with("energy", "modal energy per unit modal mass under single-mode forcing", &csv_table(&h, rows), |n| {
            if n == "time" { "s" } else { "J/kg" }.to_string()
        })?;
        art.svg("sketch", "mode shapes, side and front views", &mode_sketch(&self.plate, &set))?;
        let t: Vec<f64> = (0..=steps).map(|n| n as f64 * self.dt).collect();
        let labels: Vec<String> = set.modes.iter().map(|md| format!("{:?}", md.label)).collect();
        let series: Vec<(&str, &[f64], &[f64])> = labels.iter().zip(&resp.energy).map(|(l, e)| (l.as_str(), t.as_slice(), e.as_slice())).collect();
        art.svg("energy", "modal energies over time", &svg::line_plot("Single-mode forcing", "time (s)", "energy (J/kg)", &series))
    }
}

fn leg(m_eff: f64) -> LegModel {
    LegModel {
        m_eff,
        spring: SpringModel::Linear(LinearSpringParams { k: 400.0, rest_length: 0.3 }),
        damping: 2.0,
    }
}

/// Drop tests of a front and a rear leg sharing one spring type.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Identify {
    pub front: LegModel,
    pub rear: LegModel,
    /// Initial compression (m).
    pub x0: f64,
    pub duration: f64,
    pub dt: f64,
    /// Measurement noise standard deviation as a fraction of `x0`.
    pub noise: f64,
}

impl Default for Identify {
    fn default() -> Self {
        Self {
            front: leg(0.6),
            rear: leg(1.0),
            x0: 0.02,
            duration: 3.0,
            dt: 1e-3,
            noise: 0.0,
        }
    }
}

#[derive(Serialize)]
struct FitReport {
    front: DampedFit,
    rear: DampedFit,
    /// Front over rear effective mass, inferred from the fits.
    mass_ratio: f64,
    /// Same ratio from the configured masses.
    configured_ratio: f64,
}

impl Block for Identify {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        checked(self.front.validate(), "front")?;
        checked(self.rear.validate(), "rear")?;
        if !(self.x0 != 0.0 && self.duration > 0.0 && self.dt > 0.0 && self.noise >= 0.0) {
            return Err("need x0 != 0, duration > 0, dt > 0 and noise >= 0".into());
        }
        Ok(())
    }

    fn execute(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise * self.x0.abs()).map_err(|e| CliError::Runtime(e.to_string()))?;
        let mut measure = |l: &LegModel| -> Result<Vec<f64>, CliError> {
            let ts = step_response(l, self.x0, self.duration, self.dt)?;
            let x = ts.channel("x").ok_or_else(|| CliError::Runtime("leg response lacks x".into()))?;
            Ok(x.iter().map(|v| v + noise.sample(&mut rng)).collect())
        };
        let (xf, xr) = (measure(&self.front)?, measure(&self.rear)?);
        let (ff, fr) = (fit_damped_oscillation(&xf, self.dt)?, fit_damped_oscillation(&xr, self.dt)?);
        let rows = xf
            .iter()
            .zip(&xr)
            .enumerate()
            .map(|(i, (a, b))| vec![(i as f64 * self.dt).to_string(), a.to_string(), b.to_string()]);
        art.csv(
            "responses",
            "measured leg compression after release",
            &csv_table(&["time", "x_front", "x_rear"], rows),
            &[("time", "s"), ("x_front", "m"), ("x_rear", "m")],
        )?;
        let report = FitReport {
            front: ff,
            rear: fr,
            mass_ratio: infer_mass_ratio(&ff, &fr)?,
            configured_ratio: self.front.m_eff / self.rear.m_eff,
        };
        art.json("fits", "damped-oscillation fits (sigma 1/s, omega_d rad/s) and mass ratio", &report)?;
        let t: Vec<f64> = (0..xf.len()).map(|i| i as f64 * self.dt).collect();
        let model = |f: &DampedFit| t.iter().map(|&s| f.eval(s)).collect::<Vec<_>>();
        let (mf, mr) = (model(&ff), model(&fr));
        art.svg(
            "fits",
            "measured responses with fitted curves",
            &svg::line_plot(
                "Leg identification",
                "time (s)",
                "compression (m)",
                &[("front", &t, &xf), ("front fit", &t, &mf), ("rear", &t, &xr), ("rear fit", &t, &mr)],
            ),
        )
    }
}
