use std::f64::consts::PI;

use compliance_core::controllers::{
    entrain, quad_community_run, time_averaged_order, CommunityParams, EntrainPlant, EntrainRun, FrequencyDistribution,
    HopfParams, KuramotoCommunity, QuadBody, QuadParams,
};
use compliance_core::svg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{checked, median, Block};
use crate::artifacts::{cell, csv_table, Artifacts};
use crate::CliError;

/// Adaptive Hopf oscillator against a plant: initial-frequency sweep and
/// phase-lag sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Entrain {
    pub plant: EntrainPlant,
    /// Oscillator; `omega_init` and `phase_lag` are set per run.
    pub oscillator: HopfParams,
    /// Frequency the ratios refer to (rad/s); defaults to the plant's
    /// natural frequency.
    pub omega_ref: Option<f64>,
    pub omega_ratios: Vec<f64>,
    /// Feedback phase lags (rad), run at `lag_ratio`.
    pub phase_lags: Vec<f64>,
    pub lag_ratio: f64,
    pub duration: f64,
    pub dt: f64,
    pub decimate: usize,
}

impl Default for Entrain {
    fn default() -> Self {
        Self {
            plant: EntrainPlant::reference(0.0),
            oscillator: HopfParams::reference(2.0 * PI),
            omega_ref: None,
            omega_ratios: vec![0.6, 0.8, 1.0, 1.2, 1.5],
            phase_lags: (0..8).map(|k| k as f64 * PI / 4.0).collect(),
            lag_ratio: 0.8,
            duration: 100.0,
            dt: 1e-3,
            decimate: 100,
        }
    }
}

impl Entrain {
    fn omega_ref(&self) -> Option<f64> {
        self.omega_ref.or_else(|| self.plant.natural_frequency())
    }
}

impl Block for Entrain {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        checked(self.plant.validate(), "plant")?;
        checked(self.oscillator.validate(), "oscillator")?;
        let w = self.omega_ref().ok_or("omega_ref is required for a plant without a natural frequency")?;
        if !(w > 0.0) || self.omega_ratios.iter().chain([&self.lag_ratio]).any(|r| !(*r > 0.0)) {
            return Err("omega_ref and all ratios must be positive".into());
        }
        if !(self.duration > 0.0 && self.dt > 0.0) || self.decimate == 0 {
            return Err("duration, dt and decimate must be positive".into());
        }
        self.omega_ref = Some(w);
        Ok(())
    }

    fn execute(&self, _seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let w0 = self.omega_ref().expect("checked");
        let mut jobs: Vec<(&str, f64, f64)> = self
            .omega_ratios
            .iter()
            .map(|&r| ("omega", r * w0, self.oscillator.phase_lag))
            .collect();
        jobs.extend(self.phase_lags.iter().map(|&l| ("lag", self.lag_ratio * w0, l)));
        let runs: Vec<EntrainRun> = jobs
            .par_iter()
            .map(|&(_, w, lag)| {
                let p = HopfParams { omega_init: w, phase_lag: lag, ..self.oscillator };
                entrain(&self.plant, &p, self.duration, self.dt)
            })
            .collect::<compliance_core::Result<_>>()?;
        let rows = jobs.iter().zip(&runs).map(|((sweep, w, lag), r)| {
            vec![
                sweep.to_string(),
                w.to_string(),
                lag.to_string(),
                r.omega_final.to_string(),
                u8::from(r.converged).to_string(),
                u8::from(r.diverged).to_string(),
                cell(r.convergence_time),
            ]
        });
        art.csv(
            "runs",
            "final frequency and convergence time of every run",
            &csv_table(&["sweep", "omega_init", "phase_lag", "omega_final", "converged", "diverged", "convergence_time"], rows),
            &[
                ("sweep", "1"),
                ("omega_init", "rad/s"),
                ("phase_lag", "rad"),
                ("omega_final", "rad/s"),
                ("converged", "1"),
                ("diverged", "1"),
                ("convergence_time", "s"),
            ],
        )?;
        let mut traces = Vec::new();
        for ((sweep, w, lag), r) in jobs.iter().zip(&runs) {
            let ts = r.series.decimate(self.decimate);
            let t: Vec<f64> = (0..ts.len()).map(|i| ts.time(i)).collect();
            let ratio: Vec<f64> = ts.channel("omega").unwrap_or(&[]).iter().map(|v| v / w0).collect();
            let label = if *sweep == "omega" {
                format!("omega0 x {:.2}", w / w0)
            } else {
                format!("lag {:.2} rad", lag)
            };
            traces.push((*sweep, label, t, ratio));
        }
        if let Some(first) = runs.first() {
            let ts = first.series.decimate(self.decimate);
            art.csv_with("trace", "decimated state of the first run", &ts.to_csv(), |n| {
                match n {
                    "time" => "s",
                    "omega" => "rad/s",
                    "q" | "amplitude" => "m",
                    "q_dot" => "m/s",
                    _ => "1",
                }
                .to_string()
            })?;
        }
        for sweep in ["omega", "lag"] {
            let series: Vec<(&str, &[f64], &[f64])> = traces
                .iter()
                .filter(|t| t.0 == sweep)
                .map(|(_, l, t, r)| (l.as_str(), t.as_slice(), r.as_slice()))
                .collect();
            if series.is_empty() {
                continue;
            }
            art.svg(
                &format!("{sweep}_sweep"),
                "adapted frequency over time, relative to the reference",
                &svg::line_plot("Frequency adaptation", "time (s)", "omega / omega_ref", &series),
            )?;
        }
        Ok(())
    }
}

/// Time-averaged order parameter of one community over a coupling grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Kuramoto {
    pub n: usize,
    pub distribution: FrequencyDistribution,
    pub couplings: Vec<f64>,
    pub feedback_gain: f64,
    /// Monte-Carlo draws per coupling; draw i uses seed + i.
    pub seeds: usize,
    pub duration: f64,
    /// Initial transient excluded from the average (s).
    pub settle: f64,
    pub dt: f64,
}

impl Default for Kuramoto {
    fn default() -> Self {
        Self {
            n: 2000,
            distribution: FrequencyDistribution::Lorentzian { center: 0.0, width: 1.0 },
            couplings: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
            feedback_gain: 0.0,
            seeds: 20,
            duration: 50.0,
            settle: 25.0,
            dt: 0.015,
        }
    }
}

impl Block for Kuramoto {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        if self.n == 0 || self.seeds == 0 || self.couplings.is_empty() {
            return Err("n, seeds and couplings must be non-empty".into());
        }
        if self.couplings.iter().any(|k| !(*k >= 0.0)) {
            return Err("couplings must be >= 0".into());
        }
        if !(self.dt > 0.0 && self.settle >= 0.0 && self.duration > self.settle) {
            return Err("need dt > 0 and duration > settle >= 0".into());
        }
        Ok(())
    }

    fn execute(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let jobs: Vec<(f64, u64)> = self
            .couplings
            .iter()
            .flat_map(|&k| (0..self.seeds as u64).map(move |i| (k, seed.wrapping_add(i))))
            .collect();
        let r: Vec<f64> = jobs
            .par_iter()
            .map(|&(k, s)| {
                let mut c = KuramotoCommunity::sample(self.n, self.distribution, k, self.feedback_gain, s)?;
                time_averaged_order(&mut c, self.duration, self.settle, self.dt)
            })
            .collect::<compliance_core::Result<_>>()?;
        let rows = jobs.iter().zip(&r).map(|((k, s), r)| vec![k.to_string(), s.to_string(), r.to_string()]);
        art.csv(
            "order",
            "time-averaged order parameter per coupling and seed",
            &csv_table(&["coupling", "seed", "r"], rows),
            &[("coupling", "rad/s"), ("seed", "1"), ("r", "1")],
        )?;
        let medians: Vec<f64> = r.chunks(self.seeds).map(median).collect();
        let rows = self.couplings.iter().zip(&medians).map(|(k, m)| vec![k.to_string(), m.to_string()]);
        art.csv(
            "summary",
            "median order parameter per coupling",
            &csv_table(&["coupling", "median_r"], rows),
            &[("coupling", "rad/s"), ("median_r", "1")],
        )?;
        art.svg(
            "order",
            "median order parameter against coupling",
            &svg::line_plot("Kuramoto community", "coupling K (rad/s)", "r", &[("median r", &self.couplings, &medians)]),
        )
    }
}

fn default_communities() -> Vec<CommunityParams> {
    let c = CommunityParams {
        n: 50,
        distribution: FrequencyDistribution::Lorentzian { center: 2.0 * PI * 2.0, width: 0.5 },
        coupling: 4.0,
        feedback_gain: 1.0,
    };
    vec![c; 4]
}

/// Four communities, one per hip, coupled through the body.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadCommunities {
    pub body: QuadBody,
    /// FL, FR, RL, RR.
    pub communities: Vec<CommunityParams>,
    pub initial_phase: Option<f64>,
    pub duration: f64,
    pub dt: f64,
    pub decimate: usize,
}

impl Default for QuadCommunities {
    fn default() -> Self {
        Self {
            body: QuadBody::reference(),
            communities: default_communities(),
            initial_phase: None,
            duration: 20.0,
            dt: 2e-3,
            decimate: 10,
        }
    }
}

impl Block for QuadCommunities {
    fn check(&mut self, _seed: u64) -> Result<(), String> {
        checked(self.body.validate(), "body")?;
        if self.communities.len() != 4 {
            return Err("communities needs exactly four entries".into());
        }
        if !(self.duration > 0.0 && self.dt > 0.0) || self.decimate == 0 {
            return Err("duration, dt and decimate must be positive".into());
        }
        Ok(())
    }

    fn execute(&self, seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
        let p = QuadParams {
            plant: self.body.clone(),
            communities: self.communities.clone(),
            initial_phase: self.initial_phase,
            seed,
        };
        let run = quad_community_run(&p, self.duration, self.dt)?;
        let ts = run.series.decimate(self.decimate);
        art.csv_with("series", "mean phase, order parameter and knee deflection per limb", &ts.to_csv(), |n| {
            if n == "time" {
                "s"
            } else if n.starts_with("psi") {
                "rad"
            } else if n.starts_with("knee") {
                "m"
            } else {
                "1"
            }
            .to_string()
        })?;
        art.json("plv", "pairwise phase-locking value over the second half (FL, FR, RL, RR)", &run.plv)?;
        let t: Vec<f64> = (0..ts.len()).map(|i| ts.time(i)).collect();
        let knees: Vec<(String, Vec<f64>)> = (0..4)
            .map(|i| (format!("knee {i}"), ts.channel(&format!("knee_{i}")).unwrap_or(&[]).iter().map(|v| v * 1e3).collect()))
            .collect();
        let series: Vec<(&str, &[f64], &[f64])> = knees.iter().map(|(l, k)| (l.as_str(), t.as_slice(), k.as_slice())).collect();
        art.svg("knees", "knee deflections over time", &svg::line_plot("Knee deflection", "time (s)", "deflection (mm)", &series))
    }
}
