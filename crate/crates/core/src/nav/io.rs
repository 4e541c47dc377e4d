//! CSV streams: `imu.csv` (t,ax,ay,gz), `gait.csv`
//! (t,hip1..4,knee1..4,p1..4,fmotor) and `truth.csv` (t,x,y,psi).

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{wrap_angle, GaitSensorFrame, ImuSample, NavState};
use crate::error::{invalid, Result};

#[derive(Serialize, Deserialize)]
struct GaitRow {
    t: f64,
    hip1: f64,
    hip2: f64,
    hip3: f64,
    hip4: f64,
    knee1: f64,
    knee2: f64,
    knee3: f64,
    knee4: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    p4: f64,
    fmotor: f64,
}

#[derive(Serialize, Deserialize)]
struct TruthRow {
    t: f64,
    x: f64,
    y: f64,
    psi: f64,
}

fn write_rows<T: Serialize>(rows: impl Iterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| invalid(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| invalid(format!("csv: {e}")))
}

fn read_rows<T: for<'de> Deserialize<'de>>(r: impl Read, what: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| invalid(format!("{what} row {}: {e}", i + 1))))
        .collect()
}

fn check_increasing(ts: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in ts {
        if !(t > prev) {
            return Err(invalid(format!("{what} timestamps must strictly increase (at {t})")));
        }
        prev = t;
    }
    Ok(())
}

pub fn imu_to_csv(imu: &[ImuSample]) -> Result<String> {
    write_rows(imu.iter())
}

pub fn read_imu(r: impl Read) -> Result<Vec<ImuSample>> {
    let rows: Vec<ImuSample> = read_rows(r, "imu.csv")?;
    check_increasing(rows.iter().map(|s| s.t), "imu.csv")?;
    Ok(rows)
}

pub fn gait_to_csv(frames: &[GaitSensorFrame]) -> Result<String> {
    write_rows(frames.iter().map(|f| GaitRow {
        t: f.t,
        hip1: f.hip[0],
        hip2: f.hip[1],
        hip3: f.hip[2],
        hip4: f.hip[3],
        knee1: f.knee[0],
        knee2: f.knee[1],
        knee3: f.knee[2],
        knee4: f.knee[3],
        p1: f.pressure[0],
        p2: f.pressure[1],
        p3: f.pressure[2],
        p4: f.pressure[3],
        fmotor: f.motor_frequency,
    }))
}

pub fn read_gait(r: impl Read) -> Result<Vec<GaitSensorFrame>> {
    let rows: Vec<GaitRow> = read_rows(r, "gait.csv")?;
    check_increasing(rows.iter().map(|g| g.t), "gait.csv")?;
    rows.into_iter()
        .map(|g| {
            let pressure = [g.p1, g.p2, g.p3, g.p4];
            if pressure.iter().any(|p| !(*p >= 0.0)) {
                return Err(invalid(format!("gait.csv: negative pressure at t = {}", g.t)));
            }
            Ok(GaitSensorFrame {
                t: g.t,
                hip: [g.hip1, g.hip2, g.hip3, g.hip4],
                knee: [g.knee1, g.knee2, g.knee3, g.knee4],
                pressure,
                motor_frequency: g.fmotor,
            })
        })
        .collect()
}

pub fn truth_to_csv(truth: &[NavState]) -> Result<String> {
    write_rows(truth.iter().map(|s| TruthRow {
        t: s.t,
        x: s.position[0],
        y: s.position[1],
        psi: s.heading,
    }))
}

/// Reads poses; velocities are recovered by central differences.
pub fn read_truth(r: impl Read) -> Result<Vec<NavState>> {
    let rows: Vec<TruthRow> = read_rows(r, "truth.csv")?;
    check_increasing(rows.iter().map(|s| s.t), "truth.csv")?;
    let n = rows.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let velocity = if b > a {
                let dt = rows[b].t - rows[a].t;
                [(rows[b].x - rows[a].x) / dt, (rows[b].y - rows[a].y) / dt]
            } else {
                [0.0; 2]
            };
            NavState {
                t: rows[i].t,
                position: [rows[i].x, rows[i].y],
                velocity,
                heading: wrap_angle(rows[i].psi),
            }
        })
        .collect())
}
