//! Planar reference paths: polylines whose corners are replaced by turns of
//! smoothly varying curvature, travelled with a smooth start and stop.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

const GAUSS_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GAUSS_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const PANELS: usize = 4;

/// Heading offset `σ` into a turn of total angle `turn` and length `len`;
/// curvature rises from zero as `1 − cos` and falls back to zero.
fn turn_heading(sigma: f64, turn: f64, len: f64) -> f64 {
    let u = sigma / len;
    turn * (u - (2.0 * PI * u).sin() / (2.0 * PI))
}

/// `∫₀^σ (cos ψ, sin ψ)` along a turn starting with heading 0.
fn turn_offset(sigma: f64, turn: f64, len: f64) -> [f64; 2] {
    let h = sigma / PANELS as f64;
    let mut acc = [0.0; 2];
    for k in 0..PANELS {
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let (s, c) = turn_heading(mid + 0.5 * h * x, turn, len).sin_cos();
            acc[0] += 0.5 * h * w * c;
            acc[1] += 0.5 * h * w * s;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Line { start: [f64; 2], heading: f64, len: f64 },
    /// Signed `turn` is positive to the left.
    Turn { start: [f64; 2], heading: f64, turn: f64, len: f64 },
}

impl Piece {
    fn len(&self) -> f64 {
        match *self {
            Piece::Line { len, .. } | Piece::Turn { len, .. } => len,
        }
    }

    fn heading(&self) -> f64 {
        match *self {
            Piece::Line { heading, .. } | Piece::Turn { heading, .. } => heading,
        }
    }

    /// Position, heading and curvature at arc length `s` into the piece.
    fn at(&self, s: f64) -> ([f64; 2], f64, f64) {
        match *self {
            Piece::Line { start, heading, .. } => {
                let (sn, cs) = heading.sin_cos();
                ([start[0] + s * cs, start[1] + s * sn], heading, 0.0)
            }
            Piece::Turn { start, heading, turn, len } => {
                let d = turn_offset(s, turn, len);
                let (sn, cs) = heading.sin_cos();
                let p = [start[0] + cs * d[0] - sn * d[1], start[1] + sn * d[0] + cs * d[1]];
                let kappa = turn / len * (1.0 - (2.0 * PI * s / len).cos());
                (p, heading + turn_heading(s, turn, len), kappa)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pieces: Vec<Piece>,
    start: [f64; 2],
    length: f64,
    max_curvature: f64,
}

fn wrap_pi(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

impl Path {
    /// Polyline through `waypoints` with each interior corner replaced by a
    /// turn whose peak curvature is `1 / radius`. A single waypoint gives an
    /// empty path.
    pub fn new(waypoints: &[[f64; 2]], radius: f64) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(invalid("path needs at least one waypoint"));
        }
        if !(radius > 0.0) {
            return Err(invalid("corner radius must be positive"));
        }
        let mut dirs = Vec::new();
        let mut lens = Vec::new();
        for w in waypoints.windows(2) {
            let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            let l = dx.hypot(dy);
            if !(l > 0.0) {
                return Err(invalid("consecutive waypoints must differ"));
            }
            dirs.push(dy.atan2(dx));
            lens.push(l);
        }
        // Signed turn, turn length and tangent length at each interior corner.
        let turns: Vec<f64> = (1..dirs.len()).map(|i| wrap_pi(dirs[i] - dirs[i - 1])).collect();
        if turns.iter().any(|t| t.abs() > PI - 1e-6) {
            return Err(invalid("path reverses on itself"));
        }
        let turn_len: Vec<f64> = turns.iter().map(|t| 2.0 * t.abs() * radius).collect();
        let cut: Vec<f64> = turns
            .iter()
            .zip(&turn_len)
            .map(|(&t, &l)| if t == 0.0 { 0.0 } else { turn_offset(l, t.abs(), l)[0] / (1.0 + t.cos()) })
            .collect();
        let mut pieces = Vec::new();
        let mut pos = waypoints[0];
        for i in 0..dirs.len() {
            let before = if i > 0 { cut[i - 1] } else { 0.0 };
            let after = if i + 1 < dirs.len() { cut[i] } else { 0.0 };
            let straight = lens[i] - before - after;
            if straight < -1e-12 {
                return Err(invalid(format!("segment {i} too short for the corner radius")));
            }
            let line = Piece::Line {
                start: pos,
                heading: dirs[i],
                len: straight.max(0.0),
            };
            pos = line.at(line.len()).0;
            pieces.push(line);
            if i + 1 < dirs.len() && turns[i] != 0.0 {
                let turn = Piece::Turn {
                    start: pos,
                    heading: dirs[i],
                    turn: turns[i],
                    len: turn_len[i],
                };
                pos = turn.at(turn.len()).0;
                pieces.push(turn);
            }
        }
        // Pin the last point so closed polylines close exactly.
        if let Some(Piece::Line { start, heading, len }) = pieces.last_mut() {
            let end = waypoints[waypoints.len() - 1];
            *len = (end[0] - start[0]).hypot(end[1] - start[1]);
            if *len > 0.0 {
                *heading = (end[1] - start[1]).atan2(end[0] - start[0]);
            }
        }
        let length = pieces.iter().map(Piece::len).sum();
        let max_curvature = if turns.iter().any(|t| *t != 0.0) { 1.0 / radius } else { 0.0 };
        Ok(Self {
            pieces,
            start: waypoints[0],
            length,
            max_curvature,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Largest curvature anywhere on the path (1/m).
    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }

    /// Position, heading and curvature at arc length `s`, clamped to the path.
    pub fn at(&self, s: f64) -> ([f64; 2], f64, f64) {
        let mut rest = s.clamp(0.0, self.length);
        for (i, p) in self.pieces.iter().enumerate() {
            if rest <= p.len() || i + 1 == self.pieces.len() {
                return p.at(rest.min(p.len()));
            }
            rest -= p.len();
        }
        (self.start, 0.0, 0.0)
    }

    /// Heading at arc length `s`, unwrapped along the path.
    pub fn heading_unwrapped(&self, s: f64) -> f64 {
        let Some(first) = self.pieces.first() else {
            return 0.0;
        };
        let mut acc = first.heading();
        let mut rest = s.clamp(0.0, self.length);
        for p in &self.pieces {
            let take = rest.min(p.len());
            if let Piece::Turn { turn, len, .. } = *p {
                acc += turn_heading(take, turn, len);
            }
            rest -= take;
            if rest <= 0.0 {
                break;
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Leg {
    Hold { v: f64 },
    /// Raised-cosine change of speed from `va` to `vb`.
    Ramp { va: f64, vb: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stage {
    t0: f64,
    dur: f64,
    s0: f64,
    leg: Leg,
}

impl Stage {
    fn at(&self, tau: f64) -> (f64, f64, f64) {
        match self.leg {
            Leg::Hold { v } => (self.s0 + v * tau, v, 0.0),
            Leg::Ramp { va, vb } => {
                let w = PI / self.dur;
                let dv = vb - va;
                (
                    self.s0 + va * tau + 0.5 * dv * (tau - (w * tau).sin() / w),
                    va + 0.5 * dv * (1.0 - (w * tau).cos()),
                    0.5 * dv * w * (w * tau).sin(),
                )
            }
        }
    }

    fn distance(&self) -> f64 {
        match self.leg {
            Leg::Hold { v } => v * self.dur,
            Leg::Ramp { va, vb } => 0.5 * (va + vb) * self.dur,
        }
    }
}

/// Travel schedule along a path of given length: start from rest, cycle
/// through the cruise `speeds` (each held for `hold` s, changes taking
/// `ramp` s with a raised-cosine blend), and come to rest exactly at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    stages: Vec<Stage>,
    length: f64,
}

impl SpeedProfile {
    pub fn new(length: f64, speeds: &[f64], hold: f64, ramp: f64) -> Result<Self> {
        if !(length >= 0.0 && length.is_finite()) {
            return Err(invalid("path length must be finite and non-negative"));
        }
        if length == 0.0 {
            return Ok(Self { stages: Vec::new(), length });
        }
        if speeds.is_empty() || speeds.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("cruise speeds must be positive"));
        }
        if !(ramp > 0.0 && hold >= 0.0) {
            return Err(invalid("ramp time must be positive and hold time non-negative"));
        }
        let mut stages = Vec::new();
        let push = |stages: &mut Vec<Stage>, dur: f64, leg: Leg| {
            let (t0, s0) = stages
                .last()
                .map_or((0.0, 0.0), |s: &Stage| (s.t0 + s.dur, s.s0 + s.distance()));
            stages.push(Stage { t0, dur, s0, leg });
            s0 + stages.last().map_or(0.0, Stage::distance)
        };
        let v0 = speeds[0];
        if length < v0 * ramp {
            return Err(invalid(format!(
                "path of {length} m is too short to reach {v0} m/s and stop again"
            )));
        }
        let mut s = push(&mut stages, ramp, Leg::Ramp { va: 0.0, vb: v0 });
        let (mut i, mut v) = (0, v0);
        loop {
            let next = speeds[(i + 1) % speeds.len()];
            let need = v * hold + 0.5 * (v + next) * ramp + 0.5 * next * ramp;
            if speeds.len() > 1 && length - s >= need {
                push(&mut stages, hold, Leg::Hold { v });
                s = push(&mut stages, ramp, Leg::Ramp { va: v, vb: next });
                v = next;
                i += 1;
                continue;
            }
            let h = ((length - s - 0.5 * v * ramp) / v).max(0.0);
            push(&mut stages, h, Leg::Hold { v });
            push(&mut stages, ramp, Leg::Ramp { va: v, vb: 0.0 });
            break;
        }
        Ok(Self { stages, length })
    }

    pub fn duration(&self) -> f64 {
        self.stages.last().map_or(0.0, |s| s.t0 + s.dur)
    }

    pub fn max_speed(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| match s.leg {
                Leg::Hold { v } => v,
                Leg::Ramp { va, vb } => va.max(vb),
            })
            .fold(0.0, f64::max)
    }

    /// `(s, ṡ, s̈)` at time `t`; at rest before 0 and after the end.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        if self.stages.is_empty() || t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t >= self.duration() {
            return (self.length, 0.0, 0.0);
        }
        let i = self.stages.partition_point(|s| s.t0 + s.dur <= t);
        let st = &self.stages[i.min(self.stages.len() - 1)];
        st.at(t - st.t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side], [0.0, 0.0]]
    }

    #[test]
    fn square_closes_and_is_continuous() {
        let p = Path::new(&square(5.0), 0.5).unwrap();
        let end = p.at(p.length()).0;
        assert!(end[0].hypot(end[1]) < 1e-12);
        // Each turn hands over onto the next side of the square.
        let s_mid = p.length() * 3.0 / 8.0;
        assert!((p.at(s_mid).0[0] - 5.0).abs() < 1e-12);
        assert!((p.at(s_mid).1 - PI / 2.0).abs() < 1e-12);
        let (mut prev, _, mut k_prev) = p.at(0.0);
        let n = 4000;
        for i in 1..=n {
            let (q, _, k) = p.at(p.length() * i as f64 / n as f64);
            assert!((q[0] - prev[0]).hypot(q[1] - prev[1]) <= p.length() / n as f64 + 1e-9);
            assert!((k - k_prev).abs() < 0.02, "curvature jumps at {i}");
            assert!(k <= 2.0 + 1e-12);
            prev = q;
            k_prev = k;
        }
        assert!((p.heading_unwrapped(p.length()) - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn profile_covers_the_length() {
        let sp = SpeedProfile::new(10.0, &[0.5, 0.8, 0.3], 3.0, 1.0).unwrap();
        let (s, v, _) = sp.at(sp.duration());
        assert_eq!((s, v), (10.0, 0.0));
        assert_eq!(sp.max_speed(), 0.8);
        // Midpoint quadrature of ṡ reproduces s, and ṡ of s̈.
        let dt = 1e-3;
        let (mut pos, mut vel, mut t) = (0.0, 0.0, 0.0);
        while t < sp.duration() - 1e-12 {
            let (_, v, a) = sp.at(t + 0.5 * dt);
            pos += v * dt;
            vel += a * dt;
            t += dt;
            assert!((vel - sp.at(t).1).abs() < 1e-5);
        }
        assert!((pos - 10.0).abs() < 1e-3, "{pos}");
    }

    #[test]
    fn short_path_is_rejected() {
        assert!(SpeedProfile::new(0.2, &[0.5], 1.0, 1.0).is_err());
        assert_eq!(SpeedProfile::new(0.0, &[], 1.0, 1.0).unwrap().duration(), 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(Path::new(&[], 1.0).is_err());
        assert!(Path::new(&[[0.0, 0.0], [0.0, 0.0]], 1.0).is_err());
        assert!(Path::new(&square(0.5), 1.0).is_err());
        let still = Path::new(&[[1.0, 2.0]], 1.0).unwrap();
        assert_eq!(still.length(), 0.0);
        assert_eq!(still.at(3.0).0, [1.0, 2.0]);
    }
}
